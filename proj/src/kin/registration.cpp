#include "wfctl/kin/registration.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <utility>

namespace wfctl::kin {

void LandmarkSet::check_labels() const {
  std::set<std::string> seen;
  for (const auto& p : points) {
    if (!seen.insert(p.label).second) {
      throw std::invalid_argument("duplicate landmark label '" + p.label + "'");
    }
  }
}

RegistrationResult evaluate(const RigidTransform& t, const std::vector<Eigen::Vector3d>& planned,
                            const std::vector<Eigen::Vector3d>& digitized) {
  RegistrationResult r;
  r.transform = t;
  double sum = 0, sq = 0;
  for (std::size_t i = 0; i < planned.size(); ++i) {
    double d = (t.apply(planned[i]) - digitized[i]).norm();
    r.residuals.push_back(d);
    sum += d;
    sq += d * d;
  }
  auto n = static_cast<double>(planned.size());
  r.avg_residual = n > 0 ? sum / n : 0.0;
  r.rms = n > 0 ? std::sqrt(sq / n) : 0.0;
  return r;
}

RegistrationResult register_points(const std::vector<Eigen::Vector3d>& planned,
                                   const std::vector<Eigen::Vector3d>& digitized) {
  if (planned.size() != digitized.size()) {
    throw RegistrationError("landmark counts differ: " + std::to_string(planned.size()) + " vs " +
                            std::to_string(digitized.size()));
  }
  if (planned.size() < 3) throw RegistrationError("registration needs at least 3 landmarks");
  for (const auto* set : {&planned, &digitized}) {
    for (const auto& p : *set) {
      if (!p.allFinite()) throw RegistrationError("non-finite landmark coordinate");
    }
  }

  const auto n = static_cast<double>(planned.size());
  Eigen::Vector3d cp = Eigen::Vector3d::Zero(), cd = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < planned.size(); ++i) {
    cp += planned[i];
    cd += digitized[i];
  }
  cp /= n;
  cd /= n;

  Eigen::Matrix3d spread = Eigen::Matrix3d::Zero();
  Eigen::Matrix3d s = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < planned.size(); ++i) {
    Eigen::Vector3d a = planned[i] - cp;
    s += a * (digitized[i] - cd).transpose();
    spread += a * a.transpose();
  }
  // Collinear (or coincident) planned points leave the rotation about
  // their line undetermined.
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> shape(spread);
  double largest = shape.eigenvalues()(2);
  if (largest <= 0 || shape.eigenvalues()(1) <= 1e-10 * largest) {
    throw RegistrationError("planned landmarks are collinear; rotation is not unique");
  }

  Eigen::Matrix4d nmat;
  const double sxx = s(0, 0), sxy = s(0, 1), sxz = s(0, 2);
  const double syx = s(1, 0), syy = s(1, 1), syz = s(1, 2);
  const double szx = s(2, 0), szy = s(2, 1), szz = s(2, 2);
  nmat << sxx + syy + szz, syz - szy, szx - sxz, sxy - syx,
          syz - szy, sxx - syy - szz, sxy + syx, szx + sxz,
          szx - sxz, sxy + syx, -sxx + syy - szz, syz + szy,
          sxy - syx, szx + sxz, syz + szy, -sxx - syy + szz;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(nmat);
  if (eig.info() != Eigen::Success) throw RegistrationError("eigen decomposition failed");
  const Eigen::Vector4d lambda = eig.eigenvalues();
  const double scale = std::max(std::abs(lambda(3)), std::abs(lambda(0)));
  if (scale > 0 && lambda(3) - lambda(2) <= 1e-12 * scale) {
    throw RegistrationError("degenerate landmark configuration; rotation is not unique");
  }
  Eigen::Vector4d v = eig.eigenvectors().col(3);
  Eigen::Quaterniond q(v(0), v(1), v(2), v(3));
  q.normalize();
  if (q.w() < 0) q.coeffs() *= -1.0;

  RigidTransform t;
  t.rotation = q;
  t.translation = cd - q * cp;
  return evaluate(t, planned, digitized);
}

RegistrationResult register_landmarks(const LandmarkSet& planned, const LandmarkSet& digitized) {
  planned.check_labels();
  digitized.check_labels();
  if (planned.size() != digitized.size()) {
    throw RegistrationError("landmark counts differ: " + std::to_string(planned.size()) + " vs " +
                            std::to_string(digitized.size()));
  }
  std::vector<Eigen::Vector3d> a, b;
  for (std::size_t i = 0; i < planned.size(); ++i) {
    if (planned.points[i].label != digitized.points[i].label) {
      throw RegistrationError("landmark " + std::to_string(i) + " label mismatch: '" +
                              planned.points[i].label + "' vs '" + digitized.points[i].label + "'");
    }
    a.push_back(planned.points[i].point);
    b.push_back(digitized.points[i].point);
  }
  return register_points(a, b);
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) {
    auto b = field.find_first_not_of(" \t\r");
    auto e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? "" : field.substr(b, e - b + 1));
  }
  return out;
}

bool parse_double(const std::string& s, double& v) {
  const char* first = s.data();
  if (!s.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  return !s.empty() && ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(v);
}

std::ifstream open_or_throw(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return in;
}

}  // namespace

LandmarkSet read_landmarks_csv(std::istream& in, Frame frame) {
  LandmarkSet set;
  set.frame = frame;
  std::string line;
  int line_no = 0;
  bool first_row = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
    const bool header_allowed = std::exchange(first_row, false);
    auto f = split_csv(line);
    if (f.size() != 4) {
      throw std::runtime_error("landmark CSV line " + std::to_string(line_no) + ": expected 4 fields");
    }
    Eigen::Vector3d p;
    bool ok = parse_double(f[1], p.x()) && parse_double(f[2], p.y()) && parse_double(f[3], p.z());
    if (!ok) {
      if (header_allowed) continue;  // header row
      throw std::runtime_error("landmark CSV line " + std::to_string(line_no) + ": bad number");
    }
    set.points.push_back({f[0], p});
  }
  set.check_labels();
  return set;
}

LandmarkSet read_landmarks_csv(const std::string& path, Frame frame) {
  auto in = open_or_throw(path);
  return read_landmarks_csv(in, frame);
}

void write_landmarks_csv(std::ostream& out, const LandmarkSet& set) {
  out << "label,x,y,z\n" << std::setprecision(17);
  for (const auto& p : set.points) {
    out << p.label << ',' << p.point.x() << ',' << p.point.y() << ',' << p.point.z() << '\n';
  }
}

std::vector<RigidTransform> read_poses_csv(std::istream& in) {
  std::vector<RigidTransform> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
    auto f = split_csv(line);
    if (f.size() != 7) {
      throw std::runtime_error("pose CSV line " + std::to_string(line_no) + ": expected 7 fields");
    }
    double v[7];
    bool ok = true;
    for (int i = 0; i < 7; ++i) ok = ok && parse_double(f[static_cast<std::size_t>(i)], v[i]);
    if (!ok) {
      if (out.empty() && line_no == 1) continue;
      throw std::runtime_error("pose CSV line " + std::to_string(line_no) + ": bad number");
    }
    Eigen::Quaterniond q(v[3], v[0], v[1], v[2]);
    if (std::abs(q.norm() - 1.0) > 1e-6) {
      throw std::runtime_error("pose CSV line " + std::to_string(line_no) + ": quaternion not unit");
    }
    RigidTransform t;
    t.rotation = q.normalized();
    t.translation = Eigen::Vector3d(v[4], v[5], v[6]);
    out.push_back(t);
  }
  return out;
}

std::vector<RigidTransform> read_poses_csv(const std::string& path) {
  auto in = open_or_throw(path);
  return read_poses_csv(in);
}

void write_poses_csv(std::ostream& out, const std::vector<RigidTransform>& poses) {
  out << "qx,qy,qz,qw,tx,ty,tz\n" << std::setprecision(17);
  for (const auto& p : poses) {
    const auto& q = p.rotation;
    out << q.x() << ',' << q.y() << ',' << q.z() << ',' << q.w() << ',' << p.translation.x() << ','
        << p.translation.y() << ',' << p.translation.z() << '\n';
  }
}

}  // namespace wfctl::kin
