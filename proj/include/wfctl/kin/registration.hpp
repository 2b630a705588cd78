#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "wfctl/kin/transform.hpp"

namespace wfctl::kin {

enum class Frame { kPlanned, kDigitized };

struct Landmark {
  std::string label;
  Eigen::Vector3d point = Eigen::Vector3d::Zero();
};

struct LandmarkSet {
  Frame frame = Frame::kPlanned;
  std::vector<Landmark> points;

  std::size_t size() const { return points.size(); }
  // Throws std::invalid_argument on duplicate labels.
  void check_labels() const;
};

struct RegistrationResult {
  RigidTransform transform;  // planned -> digitized
  std::vector<double> residuals;
  double avg_residual = 0.0;  // mean Euclidean distance
  double rms = 0.0;
};

class RegistrationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Least-squares rigid fit in closed form (unit quaternion from the
// eigenvector of the 4x4 cross-covariance matrix). Landmarks are paired by
// position; labels must agree.
RegistrationResult register_landmarks(const LandmarkSet& planned, const LandmarkSet& digitized);
RegistrationResult register_points(const std::vector<Eigen::Vector3d>& planned,
                                   const std::vector<Eigen::Vector3d>& digitized);

// Residual statistics of a given transform over paired points.
RegistrationResult evaluate(const RigidTransform& t, const std::vector<Eigen::Vector3d>& planned,
                            const std::vector<Eigen::Vector3d>& digitized);

// CSV `label,x,y,z`; an optional header row whose x column is not numeric
// is skipped. Lines starting with '#' are comments.
LandmarkSet read_landmarks_csv(std::istream& in, Frame frame = Frame::kPlanned);
LandmarkSet read_landmarks_csv(const std::string& path, Frame frame = Frame::kPlanned);
void write_landmarks_csv(std::ostream& out, const LandmarkSet& set);

// CSV `qx,qy,qz,qw,tx,ty,tz`, one pose per line.
std::vector<RigidTransform> read_poses_csv(std::istream& in);
std::vector<RigidTransform> read_poses_csv(const std::string& path);
void write_poses_csv(std::ostream& out, const std::vector<RigidTransform>& poses);

}  // namespace wfctl::kin
