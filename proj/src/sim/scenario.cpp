#include "wfctl/sim/scenario.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "wfctl/builtin_workflows.hpp"
#include "wfctl/dispatch/snapshot.hpp"

namespace wfctl::sim {

namespace {

constexpr double kPi = 3.14159265358979323846;
// Planned poses are part of the scenario geometry, not of a run.
constexpr std::uint64_t kPoseSeed = 0x5eed0012;
constexpr std::size_t kPoseCount = 12;

kin::Landmark hemisphere_point(const std::string& label, double elevation_deg, double azimuth_deg) {
  const double r = 90.0;
  const double el = elevation_deg * kPi / 180.0, az = azimuth_deg * kPi / 180.0;
  return {label, {r * std::cos(el) * std::cos(az), r * std::cos(el) * std::sin(az), r * std::sin(el)}};
}

// Tool frame whose z axis points along -normal (into the surface).
kin::RigidTransform surface_pose(const Eigen::Vector3d& point, const Eigen::Vector3d& normal,
                                 double yaw_rad) {
  Eigen::Vector3d z = -normal.normalized();
  Eigen::Vector3d helper = std::abs(z.z()) < 0.9 ? Eigen::Vector3d::UnitZ() : Eigen::Vector3d::UnitX();
  Eigen::Vector3d x = helper.cross(z).normalized();
  x = Eigen::AngleAxisd(yaw_rad, z) * x;
  Eigen::Matrix3d r;
  r.col(0) = x;
  r.col(1) = z.cross(x);
  r.col(2) = z;
  kin::RigidTransform t;
  t.rotation = Eigen::Quaterniond(r).normalized();
  if (t.rotation.w() < 0) t.rotation.coeffs() *= -1.0;
  t.translation = point;
  return t;
}

std::vector<kin::RigidTransform> hemisphere_poses(std::size_t count) {
  std::mt19937_64 rng(kPoseSeed);
  std::uniform_real_distribution<double> el(15.0, 75.0), az(0.0, 360.0), yaw(-kPi, kPi);
  std::vector<kin::RigidTransform> out;
  for (std::size_t i = 0; i < count; ++i) {
    auto p = hemisphere_point("", el(rng), az(rng)).point;
    out.push_back(surface_pose(p, p.normalized(), yaw(rng)));
  }
  return out;
}

// Points on the four long faces of the 40 x 40 x 120 box.
std::vector<kin::RigidTransform> box_poses(std::size_t count) {
  std::mt19937_64 rng(kPoseSeed + 1);
  std::uniform_real_distribution<double> along(5.0, 35.0), height(10.0, 110.0), yaw(-kPi, kPi);
  std::uniform_int_distribution<int> face(0, 3);
  std::vector<kin::RigidTransform> out;
  for (std::size_t i = 0; i < count; ++i) {
    double a = along(rng), h = height(rng);
    Eigen::Vector3d p, n;
    switch (face(rng)) {
      case 0: p = {0, a, h}, n = -Eigen::Vector3d::UnitX(); break;
      case 1: p = {40, a, h}, n = Eigen::Vector3d::UnitX(); break;
      case 2: p = {a, 0, h}, n = -Eigen::Vector3d::UnitY(); break;
      default: p = {a, 40, h}, n = Eigen::Vector3d::UnitY(); break;
    }
    out.push_back(surface_pose(p, n, yaw(rng)));
  }
  return out;
}

kin::RigidTransform default_tracker_from_image() {
  return kin::RigidTransform::from_rotation_vector_deg({12.0, -25.0, 40.0}, {150.0, -60.0, 820.0});
}

Eigen::Vector3d gaussian3(std::mt19937_64& rng, double sigma) {
  if (sigma <= 0) return Eigen::Vector3d::Zero();
  std::normal_distribution<double> n(0.0, sigma);
  double x = n(rng), y = n(rng), z = n(rng);
  return {x, y, z};
}

}  // namespace

Scenario Scenario::tms(std::uint64_t seed) {
  Scenario s;
  s.name = "TMS";
  s.planned_landmarks.frame = kin::Frame::kPlanned;
  s.planned_landmarks.points = {hemisphere_point("LM1", 22, 305), hemisphere_point("LM2", 83, 189),
                                hemisphere_point("LM3", 54, 26),  hemisphere_point("LM4", 2, 64),
                                hemisphere_point("LM5", 17, 253), hemisphere_point("LM6", 11, 129)};
  s.planned_poses = hemisphere_poses(kPoseCount);
  s.placement_sigma_t = 0.319;
  s.placement_sigma_r = 0.106;
  s.seed = seed;
  s.tracker_from_image = default_tracker_from_image();
  return s;
}

Scenario Scenario::fem(std::uint64_t seed) {
  Scenario s;
  s.name = "Fem";
  s.planned_landmarks.frame = kin::Frame::kPlanned;
  s.planned_landmarks.points = {{"LM1", {0, 4, 33}}, {"LM2", {15, 0, 46}}, {"LM3", {18, 40, 100}},
                                {"LM4", {28, 37, 0}}};
  s.planned_poses = box_poses(kPoseCount);
  s.placement_sigma_t = 0.375;
  s.placement_sigma_r = 0.0927;
  s.seed = seed;
  s.tracker_from_image = default_tracker_from_image();
  return s;
}

Scenario Scenario::by_name(std::string_view name, std::uint64_t seed) {
  if (name == "TMS" || name == "tms") return tms(seed);
  if (name == "Fem" || name == "fem") return fem(seed);
  throw std::invalid_argument("unknown scenario '" + std::string(name) + "' (expected TMS or Fem)");
}

std::string_view Scenario::workflow_text() const {
  return name == "TMS" ? std::string_view(builtin::kRatms) : std::string_view(builtin::kFemoroplasty);
}

void Scenario::check() const {
  if (name != "TMS" && name != "Fem") throw std::invalid_argument("unknown scenario '" + name + "'");
  if (planned_landmarks.size() != expected_landmarks()) {
    throw std::invalid_argument(name + " scenario needs " + std::to_string(expected_landmarks()) +
                                " landmarks, got " + std::to_string(planned_landmarks.size()));
  }
  planned_landmarks.check_labels();
  if (!(digitization_sigma >= 0) || !(placement_sigma_t >= 0) || !(placement_sigma_r >= 0)) {
    throw std::invalid_argument("noise sigmas must be non-negative");
  }
  if (!(threshold > 0) || !std::isfinite(threshold)) throw std::invalid_argument("threshold must be positive");
}

std::string InjectedFault::type_label() const {
  switch (kind) {
    case Kind::kMissingLandmarkPlan: return "Missing Landmark Plan";
    case Kind::kMissingLandmark: return "Missing a Landmark";
    case Kind::kLargeDigitizationError: return "Large Digitization Error";
  }
  return "?";
}

std::string InjectedFault::describe(std::size_t landmark_count) const {
  const std::string which = "#" + std::to_string(index) + "/" + std::to_string(landmark_count);
  switch (kind) {
    case Kind::kMissingLandmarkPlan: return "Missing Landmark Plan";
    case Kind::kMissingLandmark: return "Missing Landmark " + which;
    case Kind::kLargeDigitizationError: {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%g", offset_mm);
      return "Landmark " + which + " " + std::string(1, axis) + " " + buf + "mm";
    }
  }
  return "?";
}

std::string commands::digitize(int landmark) { return "DIGITIZE_LM_" + std::to_string(landmark); }

Session::Session(Scenario s) : scenario(std::move(s)), rng(scenario.seed) {}

Eigen::Vector3d simulate_digitization(const Scenario& s, std::size_t index, std::mt19937_64& rng) {
  if (index >= s.planned_landmarks.size()) {
    throw std::out_of_range("landmark index " + std::to_string(index) + " out of range");
  }
  return s.tracker_from_image.apply(s.planned_landmarks.points[index].point) +
         gaussian3(rng, s.digitization_sigma);
}

kin::RigidTransform simulate_placement(const Scenario& s, const kin::RigidTransform& target,
                                       std::mt19937_64& rng) {
  Eigen::Vector3d dt = gaussian3(rng, s.placement_sigma_t);
  Eigen::Vector3d dr = gaussian3(rng, s.placement_sigma_r);
  auto noise = kin::RigidTransform::from_rotation_vector_deg(dr, Eigen::Vector3d::Zero());
  kin::RigidTransform measured;
  measured.rotation = (target.rotation * noise.rotation).normalized();
  measured.translation = target.translation + dt;
  return measured;
}

// ---------------------------------------------------------------- wiring

namespace {

using core::StepContext;
using core::StepResult;

std::vector<Eigen::Vector3d> triples(const std::vector<double>& v) {
  std::vector<Eigen::Vector3d> out;
  for (std::size_t i = 0; i + 2 < v.size(); i += 3) out.emplace_back(v[i], v[i + 1], v[i + 2]);
  return out;
}

}  // namespace

void configure(dispatch::Dispatcher& d, Session& session) {
  using dispatch::CommandBinding;
  Session* s = &session;

  d.register_handler("store_landmark_plan", [s](const StepContext& c) {
    if (c.message.values.size() < 9 || c.message.values.size() % 3 != 0) {
      return StepResult::failure("a landmark plan needs at least 3 points");
    }
    s->planned = triples(c.message.values);
    s->digitized.clear();
    s->registration.reset();
    return StepResult::success();
  });
  d.register_handler("clear_landmark_plan", [s](const StepContext&) {
    s->planned.clear();
    s->digitized.clear();
    s->registration.reset();
    return StepResult::success();
  });
  d.register_handler("store_digitization", [s](const StepContext& c) {
    const int k = c.message.route_index;
    if (k < 0 || static_cast<std::size_t>(k) >= s->planned.size()) {
      return StepResult::failure("no planned landmark #" + std::to_string(k + 1));
    }
    if (c.message.values.size() != 3) return StepResult::failure("digitization needs 3 values");
    s->digitized[k] = Eigen::Vector3d(c.message.values[0], c.message.values[1], c.message.values[2]);
    s->registration.reset();
    return StepResult::success();
  });
  d.register_handler("clear_digitizations", [s](const StepContext&) {
    s->digitized.clear();
    s->registration.reset();
    return StepResult::success();
  });
  d.register_handler("check_all_digitized", [s](const StepContext&) {
    for (std::size_t k = 0; k < s->planned.size(); ++k) {
      if (!s->digitized.count(static_cast<int>(k))) {
        return StepResult::failure("landmark #" + std::to_string(k + 1) + " of " +
                                   std::to_string(s->planned.size()) + " not digitized");
      }
    }
    return StepResult::success();
  });
  d.register_handler("register_landmarks", [s](const StepContext&) {
    std::vector<Eigen::Vector3d> digitized;
    for (std::size_t k = 0; k < s->planned.size(); ++k) {
      auto it = s->digitized.find(static_cast<int>(k));
      if (it == s->digitized.end()) return StepResult::failure("landmark #" + std::to_string(k + 1) + " missing");
      digitized.push_back(it->second);
    }
    kin::RegistrationResult r;
    try {
      r = kin::register_points(s->planned, digitized);
    } catch (const kin::RegistrationError& e) {
      return StepResult::failure(e.what());
    }
    std::map<std::string, double> data{{dispatch::kAvgResidualKey, r.avg_residual}};
    if (!(r.avg_residual < s->scenario.threshold)) {
      char buf[128];
      std::snprintf(buf, sizeof buf, "average residual %.4f mm exceeds threshold %.4f mm", r.avg_residual,
                    s->scenario.threshold);
      return StepResult::failure(buf, data);
    }
    s->registration = r;
    return StepResult::success(data);
  });
  d.register_handler("store_pose_plan", [s](const StepContext& c) {
    const auto& v = c.message.values;
    if (v.size() != 6) return StepResult::failure("pose plan needs 6 values");
    s->pose_plan = kin::RigidTransform::from_rotation_vector_deg({v[3], v[4], v[5]}, {v[0], v[1], v[2]});
    return StepResult::success();
  });
  d.register_handler("clear_pose_plan", [s](const StepContext&) {
    s->pose_plan.reset();
    return StepResult::success();
  });
  d.register_handler("require_pose_planned", [](const StepContext& c) {
    return c.states.at("pose-plan") == "1" ? StepResult::success() : StepResult::failure("no pose planned");
  });
  d.register_handler("require_robot_connected", [](const StepContext& c) {
    return c.states.at("robot-connection") == "1" ? StepResult::success()
                                                  : StepResult::failure("robot not connected");
  });
  d.register_handler("place_tool", [s](const StepContext&) {
    if (!s->registration || !s->pose_plan) return StepResult::failure("registration or pose plan missing");
    auto target = kin::compose(s->registration->transform, *s->pose_plan);
    auto measured = simulate_placement(s->scenario, target, s->rng);
    auto e = kin::pose_error(target, measured);
    s->placements.push_back(e);
    return StepResult::success({{dispatch::kTranslationalKey, e.translational_mm},
                                {dispatch::kRotationalKey, e.rotational_deg}});
  });
  d.declare_noop("connect_robot");
  d.declare_noop("disconnect_robot");

  d.register_sink("tracker", [s](const dispatch::Command& c) { s->tracker_stream.push_back(c.payload.values); });
  d.register_sink("visualization", [s](const dispatch::Command&) { ++s->visualization_starts; });

  d.register_command(commands::kConnectRobot, CommandBinding::op("robot-connection", "connect"));
  d.register_command(commands::kDisconnectRobot, CommandBinding::op("robot-connection", "disconnect"));
  d.register_command(commands::kPlanLandmarks,
                     CommandBinding::op("registration", "plan_landmarks", core::Arity::repeated(3)));
  for (int k = 1; k <= commands::kMaxLandmarkCommands; ++k) {
    d.register_command(commands::digitize(k), CommandBinding::op("digitization", "digitize_point",
                                                                 core::Arity::exactly(3), k - 1));
  }
  d.register_command(commands::kAllDigitized, CommandBinding::op("digitization", "all_digitized"));
  d.register_command(commands::kRegister, CommandBinding::op("registration", "register"));
  d.register_command(commands::kPlanPose, CommandBinding::op("pose-plan", "plan_pose", core::Arity::exactly(6)));
  d.register_command(commands::kPlaceTool, CommandBinding::op("registration", "place_tool"));
  d.register_command(commands::kReinitRegistration, CommandBinding::reinit("registration"));
  d.register_command(commands::kReinitDigitization, CommandBinding::reinit("digitization"));
  d.register_command(commands::kReinitPose, CommandBinding::reinit("pose-plan"));
  d.register_command(commands::kReinitRobot, CommandBinding::reinit("robot-connection"));
  d.register_command(commands::kTrackerPose, CommandBinding::data("tracker", core::Arity::exactly(6)));
  d.register_command(commands::kStartVis, CommandBinding::data("visualization", core::Arity::exactly(0)));

  d.bind_flag("planned", "registration", 0);
  d.bind_flag("digitized", "registration", 1);
  d.bind_flag("registered", "registration", 2);
  d.bind_flag("all_digitized", "digitization", 0);
  d.bind_flag("pose_planned", "pose-plan", 0);
  d.bind_flag("robot_connected", "robot-connection", 0);
}

// ---------------------------------------------------------------- config

Scenario scenario_from_json(const nlohmann::json& j, const std::string& base_dir) {
  Scenario s = Scenario::by_name(j.value("scenario", std::string("TMS")), j.value("seed", std::uint64_t{1}));
  if (j.contains("landmarks")) {
    std::filesystem::path p = j.at("landmarks").get<std::string>();
    if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
    s.planned_landmarks = kin::read_landmarks_csv(p.string(), kin::Frame::kPlanned);
  }
  if (j.contains("sigma")) s.digitization_sigma = j.at("sigma").get<double>();
  if (j.contains("placement_sigma_t")) s.placement_sigma_t = j.at("placement_sigma_t").get<double>();
  if (j.contains("placement_sigma_r")) s.placement_sigma_r = j.at("placement_sigma_r").get<double>();
  if (j.contains("threshold")) s.threshold = j.at("threshold").get<double>();
  if (j.contains("pose_count")) {
    auto n = j.at("pose_count").get<std::size_t>();
    s.planned_poses = s.name == "TMS" ? hemisphere_poses(n) : box_poses(n);
  }
  s.check();
  return s;
}

Scenario load_scenario_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
  return scenario_from_json(j, std::filesystem::path(path).parent_path().string());
}

}  // namespace wfctl::sim
