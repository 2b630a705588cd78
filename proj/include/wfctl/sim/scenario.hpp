#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "wfctl/core/record.hpp"
#include "wfctl/dispatch/dispatcher.hpp"
#include "wfctl/kin/registration.hpp"
#include "wfctl/kin/transform.hpp"

namespace wfctl::sim {

struct Scenario {
  std::string name;  // "TMS" or "Fem"
  kin::LandmarkSet planned_landmarks;
  std::vector<kin::RigidTransform> planned_poses;  // image frame
  double digitization_sigma = 0.8;                 // mm
  double placement_sigma_t = 0.0;                  // mm per axis
  double placement_sigma_r = 0.0;                  // deg per rotation-vector component
  double threshold = 5.0;                          // accepted while avg residual < threshold
  std::uint64_t seed = 1;
  kin::RigidTransform tracker_from_image;

  static Scenario tms(std::uint64_t seed = 1);
  static Scenario fem(std::uint64_t seed = 1);
  static Scenario by_name(std::string_view name, std::uint64_t seed = 1);

  std::size_t expected_landmarks() const { return name == "TMS" ? 6 : 4; }
  std::string_view workflow_text() const;
  // Throws std::invalid_argument when the landmark count does not match
  // the scenario name or a sigma is negative.
  void check() const;
};

struct InjectedFault {
  enum class Kind { kMissingLandmarkPlan, kMissingLandmark, kLargeDigitizationError };

  Kind kind = Kind::kMissingLandmarkPlan;
  int index = 0;  // 1-based landmark number
  char axis = 'x';
  double offset_mm = 0.0;

  static InjectedFault missing_plan() { return {Kind::kMissingLandmarkPlan, 0, 'x', 0.0}; }
  static InjectedFault missing_landmark(int index) { return {Kind::kMissingLandmark, index, 'x', 0.0}; }
  static InjectedFault large_error(int index, char axis, double offset_mm) {
    return {Kind::kLargeDigitizationError, index, axis, offset_mm};
  }

  std::string type_label() const;
  std::string describe(std::size_t landmark_count) const;
};

// Commands understood by the simulated system.
namespace commands {
inline constexpr const char* kConnectRobot = "CONNECT_ROBOT";
inline constexpr const char* kDisconnectRobot = "DISCONNECT_ROBOT";
inline constexpr const char* kPlanLandmarks = "PLAN_LANDMARKS";
inline constexpr const char* kAllDigitized = "ALL_DIGITIZED";
inline constexpr const char* kRegister = "REGISTRATION_REG";
inline constexpr const char* kPlanPose = "PLAN_POSE";
inline constexpr const char* kPlaceTool = "PLACE_TOOL";
inline constexpr const char* kReinitRegistration = "REINIT_REG";
inline constexpr const char* kReinitDigitization = "REINIT_DIG";
inline constexpr const char* kReinitPose = "REINIT_POSE";
inline constexpr const char* kReinitRobot = "REINIT_ROBOT";
inline constexpr const char* kTrackerPose = "TRACKER_POSE";
inline constexpr const char* kStartVis = "START_VIS";
inline constexpr int kMaxLandmarkCommands = 8;
// DIGITIZE_LM_<k>, k = 1..8; routed to landmark k-1.
std::string digitize(int landmark);
}  // namespace commands

// Mutable per-run state behind the step handlers.
struct Session {
  explicit Session(Scenario s);

  Scenario scenario;
  std::mt19937_64 rng;
  std::vector<Eigen::Vector3d> planned;
  std::map<int, Eigen::Vector3d> digitized;
  std::optional<kin::RegistrationResult> registration;
  std::optional<kin::RigidTransform> pose_plan;
  std::vector<kin::PoseError> placements;
  std::vector<std::vector<double>> tracker_stream;
  std::uint64_t visualization_starts = 0;
};

// Registers handlers, command bindings, flags and sinks for the
// registration workflow against `session`, which must outlive `d`.
void configure(dispatch::Dispatcher& d, Session& session);

// Tracker-frame position of planned landmark `index` (0-based) plus
// isotropic Gaussian noise.
Eigen::Vector3d simulate_digitization(const Scenario& s, std::size_t index, std::mt19937_64& rng);
// Planned pose (image frame) mapped to the tracker frame and perturbed.
kin::RigidTransform simulate_placement(const Scenario& s, const kin::RigidTransform& target,
                                       std::mt19937_64& rng);

struct RunReport {
  std::string scenario;
  std::optional<InjectedFault> fault;
  std::size_t landmark_count = 0;
  std::uint64_t seed = 0;
  std::optional<double> avg_residual;
  std::optional<std::string> rejected_operation;  // e.g. "100->110"
  std::optional<std::string> rejection_state;     // e.g. "110"
  std::size_t rejections = 0;
  std::string final_registration;
  std::vector<std::string> verdicts;
  std::vector<core::TransitionRecord> transitions;
  std::vector<kin::PoseError> placement_errors;
  std::map<std::string, bool> flags;
};

struct RunOptions {
  bool flags_enabled = true;
};

RunReport run_scenario(const Scenario& scenario, const std::optional<InjectedFault>& fault,
                       const RunOptions& options = {});

struct ExpectedRejection {
  std::string operation;  // "000->100" or "100->110"
  std::string state;      // "100", "110" or "111"
};
ExpectedRejection expected_rejection(InjectedFault::Kind kind);

// Empty when `r` shows the documented behaviour for `fault`: exactly one
// rejection at the expected edge and state, or for a control no rejection
// and registration 111. Otherwise a description of the mismatch.
std::string check_report(const std::optional<InjectedFault>& fault, const RunReport& r);

// Registration state name used in the rejection column.
std::string registration_state_label(const std::string& digits);

struct SuiteRow {
  int test_number = 0;
  std::string scenario;
  std::optional<InjectedFault> fault;
};

// The 20 failure-injection rows: controls, missing plan, missing landmark
// #1-#3, and large digitization errors #1 x+25, #2 y+20, #3 z-23.
std::vector<SuiteRow> table_rows();

struct SuiteOptions {
  std::uint64_t base_seed = 1;
  std::optional<double> sigma;
  std::optional<double> threshold;
  bool flags_enabled = true;
};

// Row i runs with seed base_seed + test_number.
std::vector<RunReport> run_suite(const SuiteOptions& options = {});

enum class ReportFormat { kCsv, kText, kJsonl };
std::optional<ReportFormat> parse_format(std::string_view text);

void emit_report(std::ostream& out, const std::vector<RunReport>& reports, ReportFormat format,
                 const std::vector<int>& test_numbers = {});

nlohmann::json to_json(const RunReport& r);
// Inverse of to_json; throws nlohmann::json::exception on malformed input.
RunReport report_from_json(const nlohmann::json& j);

// Scenario config (JSON): scenario, landmarks (CSV path), sigma,
// placement_sigma_t, placement_sigma_r, seed, threshold, pose_count.
Scenario load_scenario_config(const std::string& path);
Scenario scenario_from_json(const nlohmann::json& j, const std::string& base_dir = ".");

}  // namespace wfctl::sim
