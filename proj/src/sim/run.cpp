#include <cmath>
#include <memory>
#include <stdexcept>

#include "wfctl/def/definition.hpp"
#include "wfctl/dispatch/snapshot.hpp"
#include "wfctl/sim/scenario.hpp"

namespace wfctl::sim {

namespace {

// The registration step an edge out of `digits` is working toward.
std::string next_state(const std::string& digits) {
  std::string out = digits;
  auto pos = out.find('0');
  if (pos != std::string::npos) out[pos] = '1';
  return out;
}

void check_fault(const InjectedFault& f, std::size_t landmarks) {
  if (f.kind == InjectedFault::Kind::kMissingLandmarkPlan) return;
  if (f.index < 1 || static_cast<std::size_t>(f.index) > landmarks) {
    throw std::invalid_argument("fault landmark index " + std::to_string(f.index) + " out of range 1.." +
                                std::to_string(landmarks));
  }
  if (f.kind == InjectedFault::Kind::kLargeDigitizationError) {
    if (f.axis != 'x' && f.axis != 'y' && f.axis != 'z') {
      throw std::invalid_argument(std::string("fault axis must be x, y or z, got '") + f.axis + "'");
    }
    if (!std::isfinite(f.offset_mm)) throw std::invalid_argument("fault offset must be finite");
  }
}

class Driver {
 public:
  Driver(const Scenario& scenario, const std::optional<InjectedFault>& fault, const RunOptions& options)
      : session_(scenario), dispatcher_(make_options(options)), fault_(fault) {
    report_.scenario = scenario.name;
    report_.fault = fault;
    report_.landmark_count = scenario.planned_landmarks.size();
    report_.seed = scenario.seed;
    configure(dispatcher_, session_);
    dispatcher_.compile(def::parse_definition(scenario.workflow_text()));
  }

  RunReport run() {
    const Scenario& s = session_.scenario;
    const std::size_t n = s.planned_landmarks.size();
    bool ok = send(commands::kConnectRobot, {});

    if (ok) {
      if (is(InjectedFault::Kind::kMissingLandmarkPlan)) {
        mark_fault();
      } else {
        std::vector<double> plan;
        for (const auto& p : s.planned_landmarks.points) plan.insert(plan.end(), {p.point.x(), p.point.y(), p.point.z()});
        ok = send(commands::kPlanLandmarks, plan);
      }
    }
    for (std::size_t k = 0; ok && k < n; ++k) {
      const int number = static_cast<int>(k) + 1;
      if (is(InjectedFault::Kind::kMissingLandmark) && fault_->index == number) {
        mark_fault();
        continue;
      }
      Eigen::Vector3d p = simulate_digitization(s, k, session_.rng);
      if (is(InjectedFault::Kind::kLargeDigitizationError) && fault_->index == number) {
        mark_fault();
        p[fault_->axis - 'x'] += fault_->offset_mm;
      }
      ok = send(commands::digitize(number), {p.x(), p.y(), p.z()});
    }
    if (ok) ok = send(commands::kAllDigitized, {});
    if (ok) ok = send(commands::kRegister, {});
    for (std::size_t i = 0; ok && i < s.planned_poses.size(); ++i) {
      const auto& pose = s.planned_poses[i];
      Eigen::Vector3d r = pose.rotation_vector_deg();
      ok = send(commands::kPlanPose, {pose.translation.x(), pose.translation.y(), pose.translation.z(), r.x(),
                                      r.y(), r.z()});
      if (ok) ok = send(commands::kPlaceTool, {});
    }

    const auto& m = dispatcher_.machine();
    report_.final_registration = m.active_state("registration");
    report_.transitions = m.transition_log();
    report_.placement_errors = session_.placements;
    for (const auto& [k, v] : dispatcher_.get_flags()) report_.flags[k] = v.value;
    return std::move(report_);
  }

 private:
  static dispatch::DispatcherOptions make_options(const RunOptions& o) {
    dispatch::DispatcherOptions d;
    d.flags_enabled = o.flags_enabled;
    // Logical clock keeps reports byte-identical across runs.
    auto tick = std::make_shared<double>(0.0);
    d.compile.clock = [tick] { return *tick += 1.0; };
    return d;
  }

  bool is(InjectedFault::Kind k) const { return fault_ && fault_->kind == k; }

  void mark_fault() {
    const std::string from = dispatcher_.machine().active_state("registration");
    report_.rejected_operation = from + "->" + next_state(from);
  }

  bool send(const std::string& name, std::vector<double> values) {
    auto r = dispatcher_.dispatch(dispatch::Command::make(name, std::move(values)));
    report_.verdicts.push_back(r.verdict());
    if (r.status != dispatch::DispatchStatus::kTransition) {
      throw std::logic_error("scenario command " + name + " not dispatched: " + r.detail);
    }
    for (const auto& rec : dispatcher_.machine().transition_log()) {
      auto it = rec.data.find(dispatch::kAvgResidualKey);
      if (it != rec.data.end() && rec.operation == "register") report_.avg_residual = it->second;
    }
    if (r.accepted()) return true;

    ++report_.rejections;
    const std::string at = dispatcher_.machine().active_state("registration");
    report_.rejection_state = next_state(at);
    if (!report_.rejected_operation) report_.rejected_operation = at + "->" + next_state(at);
    return false;
  }

  Session session_;
  dispatch::Dispatcher dispatcher_;
  std::optional<InjectedFault> fault_;
  RunReport report_;
};

}  // namespace

RunReport run_scenario(const Scenario& scenario, const std::optional<InjectedFault>& fault,
                       const RunOptions& options) {
  scenario.check();
  if (fault) check_fault(*fault, scenario.planned_landmarks.size());
  return Driver(scenario, fault, options).run();
}

ExpectedRejection expected_rejection(InjectedFault::Kind kind) {
  switch (kind) {
    case InjectedFault::Kind::kMissingLandmarkPlan: return {"000->100", "100"};
    case InjectedFault::Kind::kMissingLandmark: return {"100->110", "110"};
    case InjectedFault::Kind::kLargeDigitizationError: return {"100->110", "111"};
  }
  return {};
}

std::string check_report(const std::optional<InjectedFault>& fault, const RunReport& r) {
  if (!fault) {
    if (r.rejections != 0) return "control run rejected at " + r.rejection_state.value_or("?");
    if (r.final_registration != "111") return "control run ended at " + r.final_registration;
    return {};
  }
  auto want = expected_rejection(fault->kind);
  if (r.rejections != 1) return std::to_string(r.rejections) + " rejections, expected 1";
  if (r.rejected_operation != want.operation) {
    return "operation " + r.rejected_operation.value_or("none") + ", expected " + want.operation;
  }
  if (r.rejection_state != want.state) {
    return "rejected at " + r.rejection_state.value_or("none") + ", expected " + want.state;
  }
  return {};
}

std::string registration_state_label(const std::string& digits) {
  if (digits == "100") return "Planned Landmarks (100)";
  if (digits == "110") return "Digitized Landmarks (110)";
  if (digits == "111") return "Registered Landmark (111)";
  if (digits == "000") return "Initial (000)";
  return "(" + digits + ")";
}

std::vector<SuiteRow> table_rows() {
  using F = InjectedFault;
  std::vector<SuiteRow> rows;
  int n = 0;
  for (const char* s : {"TMS", "Fem"}) {
    for (int i = 0; i < 3; ++i) rows.push_back({++n, s, std::nullopt});
  }
  rows.push_back({++n, "TMS", F::missing_plan()});
  rows.push_back({++n, "Fem", F::missing_plan()});
  for (const char* s : {"TMS", "Fem"}) {
    for (int k = 1; k <= 3; ++k) rows.push_back({++n, s, F::missing_landmark(k)});
  }
  for (const char* s : {"TMS", "Fem"}) {
    rows.push_back({++n, s, F::large_error(1, 'x', 25.0)});
    rows.push_back({++n, s, F::large_error(2, 'y', 20.0)});
    rows.push_back({++n, s, F::large_error(3, 'z', -23.0)});
  }
  return rows;
}

std::vector<RunReport> run_suite(const SuiteOptions& options) {
  std::vector<RunReport> out;
  for (const auto& row : table_rows()) {
    Scenario s = Scenario::by_name(row.scenario, options.base_seed + static_cast<std::uint64_t>(row.test_number));
    if (options.sigma) s.digitization_sigma = *options.sigma;
    if (options.threshold) s.threshold = *options.threshold;
    out.push_back(run_scenario(s, row.fault, RunOptions{options.flags_enabled}));
  }
  return out;
}

}  // namespace wfctl::sim
