#include "wfctl/dispatch/snapshot.hpp"

namespace wfctl::dispatch {

namespace {

std::optional<double> lookup(const std::map<std::string, double>& data, const char* key) {
  auto it = data.find(key);
  if (it == data.end()) return std::nullopt;
  return it->second;
}

nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace

Snapshot take_snapshot(const Dispatcher& d, std::uint64_t sequence, std::size_t recent) {
  Snapshot s;
  s.sequence = sequence;
  const auto& m = d.machine();
  s.states = m.active_states();
  for (const auto& [flag, state] : d.get_flags()) s.flags[flag] = state.value;
  for (const auto& branch : m.branch_names()) s.available[branch] = m.available_operations(branch);
  const auto& log = m.transition_log();
  std::size_t first = log.size() > recent ? log.size() - recent : 0;
  s.recent.assign(log.begin() + static_cast<std::ptrdiff_t>(first), log.end());
  s.avg_residual = lookup(d.latest_data(), kAvgResidualKey);
  s.translational_mm = lookup(d.latest_data(), kTranslationalKey);
  s.rotational_deg = lookup(d.latest_data(), kRotationalKey);
  s.telemetry = d.telemetry();
  return s;
}

nlohmann::json to_json(const Snapshot& s) {
  nlohmann::json recent = nlohmann::json::array();
  for (const auto& r : s.recent) recent.push_back(core::to_json(r));
  return {{"type", "snapshot"},
          {"sequence", s.sequence},
          {"states", s.states},
          {"flags", s.flags},
          {"available", s.available},
          {"recent", recent},
          {"avg_residual", optional_json(s.avg_residual)},
          {"pose_error",
           {{"translational_mm", optional_json(s.translational_mm)},
            {"rotational_deg", optional_json(s.rotational_deg)}}},
          {"telemetry", s.telemetry}};
}

}  // namespace wfctl::dispatch
