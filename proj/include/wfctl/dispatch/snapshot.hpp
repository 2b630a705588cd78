#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "wfctl/dispatch/dispatcher.hpp"

namespace wfctl::dispatch {

// Data keys that step handlers use for the metrics shown to operators.
inline constexpr const char* kAvgResidualKey = "avg_residual";
inline constexpr const char* kTranslationalKey = "translational_mm";
inline constexpr const char* kRotationalKey = "rotational_deg";

struct Snapshot {
  std::uint64_t sequence = 0;
  core::ActiveStates states;
  std::map<std::string, bool> flags;
  std::map<std::string, std::vector<std::string>> available;
  std::vector<core::TransitionRecord> recent;
  std::optional<double> avg_residual;
  std::optional<double> translational_mm;
  std::optional<double> rotational_deg;
  std::map<std::string, std::uint64_t> telemetry;
};

Snapshot take_snapshot(const Dispatcher& d, std::uint64_t sequence, std::size_t recent = 20);

nlohmann::json to_json(const Snapshot& s);

}  // namespace wfctl::dispatch
