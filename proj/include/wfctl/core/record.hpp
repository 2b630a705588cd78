#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace wfctl::core {

enum class Outcome { kAccepted, kRejectedInvalid, kRejectedStepFailure };

// What started an operation: an external request, a child's upward signal,
// or a parent re-initiating this branch.
enum class Trigger { kRequest, kChildSignal, kParentReinit };

std::string_view to_string(Outcome o);
std::string_view to_string(Trigger t);
std::optional<Outcome> parse_outcome(std::string_view text);
std::optional<Trigger> parse_trigger(std::string_view text);

struct CascadeSignal {
  enum class Direction { kToParent, kToChild };
  Direction direction = Direction::kToParent;
  std::string branch;
  std::string operation;
  std::uint64_t record_id = 0;  // record produced by the signalled operation

  bool operator==(const CascadeSignal&) const = default;
};

struct TransitionRecord {
  std::uint64_t id = 0;
  std::string branch;
  std::string from;
  std::string to;
  std::string operation;
  Outcome outcome = Outcome::kRejectedInvalid;
  Trigger trigger = Trigger::kRequest;
  std::optional<std::uint64_t> cause;  // record whose cascade produced this one
  std::vector<CascadeSignal> cascade;
  std::string detail;
  std::map<std::string, double> data;
  double timestamp = 0.0;

  bool accepted() const { return outcome == Outcome::kAccepted; }
  bool operator==(const TransitionRecord&) const = default;
};

nlohmann::json to_json(const TransitionRecord& r);
TransitionRecord record_from_json(const nlohmann::json& j);

// One JSON object per line.
void write_jsonl(std::ostream& out, const std::vector<TransitionRecord>& records);
std::vector<TransitionRecord> read_jsonl(std::istream& in);

}  // namespace wfctl::core
