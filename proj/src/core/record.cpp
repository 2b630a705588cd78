#include "wfctl/core/record.hpp"

#include <istream>
#include <ostream>
#include <stdexcept>

namespace wfctl::core {

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::kAccepted: return "Accepted";
    case Outcome::kRejectedInvalid: return "RejectedInvalid";
    case Outcome::kRejectedStepFailure: return "RejectedStepFailure";
  }
  return "?";
}

std::string_view to_string(Trigger t) {
  switch (t) {
    case Trigger::kRequest: return "request";
    case Trigger::kChildSignal: return "child-signal";
    case Trigger::kParentReinit: return "parent-reinit";
  }
  return "?";
}

std::optional<Outcome> parse_outcome(std::string_view text) {
  for (auto o : {Outcome::kAccepted, Outcome::kRejectedInvalid, Outcome::kRejectedStepFailure}) {
    if (to_string(o) == text) return o;
  }
  return std::nullopt;
}

std::optional<Trigger> parse_trigger(std::string_view text) {
  for (auto t : {Trigger::kRequest, Trigger::kChildSignal, Trigger::kParentReinit}) {
    if (to_string(t) == text) return t;
  }
  return std::nullopt;
}

nlohmann::json to_json(const TransitionRecord& r) {
  nlohmann::json cascade = nlohmann::json::array();
  for (const auto& c : r.cascade) {
    cascade.push_back({{"direction", c.direction == CascadeSignal::Direction::kToParent ? "parent" : "child"},
                       {"branch", c.branch},
                       {"operation", c.operation},
                       {"record", c.record_id}});
  }
  nlohmann::json j = {{"id", r.id},
                      {"branch", r.branch},
                      {"from", r.from},
                      {"to", r.to},
                      {"operation", r.operation},
                      {"outcome", to_string(r.outcome)},
                      {"trigger", to_string(r.trigger)},
                      {"cascade", cascade},
                      {"timestamp", r.timestamp}};
  j["cause"] = r.cause ? nlohmann::json(*r.cause) : nlohmann::json(nullptr);
  if (!r.detail.empty()) j["detail"] = r.detail;
  if (!r.data.empty()) j["data"] = r.data;
  return j;
}

TransitionRecord record_from_json(const nlohmann::json& j) {
  TransitionRecord r;
  r.id = j.at("id").get<std::uint64_t>();
  r.branch = j.at("branch").get<std::string>();
  r.from = j.at("from").get<std::string>();
  r.to = j.at("to").get<std::string>();
  r.operation = j.at("operation").get<std::string>();
  auto outcome = parse_outcome(j.at("outcome").get<std::string>());
  auto trigger = parse_trigger(j.at("trigger").get<std::string>());
  if (!outcome || !trigger) throw std::invalid_argument("bad outcome/trigger in transition record");
  r.outcome = *outcome;
  r.trigger = *trigger;
  if (j.contains("cause") && !j["cause"].is_null()) r.cause = j["cause"].get<std::uint64_t>();
  for (const auto& c : j.at("cascade")) {
    CascadeSignal s;
    s.direction = c.at("direction") == "parent" ? CascadeSignal::Direction::kToParent
                                                : CascadeSignal::Direction::kToChild;
    s.branch = c.at("branch").get<std::string>();
    s.operation = c.at("operation").get<std::string>();
    s.record_id = c.at("record").get<std::uint64_t>();
    r.cascade.push_back(std::move(s));
  }
  r.detail = j.value("detail", std::string{});
  if (j.contains("data")) r.data = j["data"].get<std::map<std::string, double>>();
  r.timestamp = j.at("timestamp").get<double>();
  return r;
}

void write_jsonl(std::ostream& out, const std::vector<TransitionRecord>& records) {
  for (const auto& r : records) out << to_json(r).dump() << '\n';
}

std::vector<TransitionRecord> read_jsonl(std::istream& in) {
  std::vector<TransitionRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(record_from_json(nlohmann::json::parse(line)));
  }
  return out;
}

}  // namespace wfctl::core
