#include "wfctl/dispatch/dispatcher.hpp"

#include <stdexcept>

namespace wfctl::dispatch {

CommandBinding CommandBinding::op(std::string branch, std::string operation, core::Arity arity,
                                  int route) {
  CommandBinding b;
  b.target = Target::kOperation;
  b.branch = std::move(branch);
  b.operation = std::move(operation);
  b.arity = std::move(arity);
  b.route_index = route;
  return b;
}

CommandBinding CommandBinding::reinit(std::string branch, int route) {
  CommandBinding b;
  b.target = Target::kReinit;
  b.branch = std::move(branch);
  b.route_index = route;
  return b;
}

CommandBinding CommandBinding::data(std::string sink, core::Arity arity, int route) {
  CommandBinding b;
  b.target = Target::kDataSink;
  b.sink = std::move(sink);
  b.arity = std::move(arity);
  b.route_index = route;
  return b;
}

std::string_view to_string(DispatchStatus s) {
  switch (s) {
    case DispatchStatus::kTransition: return "transition";
    case DispatchStatus::kData: return "data";
    case DispatchStatus::kUnknownCommand: return "unknown-command";
    case DispatchStatus::kArityMismatch: return "arity-mismatch";
  }
  return "?";
}

std::string DispatchResult::verdict() const {
  std::string out(to_string(status));
  if (record) {
    out += " " + std::string(core::to_string(record->outcome)) + " " + record->branch + "." +
           record->operation + " " + record->from + "->" + record->to;
  }
  return out;
}

Dispatcher::Dispatcher(DispatcherOptions options) : options_(std::move(options)) {}
Dispatcher::~Dispatcher() = default;

void Dispatcher::require_open(const std::string& what) const {
  if (compiled()) throw core::LifecycleError(what + " after compile");
}

void Dispatcher::register_handler(const std::string& name, core::StepHandler handler) {
  require_open("handler '" + name + "' registered");
  handlers_.add(name, std::move(handler));
}

void Dispatcher::declare_noop(const std::string& name) {
  require_open("handler '" + name + "' registered");
  handlers_.declare_noop(name);
}

void Dispatcher::register_command(std::string_view name, CommandBinding binding) {
  std::string key = pad_command(name);
  require_open("command '" + key + "' registered");
  if (!binding.arity.variable()) {
    for (auto n : binding.arity.counts) {
      if (!core::is_standard_count(n)) {
        throw std::invalid_argument("command '" + key + "' declares arity " + std::to_string(n) +
                                    "; fixed arities are 0, 3, 6 or 7");
      }
    }
  }
  if (!commands_.emplace(key, std::move(binding)).second) {
    throw std::invalid_argument("duplicate command '" + key + "'");
  }
}

void Dispatcher::register_sink(const std::string& name, DataSink sink) {
  require_open("sink '" + name + "' registered");
  if (!sinks_.emplace(name, std::move(sink)).second) {
    throw std::invalid_argument("duplicate sink '" + name + "'");
  }
}

void Dispatcher::bind_flag(const std::string& flag, const std::string& branch, std::size_t digit) {
  require_open("flag '" + flag + "' bound");
  if (!flag_bindings_.emplace(flag, std::make_pair(branch, digit)).second) {
    throw std::invalid_argument("duplicate flag '" + flag + "'");
  }
}

void Dispatcher::compile(const def::WorkflowDefinition& def) {
  require_open("compile called");
  for (const auto& [name, b] : commands_) {
    if (b.target == CommandBinding::Target::kDataSink) {
      if (!sinks_.count(b.sink)) {
        throw std::invalid_argument("command '" + name + "' targets unknown sink '" + b.sink + "'");
      }
      continue;
    }
    const def::BranchDef* branch = def.find_branch(b.branch);
    if (branch == nullptr) {
      throw std::invalid_argument("command '" + name + "' targets unknown branch '" + b.branch + "'");
    }
    if (b.target == CommandBinding::Target::kOperation) {
      bool found = false;
      for (const auto& s : branch->states) found = found || s.find(b.operation) != nullptr;
      if (!found) {
        throw std::invalid_argument("command '" + name + "' targets unknown operation '" +
                                    b.branch + "." + b.operation + "'");
      }
    }
  }
  for (const auto& [flag, binding] : flag_bindings_) {
    const def::BranchDef* branch = def.find_branch(binding.first);
    if (branch == nullptr || binding.second >= branch->digit_count()) {
      throw std::invalid_argument("flag '" + flag + "' bound to a missing branch digit");
    }
  }
  machine_ = std::make_unique<core::RuntimeMachine>(core::compile(def, handlers_, options_.compile));
  if (options_.flags_enabled) {
    for (const auto& [flag, binding] : flag_bindings_) {
      flags_[flag] = FlagState{machine_->active_state(binding.first)[binding.second] == '1', 0};
    }
  }
}

const core::RuntimeMachine& Dispatcher::machine() const {
  if (!machine_) throw core::LifecycleError("dispatcher not compiled");
  return *machine_;
}

core::RuntimeMachine& Dispatcher::machine() {
  if (!machine_) throw core::LifecycleError("dispatcher not compiled");
  return *machine_;
}

const std::optional<CommandBinding> Dispatcher::binding(std::string_view name) const {
  if (name.empty() || name.size() > kCommandWidth) return std::nullopt;
  auto it = commands_.find(pad_command(name));
  if (it == commands_.end()) return std::nullopt;
  return it->second;
}

FlagSnapshot Dispatcher::get_flags() const { return options_.flags_enabled ? flags_ : FlagSnapshot{}; }

// Flags are written here and only here, from committed records.
void Dispatcher::commit_flags(std::size_t first_record) {
  const auto& log = machine_->transition_log();
  for (std::size_t i = first_record; i < log.size(); ++i) {
    const auto& r = log[i];
    for (const auto& [k, v] : r.data) latest_data_[k] = v;
    if (!options_.flags_enabled || !r.accepted()) continue;
    for (const auto& [flag, binding] : flag_bindings_) {
      if (binding.first != r.branch) continue;
      flags_[flag] = FlagState{r.to[binding.second] == '1', r.id};
    }
  }
}

void Dispatcher::check_transition(const core::TransitionRecord& r, const std::string& op) const {
  const std::string& now = machine_->active_state(r.branch);
  bool ok;
  if (r.accepted()) {
    auto declared = machine_->declared_target(r.branch, r.from, op);
    ok = declared && *declared == r.to && now == r.to;
  } else {
    ok = r.to == r.from && now == r.from;
  }
  if (!ok) {
    throw std::logic_error("state transition check failed for " + r.branch + "." + op + " (" +
                           r.from + "->" + r.to + ", active " + now + ")");
  }
}

DispatchResult Dispatcher::dispatch(const Command& cmd) {
  if (!machine_) throw core::LifecycleError("dispatch before compile");
  ++telemetry_["dispatched"];
  DispatchResult result;
  result.command = cmd.name;
  result.origin = cmd.origin;

  auto it = cmd.name.empty() || cmd.name.size() > kCommandWidth ? commands_.end()
                                                                 : commands_.find(pad_command(cmd.name));
  if (it == commands_.end()) {
    result.status = DispatchStatus::kUnknownCommand;
    result.detail = "forbidden/unknown command";
    ++telemetry_["unknown"];
    return result;
  }
  const CommandBinding& b = it->second;
  result.command = it->first;
  const std::size_t n = cmd.payload.values.size();
  if (!b.arity.accepts(n)) {
    result.status = DispatchStatus::kArityMismatch;
    result.detail = "expected " + b.arity.describe() + " values, got " + std::to_string(n);
    ++telemetry_["arity_mismatch"];
    return result;
  }

  // Preprocess: unit normalization and route resolution.
  Command normalized = cmd;
  normalized.name = it->first;
  for (auto& v : normalized.payload.values) v *= b.scale;
  if (normalized.payload.route_index < 0) normalized.payload.route_index = b.route_index;

  if (b.target == CommandBinding::Target::kDataSink) {
    sinks_.at(b.sink)(normalized);
    result.status = DispatchStatus::kData;
    ++telemetry_["data"];
    return result;
  }

  const std::size_t first = machine_->transition_log().size();
  core::TransitionRecord r = b.target == CommandBinding::Target::kReinit
                                 ? machine_->reinitialize(b.branch)
                                 : machine_->request_operation(b.branch, b.operation,
                                                               normalized.payload);
  check_transition(r, r.operation);
  commit_flags(first);
  result.status = DispatchStatus::kTransition;
  result.cascade_records = machine_->transition_log().size() - first - 1;
  result.detail = r.detail;
  switch (r.outcome) {
    case core::Outcome::kAccepted: ++telemetry_["accepted"]; break;
    case core::Outcome::kRejectedInvalid: ++telemetry_["rejected_invalid"]; break;
    case core::Outcome::kRejectedStepFailure: ++telemetry_["rejected_step_failure"]; break;
  }
  result.record = std::move(r);
  return result;
}

}  // namespace wfctl::dispatch
