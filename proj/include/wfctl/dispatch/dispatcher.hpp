#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "wfctl/core/handlers.hpp"
#include "wfctl/core/machine.hpp"
#include "wfctl/dispatch/command.hpp"

namespace wfctl::dispatch {

using DataSink = std::function<void(const Command&)>;

struct CommandBinding {
  enum class Target { kOperation, kReinit, kDataSink };

  Target target = Target::kOperation;
  std::string branch;     // kOperation, kReinit
  std::string operation;  // kOperation
  std::string sink;       // kDataSink
  core::Arity arity;
  int route_index = -1;
  // Multiplies every payload value (unit normalization to mm / degrees).
  double scale = 1.0;

  static CommandBinding op(std::string branch, std::string operation,
                           core::Arity arity = {}, int route = -1);
  static CommandBinding reinit(std::string branch, int route = -1);
  static CommandBinding data(std::string sink, core::Arity arity, int route = -1);
};

struct FlagState {
  bool value = false;
  std::uint64_t last_transition = 0;  // 0 = never written

  bool operator==(const FlagState&) const = default;
};

using FlagSnapshot = std::map<std::string, FlagState>;

enum class DispatchStatus { kTransition, kData, kUnknownCommand, kArityMismatch };

std::string_view to_string(DispatchStatus s);

struct DispatchResult {
  DispatchStatus status = DispatchStatus::kUnknownCommand;
  std::string command;
  Origin origin = Origin::kLocal;
  std::optional<core::TransitionRecord> record;
  std::size_t cascade_records = 0;
  std::string detail;

  bool accepted() const { return record && record->accepted(); }
  // Compact verdict for comparisons: status plus outcome and edge.
  std::string verdict() const;
};

struct DispatcherOptions {
  // When false the flag registry is absent: nothing is recorded and
  // get_flags() is empty. Verdicts must not change.
  bool flags_enabled = true;
  core::CompileOptions compile;
};

// Routes 16-character commands to operations of the active states,
// re-initiations, or data sinks. Registration happens before compile();
// afterwards the configuration is frozen.
class Dispatcher {
 public:
  explicit Dispatcher(DispatcherOptions options = {});
  ~Dispatcher();
  Dispatcher(const Dispatcher&) = delete;
  Dispatcher& operator=(const Dispatcher&) = delete;

  void register_handler(const std::string& name, core::StepHandler handler);
  void declare_noop(const std::string& name);
  void register_command(std::string_view name, CommandBinding binding);
  void register_sink(const std::string& name, DataSink sink);
  // Flag mirrors digit `digit` of `branch`'s committed state.
  void bind_flag(const std::string& flag, const std::string& branch, std::size_t digit);

  void compile(const def::WorkflowDefinition& def);
  bool compiled() const { return machine_ != nullptr; }

  DispatchResult dispatch(const Command& cmd);

  FlagSnapshot get_flags() const;
  bool flags_enabled() const { return options_.flags_enabled; }
  const std::map<std::string, CommandBinding>& commands() const { return commands_; }
  const std::optional<CommandBinding> binding(std::string_view name) const;
  std::map<std::string, std::uint64_t> telemetry() const { return telemetry_; }
  // Most recent value of each data key reported by a step handler.
  const std::map<std::string, double>& latest_data() const { return latest_data_; }

  const core::RuntimeMachine& machine() const;
  core::RuntimeMachine& machine();

 private:
  void require_open(const std::string& what) const;
  void commit_flags(std::size_t first_record);
  void check_transition(const core::TransitionRecord& r, const std::string& op) const;

  DispatcherOptions options_;
  core::HandlerRegistry handlers_;
  std::map<std::string, CommandBinding> commands_;
  std::map<std::string, DataSink> sinks_;
  std::map<std::string, std::pair<std::string, std::size_t>> flag_bindings_;
  FlagSnapshot flags_;
  std::map<std::string, double> latest_data_;
  std::map<std::string, std::uint64_t> telemetry_;
  std::unique_ptr<core::RuntimeMachine> machine_;
};

}  // namespace wfctl::dispatch
