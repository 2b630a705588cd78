#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "wfctl/core/handlers.hpp"
#include "wfctl/core/message.hpp"
#include "wfctl/core/record.hpp"
#include "wfctl/def/definition.hpp"

namespace wfctl::core {

class CompileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnknownNameError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class SignalBudgetExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Thrown when a step handler calls back into the machine.
class ReentrancyError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

using Clock = std::function<double()>;

struct CompileOptions {
  int signal_budget = 16;
  // Skip validate(); only for tests that need to run broken definitions.
  bool skip_validation = false;
  Clock clock;  // seconds; defaults to wall time
};

// Executable hFSM. Every branch keeps exactly one active state between
// calls; operations that the active state does not list are rejected
// without running any step.
class RuntimeMachine {
 public:
  RuntimeMachine(RuntimeMachine&&) noexcept;
  RuntimeMachine& operator=(RuntimeMachine&&) noexcept;
  ~RuntimeMachine();

  // Returns the record of the requested operation. Records produced by the
  // cascade are appended to the log after it and listed in its `cascade`.
  TransitionRecord request_operation(std::string_view branch, std::string_view op,
                                     const DecodedMessage& message = {});
  TransitionRecord reinitialize(std::string_view branch);

  ActiveStates active_states() const;
  const std::string& active_state(std::string_view branch) const;
  bool branch_enabled(std::string_view branch) const;
  // Operations a request would currently be accepted into (before steps).
  std::vector<std::string> available_operations(std::string_view branch) const;

  const std::vector<TransitionRecord>& transition_log() const;
  void clear_log();

  const def::WorkflowDefinition& definition() const;
  std::vector<std::string> branch_names() const;
  // Declared target of `op` leaving `state`, if the state lists it.
  std::optional<std::string> declared_target(std::string_view branch, std::string_view state,
                                             std::string_view op) const;
  int hierarchy_depth() const;
  int signal_budget() const;

  // Diagnostic: exactly one state flagged active in each branch.
  bool check_unique_state_activated() const;

 private:
  struct Impl;
  explicit RuntimeMachine(std::unique_ptr<Impl> impl);
  friend RuntimeMachine compile(const def::WorkflowDefinition&, HandlerRegistry&,
                                const CompileOptions&);

  std::unique_ptr<Impl> impl_;
};

// Resolves every step name against `handlers` and freezes the registry.
RuntimeMachine compile(const def::WorkflowDefinition& def, HandlerRegistry& handlers,
                       const CompileOptions& options = {});

// Registry in which every step named by `def` is a no-op.
HandlerRegistry noop_handlers(const def::WorkflowDefinition& def);

}  // namespace wfctl::core
