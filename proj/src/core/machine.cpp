#include "wfctl/core/machine.hpp"

#include <algorithm>
#include <chrono>
#include <set>

#include "wfctl/def/validate.hpp"

namespace wfctl::core {

namespace {

constexpr std::size_t kNoState = static_cast<std::size_t>(-1);

double wall_seconds() {
  using namespace std::chrono;
  return duration<double>(system_clock::now().time_since_epoch()).count();
}

}  // namespace

struct RuntimeMachine::Impl {
  struct Edge {
    const def::OperationDef* def = nullptr;
    std::size_t target = kNoState;
    std::vector<std::pair<std::string, StepHandler>> steps;
  };

  struct State {
    std::string digits;
    bool active = false;
    std::map<std::string, Edge, std::less<>> table;
    const Edge* rio = nullptr;
  };

  struct Branch {
    std::string name;
    int level = 1;
    int parent = -1;
    std::set<std::string> scope;
    std::map<std::string, std::size_t, std::less<>> children;
    std::set<std::string, std::less<>> alphabet;
    std::vector<State> states;
    std::size_t start = 0;
    std::size_t active = 0;
  };

  def::WorkflowDefinition def;
  std::vector<Branch> branches;
  std::map<std::string, std::size_t, std::less<>> index;
  std::vector<TransitionRecord> log;
  std::uint64_t next_id = 1;
  int budget = 16;
  Clock clock;
  bool busy = false;

  std::size_t branch_index(std::string_view name) const {
    auto it = index.find(name);
    if (it == index.end()) throw UnknownNameError("unknown branch '" + std::string(name) + "'");
    return it->second;
  }

  bool enabled(std::size_t b) const {
    const Branch& br = branches[b];
    if (br.parent < 0) return true;
    const Branch& parent = branches[static_cast<std::size_t>(br.parent)];
    return br.scope.count(parent.states[parent.active].digits) &&
           enabled(static_cast<std::size_t>(br.parent));
  }

  ActiveStates snapshot() const {
    ActiveStates out;
    for (const auto& br : branches) out[br.name] = br.states[br.active].digits;
    return out;
  }

  bool unique_active(const Branch& br) const {
    std::size_t count = 0;
    for (const auto& s : br.states) count += s.active ? 1 : 0;
    return count == 1 && br.states[br.active].active;
  }

  std::size_t append(TransitionRecord r) {
    r.id = next_id++;
    r.timestamp = clock();
    log.push_back(std::move(r));
    return log.size() - 1;
  }

  std::size_t reject(std::size_t b, std::string_view op, Trigger trigger,
                     std::optional<std::uint64_t> cause, std::string why) {
    const Branch& br = branches[b];
    TransitionRecord r;
    r.branch = br.name;
    r.from = r.to = br.states[br.active].digits;
    r.operation = std::string(op);
    r.outcome = Outcome::kRejectedInvalid;
    r.trigger = trigger;
    r.cause = cause;
    r.detail = std::move(why);
    return append(std::move(r));
  }

  // Transition with a failure path: the source is deactivated while the
  // steps run and restored if any of them fails.
  std::size_t run_edge(std::size_t b, const Edge& edge, const DecodedMessage& message,
                       Trigger trigger, std::optional<std::uint64_t> cause, int& signals) {
    Branch& br = branches[b];
    const ActiveStates before = snapshot();
    const std::size_t source = br.active;

    TransitionRecord r;
    r.branch = br.name;
    r.from = br.states[source].digits;
    r.operation = edge.def->name;
    r.trigger = trigger;
    r.cause = cause;

    br.states[source].active = false;
    for (const auto& [step_name, handler] : edge.steps) {
      StepResult result;
      try {
        result = handler(StepContext{message, before, br.name, edge.def->name});
      } catch (const ReentrancyError&) {
        br.states[source].active = true;
        throw;
      } catch (const std::exception& e) {
        result = StepResult::failure(std::string("threw: ") + e.what());
      }
      for (auto& [k, v] : result.data) r.data[k] = v;
      if (!result.ok) {
        br.states[source].active = true;
        r.to = r.from;
        r.outcome = Outcome::kRejectedStepFailure;
        r.detail = "step '" + step_name + "' failed";
        if (!result.detail.empty()) r.detail += ": " + result.detail;
        return append(std::move(r));
      }
    }
    br.active = edge.target;
    br.states[edge.target].active = true;
    if (!unique_active(br)) {
      throw std::logic_error("branch '" + br.name + "' lost its unique active state");
    }
    r.to = br.states[edge.target].digits;
    r.outcome = Outcome::kAccepted;
    const std::size_t at = append(std::move(r));
    const std::uint64_t id = log[at].id;

    // Upward signal first, so the parent reflects the child before any
    // downward re-initiation observes it.
    if (trigger != Trigger::kParentReinit && edge.def->emits_parent_op && br.parent >= 0) {
      if (--signals < 0) throw SignalBudgetExceeded("signal budget exhausted at '" + br.name + "'");
      auto pb = static_cast<std::size_t>(br.parent);
      Branch& parent = branches[pb];
      const std::string& op = *edge.def->emits_parent_op;
      const State& ps = parent.states[parent.active];
      auto it = ps.table.find(op);
      std::size_t got = it == ps.table.end()
                            ? reject(pb, op, Trigger::kChildSignal, id,
                                     "signal from '" + br.name + "' not valid at " + ps.digits)
                            : run_edge(pb, it->second, DecodedMessage{}, Trigger::kChildSignal, id,
                                       signals);
      log[at].cascade.push_back(
          {CascadeSignal::Direction::kToParent, parent.name, op, log[got].id});
    }
    if (edge.def->incoming != def::IncomingClass::kIio) {
      for (const auto& child : edge.def->reinit_children) {
        if (--signals < 0) throw SignalBudgetExceeded("signal budget exhausted at '" + br.name + "'");
        std::size_t cb = branches[b].children.at(child);
        Branch& c = branches[cb];
        const State& cs = c.states[c.active];
        std::string op_name = cs.rio ? cs.rio->def->name : std::string("reinit");
        std::size_t got = cs.rio == nullptr
                              ? reject(cb, op_name, Trigger::kParentReinit, id,
                                       "no re-initiation operation at " + cs.digits)
                              : run_edge(cb, *cs.rio, DecodedMessage{}, Trigger::kParentReinit, id,
                                         signals);
        log[at].cascade.push_back(
            {CascadeSignal::Direction::kToChild, c.name, op_name, log[got].id});
      }
    }
    return at;
  }

  TransitionRecord request(std::size_t b, std::string_view op, const DecodedMessage& message) {
    if (busy) throw ReentrancyError("operation requested from inside a step handler");
    busy = true;
    struct Release {
      bool& flag;
      ~Release() { flag = false; }
    } release{busy};

    const Branch& br = branches[b];
    if (!br.alphabet.count(op)) {
      throw UnknownNameError("branch '" + br.name + "' has no operation '" + std::string(op) + "'");
    }
    std::vector<std::size_t> saved;
    for (const auto& x : branches) saved.push_back(x.active);
    const std::size_t log_size = log.size();
    const std::uint64_t saved_id = next_id;
    try {
      std::size_t at;
      const State& s = br.states[br.active];
      auto it = s.table.find(op);
      if (!enabled(b)) {
        const Branch& p = branches[static_cast<std::size_t>(br.parent)];
        at = reject(b, op, Trigger::kRequest, std::nullopt,
                    "branch inactive while '" + p.name + "' is at " + p.states[p.active].digits);
      } else if (it == s.table.end()) {
        at = reject(b, op, Trigger::kRequest, std::nullopt,
                    "invalid operation at state " + s.digits);
      } else if (it->second.def->incoming == def::IncomingClass::kIio) {
        at = reject(b, op, Trigger::kRequest, std::nullopt,
                    "operation is driven by a child branch signal");
      } else {
        int signals = budget;
        at = run_edge(b, it->second, message, Trigger::kRequest, std::nullopt, signals);
      }
      return log[at];
    } catch (...) {
      for (std::size_t i = 0; i < branches.size(); ++i) {
        for (auto& st : branches[i].states) st.active = false;
        branches[i].active = saved[i];
        branches[i].states[saved[i]].active = true;
      }
      log.resize(log_size);
      next_id = saved_id;
      throw;
    }
  }
};

RuntimeMachine::RuntimeMachine(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}
RuntimeMachine::RuntimeMachine(RuntimeMachine&&) noexcept = default;
RuntimeMachine& RuntimeMachine::operator=(RuntimeMachine&&) noexcept = default;
RuntimeMachine::~RuntimeMachine() = default;

TransitionRecord RuntimeMachine::request_operation(std::string_view branch, std::string_view op,
                                                   const DecodedMessage& message) {
  return impl_->request(impl_->branch_index(branch), op, message);
}

TransitionRecord RuntimeMachine::reinitialize(std::string_view branch) {
  std::size_t b = impl_->branch_index(branch);
  const auto& br = impl_->branches[b];
  const auto& s = br.states[br.active];
  if (s.rio == nullptr) {
    throw std::logic_error("branch '" + br.name + "' has no re-initiation operation at " + s.digits);
  }
  return impl_->request(b, s.rio->def->name, {});
}

ActiveStates RuntimeMachine::active_states() const { return impl_->snapshot(); }

const std::string& RuntimeMachine::active_state(std::string_view branch) const {
  const auto& br = impl_->branches[impl_->branch_index(branch)];
  return br.states[br.active].digits;
}

bool RuntimeMachine::branch_enabled(std::string_view branch) const {
  return impl_->enabled(impl_->branch_index(branch));
}

std::vector<std::string> RuntimeMachine::available_operations(std::string_view branch) const {
  std::size_t b = impl_->branch_index(branch);
  std::vector<std::string> out;
  if (!impl_->enabled(b)) return out;
  const auto& br = impl_->branches[b];
  for (const auto& [name, edge] : br.states[br.active].table) {
    if (edge.def->incoming != def::IncomingClass::kIio) out.push_back(name);
  }
  return out;
}

const std::vector<TransitionRecord>& RuntimeMachine::transition_log() const { return impl_->log; }

void RuntimeMachine::clear_log() { impl_->log.clear(); }

const def::WorkflowDefinition& RuntimeMachine::definition() const { return impl_->def; }

std::vector<std::string> RuntimeMachine::branch_names() const {
  std::vector<std::string> out;
  for (const auto& br : impl_->branches) out.push_back(br.name);
  return out;
}

std::optional<std::string> RuntimeMachine::declared_target(std::string_view branch,
                                                           std::string_view state,
                                                           std::string_view op) const {
  const def::BranchDef* b = impl_->def.find_branch(branch);
  if (b == nullptr) return std::nullopt;
  const def::StateDef* s = b->find_state(state);
  if (s == nullptr) return std::nullopt;
  const def::OperationDef* o = s->find(op);
  if (o == nullptr) return std::nullopt;
  return o->target;
}

int RuntimeMachine::hierarchy_depth() const {
  int depth = 0;
  for (const auto& br : impl_->branches) depth = std::max(depth, br.level);
  return depth;
}

int RuntimeMachine::signal_budget() const { return impl_->budget; }

bool RuntimeMachine::check_unique_state_activated() const {
  return std::all_of(impl_->branches.begin(), impl_->branches.end(),
                     [&](const auto& br) { return impl_->unique_active(br); });
}

RuntimeMachine compile(const def::WorkflowDefinition& definition, HandlerRegistry& handlers,
                       const CompileOptions& options) {
  if (options.signal_budget <= 0) throw CompileError("signal budget must be positive");
  if (!options.skip_validation) {
    auto report = def::validate(definition);
    if (!report.ok()) {
      std::string msg = "definition '" + definition.name + "' is invalid:";
      for (const auto& v : report.violations) msg += "\n  " + def::format_finding(v);
      throw CompileError(msg);
    }
  }

  auto impl = std::make_unique<RuntimeMachine::Impl>();
  impl->def = definition;
  def::classify_incoming(impl->def);
  impl->budget = options.signal_budget;
  impl->clock = options.clock ? options.clock : Clock(wall_seconds);

  for (const auto& b : impl->def.branches) {
    for (const auto& s : b.states) {
      for (const auto& op : s.operations) {
        for (const auto& step : op.steps) {
          if (!handlers.contains(step)) {
            throw CompileError("unresolved step handler '" + step + "' in " + b.name + "." +
                               op.name);
          }
        }
      }
    }
  }

  const auto& def = impl->def;
  for (std::size_t i = 0; i < def.branches.size(); ++i) {
    impl->index[def.branches[i].name] = i;
  }
  for (const auto& b : def.branches) {
    RuntimeMachine::Impl::Branch br;
    br.name = b.name;
    br.level = b.level;
    for (const auto& s : b.states) {
      RuntimeMachine::Impl::State st;
      st.digits = s.digits;
      br.states.push_back(std::move(st));
    }
    auto state_index = [&](const std::string& digits) {
      for (std::size_t i = 0; i < b.states.size(); ++i) {
        if (b.states[i].digits == digits) return i;
      }
      throw CompileError("branch '" + b.name + "' has no state " + digits);
    };
    for (std::size_t i = 0; i < b.states.size(); ++i) {
      for (const auto& op : b.states[i].operations) {
        RuntimeMachine::Impl::Edge edge;
        edge.def = &op;
        edge.target = state_index(op.target);
        for (const auto& step : op.steps) edge.steps.emplace_back(step, *handlers.find(step));
        br.alphabet.insert(op.name);
        br.states[i].table.emplace(op.name, std::move(edge));
      }
    }
    for (auto& st : br.states) {
      for (const auto& [name, edge] : st.table) {
        if (edge.def->kind == def::OperationKind::kRio && st.rio == nullptr) st.rio = &edge;
      }
    }
    br.start = state_index(b.start_state);
    br.active = br.start;
    br.states[br.start].active = true;
    if (b.parent) {
      auto it = impl->index.find(b.parent->branch);
      if (it == impl->index.end()) throw CompileError("missing parent of '" + b.name + "'");
      br.parent = static_cast<int>(it->second);
      auto scope = def::scope_states(def, b);
      br.scope = {scope.begin(), scope.end()};
    }
    impl->branches.push_back(std::move(br));
  }
  for (std::size_t i = 0; i < impl->branches.size(); ++i) {
    int p = impl->branches[i].parent;
    if (p >= 0) impl->branches[static_cast<std::size_t>(p)].children[impl->branches[i].name] = i;
  }
  handlers.freeze();
  return RuntimeMachine(std::move(impl));
}

HandlerRegistry noop_handlers(const def::WorkflowDefinition& def) {
  HandlerRegistry reg;
  for (const auto& step : def.step_names()) reg.declare_noop(step);
  return reg;
}

}  // namespace wfctl::core
