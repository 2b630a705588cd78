#include "wfctl/def/validate.hpp"

#include <algorithm>
#include <deque>
#include <set>

namespace wfctl::def {

std::vector<std::string> ValidationReport::rule_ids() const {
  std::set<std::string> ids;
  for (const auto& v : violations) ids.insert(v.rule);
  return {ids.begin(), ids.end()};
}

std::string format_finding(const Finding& f) {
  std::string out = f.rule + " " + f.branch;
  if (!f.location.empty()) out += " [" + f.location + "]";
  out += ": " + f.message;
  return out;
}

namespace {

std::string edge_location(const OperationDef& op) { return op.name + "@" + op.source; }

class Validator {
 public:
  explicit Validator(const WorkflowDefinition& def) : def_(def) {
    classify_incoming(def_);
  }

  ValidationReport run() {
    check_branch_names();
    for (const auto& branch : def_.branches) {
      check_structure(branch);
      check_hierarchy(branch);
      check_reachability(branch);
    }
    for (const auto& branch : def_.branches) {
      check_rule1(branch);
      check_rule2(branch);
      check_rule3(branch);
    }
    return std::move(report_);
  }

 private:
  void violation(std::string rule, const BranchDef& b, std::string loc, std::string msg) {
    report_.violations.push_back({std::move(rule), b.name, std::move(loc), std::move(msg)});
  }

  void check_branch_names() {
    std::set<std::string> seen;
    for (const auto& b : def_.branches) {
      if (!seen.insert(b.name).second) violation("S5", b, "", "duplicate branch name");
    }
  }

  void check_structure(const BranchDef& b) {
    if (b.find_state(b.start_state) == nullptr) {
      violation("S1", b, b.start_state, "start state is not a declared state");
    }
    const std::size_t width = b.start_state.size();
    for (const auto& s : b.states) {
      if (s.digits.size() != width) {
        violation("S2", b, s.digits,
                  "expected " + std::to_string(width) + " digits, got " +
                      std::to_string(s.digits.size()));
      }
    }
    if (width < 63 && b.states.size() > (std::size_t{1} << width)) {
      violation("S8", b, "", "more states than 2^" + std::to_string(width));
    }
    for (const auto& s : b.states) {
      for (const auto& op : s.operations) {
        if (b.find_state(op.target) == nullptr) {
          violation("S3", b, edge_location(op), "target state '" + op.target + "' is not declared");
        }
        switch (op.kind) {
          case OperationKind::kSmo:
            if (op.target != op.source) {
              violation("S4", b, edge_location(op), "SMO must target its own source state");
            }
            break;
          case OperationKind::kSco:
            if (op.target == op.source) {
              violation("S4", b, edge_location(op), "SCO must target a different state");
            }
            break;
          case OperationKind::kRio:
            if (op.target != b.start_state) {
              violation("S4", b, edge_location(op), "RIO must target the start state");
            }
            break;
        }
      }
    }
  }

  void check_hierarchy(const BranchDef& b) {
    if (!b.parent) {
      if (b.level != 1) violation("S6", b, "", "branch without parent must be level 1");
    } else {
      const BranchDef* parent = def_.find_branch(b.parent->branch);
      if (parent == nullptr) {
        violation("S6", b, "", "parent branch '" + b.parent->branch + "' does not exist");
      } else {
        if (parent->level != b.level - 1) {
          violation("S6", b, "",
                    "level " + std::to_string(b.level) + " under parent of level " +
                        std::to_string(parent->level));
        }
        if (b.parent->digit_index >= parent->digit_count()) {
          violation("S6", b, "", "digit index out of range for parent '" + parent->name + "'");
        } else if (anchor_states(def_, b).empty()) {
          violation("S9", b, "", "no state of '" + parent->name + "' anchors this branch");
        }
      }
    }
    const BranchDef* parent = b.parent ? def_.find_branch(b.parent->branch) : nullptr;
    for (const auto& s : b.states) {
      for (const auto& op : s.operations) {
        if (op.emits_parent_op) {
          bool found = false;
          if (parent != nullptr) {
            for (const auto& ps : parent->states) found = found || ps.find(*op.emits_parent_op);
          }
          if (!found) {
            violation("S7", b, edge_location(op),
                      "emitted operation '" + *op.emits_parent_op + "' does not exist on parent");
          }
        }
        for (const auto& child : op.reinit_children) {
          const BranchDef* c = def_.find_branch(child);
          if (c == nullptr || !c->parent || c->parent->branch != b.name) {
            violation("S7", b, edge_location(op), "'" + child + "' is not a child branch");
          }
        }
      }
    }
  }

  void check_reachability(const BranchDef& b) {
    if (b.find_state(b.start_state) == nullptr) return;
    std::set<std::string> seen{b.start_state};
    std::deque<std::string> queue{b.start_state};
    while (!queue.empty()) {
      const StateDef* s = b.find_state(queue.front());
      queue.pop_front();
      if (s == nullptr) continue;
      for (const auto& op : s->operations) {
        if (seen.insert(op.target).second) queue.push_back(op.target);
      }
    }
    for (const auto& s : b.states) {
      if (!seen.count(s.digits)) {
        report_.warnings.push_back({"W1", b.name, s.digits, "state unreachable from start"});
      }
    }
  }

  void check_rule1(const BranchDef& b) {
    if (b.level <= 1) return;
    for (const auto& s : b.states) {
      bool has_rio = std::any_of(s.operations.begin(), s.operations.end(),
                                 [](const OperationDef& op) { return op.kind == OperationKind::kRio; });
      if (!has_rio) violation("R1", b, s.digits, "state has no re-initiation operation");
    }
  }

  void check_rule2(const BranchDef& b) {
    if (!b.parent) return;
    for (const auto& s : b.states) {
      for (const auto& op : s.operations) {
        if (op.changes_state() && !op.emits_parent_op) {
          violation("R2", b, edge_location(op),
                    "state-changing operation emits no signal to '" + b.parent->branch + "'");
        }
      }
    }
  }

  void check_rule3(const BranchDef& b) {
    std::vector<std::pair<const BranchDef*, std::vector<std::string>>> anchored;
    for (const BranchDef* child : def_.children_of(b.name)) {
      anchored.emplace_back(child, anchor_states(def_, *child));
    }
    for (const auto& s : b.states) {
      for (const auto& op : s.operations) {
        auto wired = [&](const std::string& child) {
          return std::find(op.reinit_children.begin(), op.reinit_children.end(), child) !=
                 op.reinit_children.end();
        };
        if (op.incoming == IncomingClass::kIio) {
          for (const auto& child : op.reinit_children) {
            violation("R3", b, edge_location(op),
                      "IIO must not re-initiate child '" + child + "'");
          }
          continue;
        }
        if (op.incoming != IncomingClass::kDio) continue;
        for (const auto& [child, anchors] : anchored) {
          bool into_anchor = std::find(anchors.begin(), anchors.end(), op.target) != anchors.end();
          if (into_anchor && !wired(child->name)) {
            violation("R3", b, edge_location(op),
                      "DIO into anchor state " + op.target + " does not re-initiate '" +
                          child->name + "'");
          }
        }
      }
    }
  }

  WorkflowDefinition def_;
  ValidationReport report_;
};

}  // namespace

ValidationReport validate(const WorkflowDefinition& def) { return Validator(def).run(); }

}  // namespace wfctl::def
