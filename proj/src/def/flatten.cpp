#include "wfctl/def/flatten.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <optional>
#include <set>

namespace wfctl::def {

namespace {

using Product = std::vector<std::string>;

struct BranchView {
  const BranchDef* def = nullptr;
  int parent = -1;
  std::set<std::string> scope;
  std::vector<int> children;
};

class ProductMachine {
 public:
  ProductMachine(WorkflowDefinition def, const std::vector<std::string>& roots)
      : def_(std::move(def)) {
    classify_incoming(def_);
    std::set<std::string> included;
    for (const auto& b : def_.branches) {
      bool is_root = !b.parent;
      bool wanted = roots.empty() || std::find(roots.begin(), roots.end(), b.name) != roots.end();
      if (is_root && wanted) included.insert(b.name);
    }
    if (!roots.empty() && included.size() != roots.size()) {
      throw ExpansionError("unknown or non-root branch in expansion roots");
    }
    bool grew = true;
    while (grew) {
      grew = false;
      for (const auto& b : def_.branches) {
        if (b.parent && included.count(b.parent->branch) && included.insert(b.name).second) {
          grew = true;
        }
      }
    }
    for (const auto& b : def_.branches) {
      if (included.count(b.name)) views_.push_back(BranchView{&b, -1, {}, {}});
    }
    for (std::size_t i = 0; i < views_.size(); ++i) {
      const BranchDef& b = *views_[i].def;
      if (!b.parent) continue;
      views_[i].parent = index_of(b.parent->branch);
      views_[views_[i].parent].children.push_back(static_cast<int>(i));
      auto scope = scope_states(def_, b);
      views_[i].scope = {scope.begin(), scope.end()};
    }
  }

  std::size_t size() const { return views_.size(); }
  const BranchDef& branch(std::size_t i) const { return *views_[i].def; }
  int parent(std::size_t i) const { return views_[i].parent; }

  Product start() const {
    Product p;
    for (const auto& v : views_) p.push_back(v.def->start_state);
    return p;
  }

  // Result of an externally requested operation, or nullopt when rejected.
  std::optional<Product> apply(const Product& from, std::size_t b, const std::string& op) const {
    if (!enabled(from, b)) return std::nullopt;
    const OperationDef* edge = find_edge(b, from[b], op);
    if (edge == nullptr || edge->incoming == IncomingClass::kIio) return std::nullopt;
    Product p = from;
    int budget = 64;
    fire(p, b, *edge, /*from_parent=*/false, budget);
    return p;
  }

  std::vector<std::string> operation_names(std::size_t b) const {
    std::set<std::string> names;
    for (const auto& s : views_[b].def->states) {
      for (const auto& op : s.operations) names.insert(op.name);
    }
    return {names.begin(), names.end()};
  }

  const OperationDef* find_edge(std::size_t b, const std::string& state, const std::string& op) const {
    const StateDef* s = views_[b].def->find_state(state);
    return s == nullptr ? nullptr : s->find(op);
  }

 private:
  int index_of(const std::string& name) const {
    for (std::size_t i = 0; i < views_.size(); ++i) {
      if (views_[i].def->name == name) return static_cast<int>(i);
    }
    throw ExpansionError("branch '" + name + "' not included in expansion");
  }

  bool enabled(const Product& p, std::size_t b) const {
    int parent = views_[b].parent;
    if (parent < 0) return true;
    return views_[b].scope.count(p[parent]) && enabled(p, static_cast<std::size_t>(parent));
  }

  // Commits an accepted edge, then the parent signal (unless this edge was
  // itself driven by the parent), then child re-initiations (unless IIO).
  void fire(Product& p, std::size_t b, const OperationDef& edge, bool from_parent, int& budget) const {
    p[b] = edge.target;
    const BranchView& view = views_[b];
    if (!from_parent && edge.emits_parent_op && view.parent >= 0) {
      if (--budget < 0) throw ExpansionError("cascade does not terminate");
      auto pb = static_cast<std::size_t>(view.parent);
      const OperationDef* up = find_edge(pb, p[pb], *edge.emits_parent_op);
      if (up != nullptr) fire(p, pb, *up, false, budget);
    }
    if (edge.incoming == IncomingClass::kIio) return;
    for (const auto& child_name : edge.reinit_children) {
      int c = -1;
      for (int idx : view.children) {
        if (views_[idx].def->name == child_name) c = idx;
      }
      if (c < 0) continue;
      if (--budget < 0) throw ExpansionError("cascade does not terminate");
      auto cb = static_cast<std::size_t>(c);
      const StateDef* s = views_[cb].def->find_state(p[cb]);
      const OperationDef* rio = nullptr;
      if (s != nullptr) {
        for (const auto& op : s->operations) {
          if (op.kind == OperationKind::kRio) {
            rio = &op;
            break;
          }
        }
      }
      if (rio != nullptr) fire(p, cb, *rio, true, budget);
    }
  }

  WorkflowDefinition def_;
  std::vector<BranchView> views_;
};

struct FlatEdge {
  std::size_t from;
  std::string name;
  std::size_t to;
  const OperationDef* edge;
};

}  // namespace

WorkflowDefinition expand_flat(const WorkflowDefinition& def, const ExpandOptions& options) {
  if (def.branches.size() == 1 && !def.branches.front().parent && options.roots.empty()) {
    return def;
  }
  ProductMachine machine(def, options.roots);

  std::vector<Product> states;
  std::map<Product, std::size_t> index;
  std::vector<FlatEdge> edges;
  auto intern = [&](const Product& p) {
    auto [it, inserted] = index.emplace(p, states.size());
    if (inserted) {
      states.push_back(p);
      if (states.size() > options.max_states) {
        throw ExpansionError("flat expansion exceeds " + std::to_string(options.max_states) +
                             " states");
      }
    }
    return it->second;
  };

  std::deque<std::size_t> queue{intern(machine.start())};
  std::set<std::size_t> visited{queue.front()};
  while (!queue.empty()) {
    std::size_t cur = queue.front();
    queue.pop_front();
    for (std::size_t b = 0; b < machine.size(); ++b) {
      for (const auto& op : machine.operation_names(b)) {
        auto next = machine.apply(states[cur], b, op);
        if (!next) continue;
        std::size_t to = intern(*next);
        edges.push_back({cur, machine.branch(b).name + "." + op, to,
                         machine.find_edge(b, states[cur][b], op)});
        if (visited.insert(to).second) queue.push_back(to);
      }
    }
  }

  // Drop child digits that the parent state determines.
  std::vector<bool> keep(machine.size(), true);
  for (std::size_t b = 0; b < machine.size(); ++b) {
    int parent = machine.parent(b);
    if (parent < 0) continue;
    std::map<std::string, std::string> seen;
    bool determined = true;
    for (const auto& p : states) {
      auto [it, inserted] = seen.emplace(p[parent], p[b]);
      if (!inserted && it->second != p[b]) {
        determined = false;
        break;
      }
    }
    keep[b] = !determined;
  }
  auto digits_of = [&](const Product& p) {
    std::string out;
    for (std::size_t b = 0; b < p.size(); ++b) {
      if (keep[b]) out += p[b];
    }
    return out;
  };

  BranchDef flat;
  flat.name = def.name;
  flat.level = 1;
  flat.start_state = digits_of(states.front());
  std::vector<std::size_t> order(states.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return digits_of(states[a]) < digits_of(states[b]);
  });
  std::map<std::size_t, std::size_t> slot;
  for (std::size_t i : order) {
    slot[i] = flat.states.size();
    flat.states.push_back(StateDef{digits_of(states[i]), {}});
  }
  for (std::size_t i = 1; i < flat.states.size(); ++i) {
    if (flat.states[i].digits == flat.states[i - 1].digits) {
      throw ExpansionError("flat digit strings collide for state " + flat.states[i].digits);
    }
  }
  for (const auto& e : edges) {
    OperationDef op;
    op.name = e.name;
    op.source = digits_of(states[e.from]);
    op.target = digits_of(states[e.to]);
    op.steps = e.edge->steps;
    if (op.source == op.target) {
      op.kind = OperationKind::kSmo;
    } else if (e.edge->kind == OperationKind::kRio && op.target == flat.start_state) {
      op.kind = OperationKind::kRio;
    } else {
      op.kind = OperationKind::kSco;
    }
    flat.states[slot[e.from]].operations.push_back(std::move(op));
  }

  WorkflowDefinition out;
  out.name = def.name + "-flat";
  out.version = def.version;
  out.branches.push_back(std::move(flat));
  return out;
}

}  // namespace wfctl::def
