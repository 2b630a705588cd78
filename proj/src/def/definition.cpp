#include "wfctl/def/definition.hpp"

#include <algorithm>
#include <cctype>
#include <set>

namespace wfctl::def {

std::string_view to_string(OperationKind kind) {
  switch (kind) {
    case OperationKind::kSco: return "SCO";
    case OperationKind::kSmo: return "SMO";
    case OperationKind::kRio: return "RIO";
  }
  return "?";
}

std::optional<OperationKind> parse_kind(std::string_view text) {
  if (text == "SCO") return OperationKind::kSco;
  if (text == "SMO") return OperationKind::kSmo;
  if (text == "RIO") return OperationKind::kRio;
  return std::nullopt;
}

std::string_view to_string(IncomingClass c) {
  switch (c) {
    case IncomingClass::kNone: return "none";
    case IncomingClass::kDio: return "DIO";
    case IncomingClass::kIio: return "IIO";
  }
  return "?";
}

const OperationDef* StateDef::find(std::string_view op_name) const {
  for (const auto& op : operations) {
    if (op.name == op_name) return &op;
  }
  return nullptr;
}

const StateDef* BranchDef::find_state(std::string_view digits) const {
  for (const auto& s : states) {
    if (s.digits == digits) return &s;
  }
  return nullptr;
}

StateDef* BranchDef::find_state(std::string_view digits) {
  for (auto& s : states) {
    if (s.digits == digits) return &s;
  }
  return nullptr;
}

std::size_t BranchDef::digit_count() const { return start_state.size(); }

const BranchDef* WorkflowDefinition::find_branch(std::string_view branch) const {
  for (const auto& b : branches) {
    if (b.name == branch) return &b;
  }
  return nullptr;
}

BranchDef* WorkflowDefinition::find_branch(std::string_view branch) {
  for (auto& b : branches) {
    if (b.name == branch) return &b;
  }
  return nullptr;
}

std::vector<const BranchDef*> WorkflowDefinition::children_of(
    std::string_view branch) const {
  std::vector<const BranchDef*> out;
  for (const auto& b : branches) {
    if (b.parent && b.parent->branch == branch) out.push_back(&b);
  }
  return out;
}

std::vector<std::string> WorkflowDefinition::step_names() const {
  std::set<std::string> names;
  for (const auto& b : branches) {
    for (const auto& s : b.states) {
      for (const auto& op : s.operations) names.insert(op.steps.begin(), op.steps.end());
    }
  }
  return {names.begin(), names.end()};
}

ParseError::ParseError(int line, int column, const std::string& message)
    : std::runtime_error("line " + std::to_string(line) + ":" +
                         std::to_string(column) + ": " + message),
      line_(line),
      column_(column),
      message_(message) {}

bool is_identifier(std::string_view text) {
  if (text.empty()) return false;
  auto head = static_cast<unsigned char>(text.front());
  if (!(std::isalpha(head) || head == '_')) return false;
  return std::all_of(text.begin(), text.end(), [](char ch) {
    auto c = static_cast<unsigned char>(ch);
    return std::isalnum(c) || c == '_' || c == '-' || c == '.';
  });
}

bool is_digit_string(std::string_view text) {
  return !text.empty() && std::all_of(text.begin(), text.end(), [](char c) {
    return c == '0' || c == '1';
  });
}

namespace {

bool mirrored_digit_is(const std::string& digits, std::size_t index, char value) {
  return index < digits.size() && digits[index] == value;
}

}  // namespace

std::vector<std::string> anchor_states(const WorkflowDefinition& def,
                                       const BranchDef& child) {
  std::vector<std::string> out;
  if (!child.parent) return out;
  const BranchDef* parent = def.find_branch(child.parent->branch);
  if (parent == nullptr) return out;
  const std::size_t idx = child.parent->digit_index;
  for (const auto& state : parent->states) {
    if (!mirrored_digit_is(state.digits, idx, '0')) continue;
    bool flips = std::any_of(
        state.operations.begin(), state.operations.end(),
        [&](const OperationDef& op) { return mirrored_digit_is(op.target, idx, '1'); });
    if (flips) out.push_back(state.digits);
  }
  return out;
}

std::vector<std::string> scope_states(const WorkflowDefinition& def,
                                      const BranchDef& child) {
  std::vector<std::string> out;
  if (!child.parent) return out;
  const BranchDef* parent = def.find_branch(child.parent->branch);
  if (parent == nullptr) return out;
  auto anchors = anchor_states(def, child);
  for (const auto& state : parent->states) {
    bool anchored = std::find(anchors.begin(), anchors.end(), state.digits) != anchors.end();
    if (anchored || mirrored_digit_is(state.digits, child.parent->digit_index, '1')) {
      out.push_back(state.digits);
    }
  }
  return out;
}

void classify_incoming(WorkflowDefinition& def) {
  for (auto& branch : def.branches) {
    std::set<std::string> signalled;
    for (const BranchDef* child : def.children_of(branch.name)) {
      for (const auto& state : child->states) {
        for (const auto& op : state.operations) {
          if (op.emits_parent_op) signalled.insert(*op.emits_parent_op);
        }
      }
    }
    for (auto& state : branch.states) {
      for (auto& op : state.operations) {
        if (!op.changes_state()) {
          op.incoming = IncomingClass::kNone;
        } else {
          op.incoming = signalled.count(op.name) ? IncomingClass::kIio : IncomingClass::kDio;
        }
      }
    }
  }
}

}  // namespace wfctl::def
