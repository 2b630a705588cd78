#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace wfctl::def {

enum class OperationKind { kSco, kSmo, kRio };

// Classification of an edge from the perspective of its target state.
// kNone marks self-loops, which are not incoming operations at all.
enum class IncomingClass { kNone, kDio, kIio };

std::string_view to_string(OperationKind kind);
std::optional<OperationKind> parse_kind(std::string_view text);
std::string_view to_string(IncomingClass c);

// One edge of a branch. Edges sharing a name but leaving different states
// are the same logical operation implemented per state.
struct OperationDef {
  std::string name;
  OperationKind kind = OperationKind::kSco;
  std::string source;
  std::string target;
  std::vector<std::string> steps;
  std::optional<std::string> emits_parent_op;
  std::vector<std::string> reinit_children;
  // Derived by classify_incoming(); never read from text.
  IncomingClass incoming = IncomingClass::kNone;

  bool changes_state() const { return source != target; }
  bool operator==(const OperationDef& other) const = default;
};

struct StateDef {
  std::string digits;
  std::vector<OperationDef> operations;

  const OperationDef* find(std::string_view op_name) const;
  bool operator==(const StateDef& other) const = default;
};

struct ParentLink {
  std::string branch;
  std::size_t digit_index = 0;

  bool operator==(const ParentLink& other) const = default;
};

struct BranchDef {
  std::string name;
  int level = 1;
  std::string start_state;
  std::optional<ParentLink> parent;
  std::vector<StateDef> states;

  const StateDef* find_state(std::string_view digits) const;
  StateDef* find_state(std::string_view digits);
  std::size_t digit_count() const;
  bool operator==(const BranchDef& other) const = default;
};

struct WorkflowDefinition {
  std::string name;
  std::string version;
  std::vector<BranchDef> branches;

  const BranchDef* find_branch(std::string_view name) const;
  BranchDef* find_branch(std::string_view name);
  std::vector<const BranchDef*> children_of(std::string_view branch) const;
  // Every step name referenced by an operation, sorted, without duplicates.
  std::vector<std::string> step_names() const;
  bool operator==(const WorkflowDefinition& other) const = default;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(int line, int column, const std::string& message);

  int line() const { return line_; }
  int column() const { return column_; }
  const std::string& message() const { return message_; }

 private:
  int line_;
  int column_;
  std::string message_;
};

// Parses the line-oriented `.hfsm` format (see docs/hfsm-format.md).
// Only grammar, identifier uniqueness and digit syntax are checked here.
WorkflowDefinition parse_definition(std::string_view source_text);

// Canonical text form; parse_definition(serialize(d)) == d up to derived tags.
std::string serialize(const WorkflowDefinition& def);

bool is_identifier(std::string_view text);
bool is_digit_string(std::string_view text);

// Parent states from which the child's completion flips the mirrored digit
// 0 -> 1. The child sits at its start state whenever the parent is here.
std::vector<std::string> anchor_states(const WorkflowDefinition& def,
                                       const BranchDef& child);

// Parent states in which the child branch accepts operations: the anchors
// plus every state whose mirrored digit is already 1.
std::vector<std::string> scope_states(const WorkflowDefinition& def,
                                      const BranchDef& child);

// Tags every edge DIO/IIO: an edge is IIO iff some child branch emits its
// operation name. Self-loops stay kNone.
void classify_incoming(WorkflowDefinition& def);

}  // namespace wfctl::def
