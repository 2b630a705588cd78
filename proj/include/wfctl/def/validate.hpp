#pragma once

#include <string>
#include <vector>

#include "wfctl/def/definition.hpp"

namespace wfctl::def {

// Rule ids:
//   R1  a state at level > 1 without a re-initiation operation
//   R2  a state-changing edge in a child branch that emits no parent signal
//   R3  a DIO into a child's anchor state that does not reinit the child, or
//       an IIO wired to reinit a child
//   S1  start state not declared
//   S2  digit-length mismatch inside a branch
//   S3  edge target not declared
//   S4  operation kind inconsistent with its endpoints
//   S5  duplicate branch name
//   S6  broken hierarchy link (missing parent, wrong level, bad digit index)
//   S7  dangling signal (emits/reinit-child names nothing valid)
//   S8  state count exceeds 2^digits
//   S9  child branch has no anchor state in its parent
//   W1  unreachable state (warning only)
struct Finding {
  std::string rule;
  std::string branch;
  std::string location;  // state digits or "op@digits"
  std::string message;
};

struct ValidationReport {
  std::vector<Finding> violations;
  std::vector<Finding> warnings;

  bool ok() const { return violations.empty(); }
  std::vector<std::string> rule_ids() const;  // sorted, unique
};

ValidationReport validate(const WorkflowDefinition& def);

std::string format_finding(const Finding& f);

}  // namespace wfctl::def
