#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "wfctl/def/definition.hpp"

namespace wfctl::def {

struct ExpandOptions {
  std::size_t max_states = 4096;
  // Level-1 branches to include together with their descendants. Empty
  // selects every root.
  std::vector<std::string> roots;
};

class ExpansionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Builds the equivalent single-branch machine by exploring the product of
// branch states reachable from the all-start configuration. Operations are
// named "<branch>.<op>"; child digits that are a function of their parent's
// state over the reachable set are dropped from the flat digit string.
//
// The product semantics are interpreted directly from the definition and are
// deliberately independent of the runtime in wfctl::core, so the two can be
// checked against each other.
WorkflowDefinition expand_flat(const WorkflowDefinition& def, const ExpandOptions& options = {});

}  // namespace wfctl::def
