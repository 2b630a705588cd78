#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "wfctl/def/definition.hpp"

namespace test_support {

inline std::string source_path(const std::string& rel) {
  return std::string(WFCTL_SOURCE_DIR) + "/" + rel;
}

inline std::string read_text(const std::string& rel) {
  std::ifstream in(source_path(rel));
  if (!in) throw std::runtime_error("cannot open " + rel);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline wfctl::def::WorkflowDefinition load(const std::string& rel) {
  return wfctl::def::parse_definition(read_text(rel));
}

}  // namespace test_support
