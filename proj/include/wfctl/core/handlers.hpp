#pragma once

#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>

#include "wfctl/core/message.hpp"

namespace wfctl::core {

using ActiveStates = std::map<std::string, std::string>;

struct StepContext {
  const DecodedMessage& message;
  const ActiveStates& states;  // snapshot taken before the operation started
  std::string_view branch;
  std::string_view operation;
};

struct StepResult {
  bool ok = true;
  std::string detail;
  std::map<std::string, double> data;  // copied into the transition record

  static StepResult success(std::map<std::string, double> data = {}) {
    return StepResult{true, {}, std::move(data)};
  }
  static StepResult failure(std::string why, std::map<std::string, double> data = {}) {
    return StepResult{false, std::move(why), std::move(data)};
  }
};

using StepHandler = std::function<StepResult(const StepContext&)>;

class LifecycleError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Step name -> handler. Filled during initialization; compile() freezes it
// and any later registration throws LifecycleError.
class HandlerRegistry {
 public:
  void add(const std::string& name, StepHandler handler);
  void declare_noop(const std::string& name);
  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }

  bool contains(std::string_view name) const;
  const StepHandler* find(std::string_view name) const;
  std::size_t size() const { return handlers_.size(); }

 private:
  std::map<std::string, StepHandler, std::less<>> handlers_;
  bool frozen_ = false;
};

}  // namespace wfctl::core
