#include "wfctl/core/handlers.hpp"

namespace wfctl::core {

void HandlerRegistry::add(const std::string& name, StepHandler handler) {
  if (frozen_) throw LifecycleError("handler '" + name + "' registered after compile");
  if (!handler) throw std::invalid_argument("handler '" + name + "' is empty");
  if (!handlers_.emplace(name, std::move(handler)).second) {
    throw std::invalid_argument("duplicate handler '" + name + "'");
  }
}

void HandlerRegistry::declare_noop(const std::string& name) {
  add(name, [](const StepContext&) { return StepResult::success(); });
}

bool HandlerRegistry::contains(std::string_view name) const {
  return handlers_.find(name) != handlers_.end();
}

const StepHandler* HandlerRegistry::find(std::string_view name) const {
  auto it = handlers_.find(name);
  return it == handlers_.end() ? nullptr : &it->second;
}

}  // namespace wfctl::core
