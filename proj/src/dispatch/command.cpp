#include "wfctl/dispatch/command.hpp"

#include <stdexcept>

namespace wfctl::dispatch {

std::string_view to_string(Origin o) {
  switch (o) {
    case Origin::kDatagram: return "datagram";
    case Origin::kLocal: return "local";
    case Origin::kBridge: return "bridge";
  }
  return "?";
}

std::string pad_command(std::string_view name) {
  if (name.empty()) throw std::invalid_argument("empty command name");
  if (name.size() > kCommandWidth) {
    throw std::invalid_argument("command '" + std::string(name) + "' longer than 16 characters");
  }
  std::string out(name);
  out.resize(kCommandWidth, kPadChar);
  return out;
}

Command Command::make(std::string_view name, std::vector<double> values, Origin origin) {
  return Command{pad_command(name), core::DecodedMessage{std::move(values), -1}, origin};
}

}  // namespace wfctl::dispatch
