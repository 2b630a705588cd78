#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "wfctl/core/message.hpp"

namespace wfctl::dispatch {

inline constexpr std::size_t kCommandWidth = 16;
inline constexpr char kPadChar = '_';

enum class Origin { kDatagram, kLocal, kBridge };

std::string_view to_string(Origin o);

// Right-pads to the 16-character wire width. Throws std::invalid_argument
// for names that are empty or longer than 16.
std::string pad_command(std::string_view name);

struct Command {
  std::string name;  // always padded
  core::DecodedMessage payload;
  Origin origin = Origin::kLocal;

  static Command make(std::string_view name, std::vector<double> values = {},
                      Origin origin = Origin::kLocal);
};

}  // namespace wfctl::dispatch
