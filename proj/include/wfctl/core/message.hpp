#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace wfctl::core {

// Payload of one command after decoding: the flat value list and the index
// of the publisher/handler it is routed to (-1 when unrouted).
struct DecodedMessage {
  std::vector<double> values;
  int route_index = -1;

  bool operator==(const DecodedMessage&) const = default;
};

// Accepted payload sizes for a command. `counts` lists exact sizes; a
// non-zero `multiple_of` makes the command variable-length instead
// (any count that is a multiple of it, zero excluded).
struct Arity {
  std::vector<std::size_t> counts{0};
  std::size_t multiple_of = 0;

  static Arity exactly(std::size_t n) { return Arity{{n}, 0}; }
  static Arity repeated(std::size_t group) { return Arity{{}, group}; }

  bool variable() const { return multiple_of != 0; }
  bool accepts(std::size_t n) const;
  std::string describe() const;
  bool operator==(const Arity&) const = default;
};

// Sizes a fixed-arity command may declare: bare, 3D point, 6D pose,
// 7D joint vector.
bool is_standard_count(std::size_t n);

}  // namespace wfctl::core
