#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "wfctl/core/message.hpp"

namespace wfctl::comm {

inline constexpr std::size_t kHeaderSize = 16;
inline constexpr std::size_t kMaxPacket = 1400;

enum class ProtocolErrorCode {
  kEmptyName,
  kNameTooLong,
  kIllegalCharacter,
  kNonFinite,
  kPacketTooLarge,
  kShortPacket,
  kMalformedNumber,
  kArityMismatch,
};

std::string_view to_string(ProtocolErrorCode c);

class ProtocolError : public std::runtime_error {
 public:
  ProtocolError(ProtocolErrorCode code, const std::string& message);
  ProtocolErrorCode code() const { return code_; }

 private:
  ProtocolErrorCode code_;
};

struct RouteEntry {
  int route_index = -1;
  core::Arity arity;
  std::string destination;
};

// Padded 16-byte header -> route.
class RouteTable {
 public:
  void add(std::string_view name, RouteEntry entry);
  const RouteEntry* find(std::string_view header) const;
  std::size_t size() const { return routes_.size(); }

 private:
  std::map<std::string, RouteEntry, std::less<>> routes_;
};

struct Decoded {
  std::string name;    // padding stripped
  std::string header;  // the 16 raw bytes
  std::vector<double> values;
  int route_index = -1;
  bool known_route = false;  // false when a table was given and missed
};

// Names use [A-Z0-9_], are 1..16 long and do not end in the pad character,
// so that stripping the padding is lossless.
void check_name(std::string_view name);

// Header padded with '_' followed by "%.6f" values joined by ','.
std::string encode(std::string_view name, const std::vector<double>& values);

// Without a table every header decodes with route_index -1.
Decoded decode(std::string_view packet, const RouteTable* routes = nullptr);

// Length-prefixed framing used on the console stream: 4 ASCII decimal
// digits, then the packet.
std::string frame(std::string_view packet);
// Consumes complete frames from the front of `buffer`.
std::vector<std::string> unframe(std::string& buffer);

}  // namespace wfctl::comm
