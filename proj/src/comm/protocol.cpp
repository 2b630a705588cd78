#include "wfctl/comm/protocol.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>

namespace wfctl::comm {

std::string_view to_string(ProtocolErrorCode c) {
  switch (c) {
    case ProtocolErrorCode::kEmptyName: return "empty-name";
    case ProtocolErrorCode::kNameTooLong: return "name-too-long";
    case ProtocolErrorCode::kIllegalCharacter: return "illegal-character";
    case ProtocolErrorCode::kNonFinite: return "non-finite";
    case ProtocolErrorCode::kPacketTooLarge: return "packet-too-large";
    case ProtocolErrorCode::kShortPacket: return "short-packet";
    case ProtocolErrorCode::kMalformedNumber: return "malformed-number";
    case ProtocolErrorCode::kArityMismatch: return "arity-mismatch";
  }
  return "?";
}

ProtocolError::ProtocolError(ProtocolErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

namespace {

bool header_char(char c) { return (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_'; }

std::string pad(std::string_view name) {
  std::string out(name);
  out.resize(kHeaderSize, '_');
  return out;
}

}  // namespace

void RouteTable::add(std::string_view name, RouteEntry entry) {
  check_name(name);
  if (!routes_.emplace(pad(name), std::move(entry)).second) {
    throw std::invalid_argument("duplicate route '" + std::string(name) + "'");
  }
}

const RouteEntry* RouteTable::find(std::string_view header) const {
  auto it = routes_.find(header);
  return it == routes_.end() ? nullptr : &it->second;
}

void check_name(std::string_view name) {
  if (name.empty()) throw ProtocolError(ProtocolErrorCode::kEmptyName, "command name is empty");
  if (name.size() > kHeaderSize) {
    throw ProtocolError(ProtocolErrorCode::kNameTooLong,
                        "'" + std::string(name) + "' exceeds 16 characters");
  }
  for (char c : name) {
    if (!header_char(c)) {
      throw ProtocolError(ProtocolErrorCode::kIllegalCharacter,
                          "'" + std::string(name) + "' contains characters outside [A-Z0-9_]");
    }
  }
  if (name.back() == '_') {
    throw ProtocolError(ProtocolErrorCode::kIllegalCharacter,
                        "'" + std::string(name) + "' ends with the pad character");
  }
}

std::string encode(std::string_view name, const std::vector<double>& values) {
  check_name(name);
  std::string out = pad(name);
  char buf[512];
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw ProtocolError(ProtocolErrorCode::kNonFinite, "value " + std::to_string(i) + " is not finite");
    }
    int n = std::snprintf(buf, sizeof buf, "%.6f", values[i]);
    if (n < 0 || static_cast<std::size_t>(n) >= sizeof buf) {
      throw ProtocolError(ProtocolErrorCode::kPacketTooLarge, "value " + std::to_string(i) + " too large");
    }
    if (i) out += ',';
    out.append(buf, static_cast<std::size_t>(n));
    if (out.size() > kMaxPacket) break;
  }
  if (out.size() > kMaxPacket) {
    throw ProtocolError(ProtocolErrorCode::kPacketTooLarge, "packet exceeds 1400 bytes");
  }
  return out;
}

Decoded decode(std::string_view packet, const RouteTable* routes) {
  if (packet.size() < kHeaderSize) {
    throw ProtocolError(ProtocolErrorCode::kShortPacket,
                        std::to_string(packet.size()) + " bytes, need at least 16");
  }
  if (packet.size() > kMaxPacket) {
    throw ProtocolError(ProtocolErrorCode::kPacketTooLarge, "packet exceeds 1400 bytes");
  }
  Decoded d;
  d.header = std::string(packet.substr(0, kHeaderSize));
  for (char c : d.header) {
    if (!header_char(c)) throw ProtocolError(ProtocolErrorCode::kIllegalCharacter, "bad header byte");
  }
  auto end = d.header.find_last_not_of('_');
  if (end == std::string::npos) throw ProtocolError(ProtocolErrorCode::kEmptyName, "header is all padding");
  d.name = d.header.substr(0, end + 1);

  std::string_view body = packet.substr(kHeaderSize);
  while (!body.empty()) {
    auto comma = body.find(',');
    std::string_view item = body.substr(0, comma);
    double v = 0;
    const char* first = item.data();
    if (!item.empty() && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, item.data() + item.size(), v);
    if (item.empty() || ec != std::errc() || ptr != item.data() + item.size() || !std::isfinite(v)) {
      throw ProtocolError(ProtocolErrorCode::kMalformedNumber, "'" + std::string(item) + "'");
    }
    d.values.push_back(v);
    if (comma == std::string_view::npos) break;
    body.remove_prefix(comma + 1);
    if (body.empty()) throw ProtocolError(ProtocolErrorCode::kMalformedNumber, "trailing comma");
  }

  if (routes != nullptr) {
    const RouteEntry* route = routes->find(d.header);
    d.known_route = route != nullptr;
    if (route != nullptr) {
      if (!route->arity.accepts(d.values.size())) {
        throw ProtocolError(ProtocolErrorCode::kArityMismatch,
                            d.name + " expects " + route->arity.describe() + " values, got " +
                                std::to_string(d.values.size()));
      }
      d.route_index = route->route_index;
    }
  } else {
    d.known_route = true;
  }
  return d;
}

std::string frame(std::string_view packet) {
  if (packet.size() > 9999) throw std::invalid_argument("frame too large");
  char prefix[5];
  std::snprintf(prefix, sizeof prefix, "%04zu", packet.size());
  return std::string(prefix, 4) + std::string(packet);
}

std::vector<std::string> unframe(std::string& buffer) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (buffer.size() - pos >= 4) {
    std::size_t len = 0;
    auto [ptr, ec] = std::from_chars(buffer.data() + pos, buffer.data() + pos + 4, len);
    if (ec != std::errc() || ptr != buffer.data() + pos + 4) {
      throw ProtocolError(ProtocolErrorCode::kMalformedNumber, "bad frame length prefix");
    }
    if (buffer.size() - pos - 4 < len) break;
    out.emplace_back(buffer.substr(pos + 4, len));
    pos += 4 + len;
  }
  buffer.erase(0, pos);
  return out;
}

}  // namespace wfctl::comm
