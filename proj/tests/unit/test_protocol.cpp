#include <doctest.h>

#include <cmath>
#include <functional>
#include <limits>
#include <random>

#include "wfctl/comm/protocol.hpp"

using namespace wfctl;
using comm::ProtocolErrorCode;

namespace {

ProtocolErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const comm::ProtocolError& e) {
    return e.code();
  }
  FAIL("no ProtocolError thrown");
  return ProtocolErrorCode::kEmptyName;
}

}  // namespace

TEST_CASE("encoding examples") {
  CHECK(comm::encode("START_VIS", {}) == "START_VIS_______");
  CHECK(comm::encode("DIGITIZE_PT", {1.5, -2.0, 0.0}) ==
        "DIGITIZE_PT_____1.500000,-2.000000,0.000000");
  CHECK(comm::encode("REGISTRATION_REG", {}) == "REGISTRATION_REG");
  CHECK(comm::encode("A", {1e-7}) == "A_______________0.000000");
}

TEST_CASE("decoding strips the padding and reads values") {
  auto d = comm::decode("DIGITIZE_PT_____1.500000,-2.000000,0.000000");
  CHECK(d.name == "DIGITIZE_PT");
  CHECK(d.header == "DIGITIZE_PT_____");
  CHECK(d.values == std::vector<double>{1.5, -2.0, 0.0});
  CHECK(d.route_index == -1);
  CHECK(comm::decode("START_VIS_______").values.empty());
  CHECK(comm::decode("X_______________+1.25").values == std::vector<double>{1.25});
}

TEST_CASE("malformed packets are rejected with specific codes") {
  CHECK(code_of([] { comm::decode("SHORT"); }) == ProtocolErrorCode::kShortPacket);
  CHECK(code_of([] { comm::decode("lowercase_______"); }) == ProtocolErrorCode::kIllegalCharacter);
  CHECK(code_of([] { comm::decode("________________"); }) == ProtocolErrorCode::kEmptyName);
  CHECK(code_of([] { comm::decode("A_______________1.0,"); }) == ProtocolErrorCode::kMalformedNumber);
  CHECK(code_of([] { comm::decode("A_______________1.0,,2"); }) == ProtocolErrorCode::kMalformedNumber);
  CHECK(code_of([] { comm::decode("A_______________abc"); }) == ProtocolErrorCode::kMalformedNumber);
  CHECK(code_of([] { comm::decode("A_______________nan"); }) == ProtocolErrorCode::kMalformedNumber);
  CHECK(code_of([] { comm::decode("A_______________" + std::string(1400, '1')); }) ==
        ProtocolErrorCode::kPacketTooLarge);

  CHECK(code_of([] { comm::encode("", {}); }) == ProtocolErrorCode::kEmptyName);
  CHECK(code_of([] { comm::encode("REGISTRATION_REG_", {}); }) == ProtocolErrorCode::kNameTooLong);
  CHECK(code_of([] { comm::encode("start", {}); }) == ProtocolErrorCode::kIllegalCharacter);
  CHECK(code_of([] { comm::encode("TRAILING_", {}); }) == ProtocolErrorCode::kIllegalCharacter);
  CHECK(code_of([] { comm::encode("A", {std::numeric_limits<double>::infinity()}); }) ==
        ProtocolErrorCode::kNonFinite);
  CHECK(code_of([] { comm::encode("A", std::vector<double>(200, -123456.0)); }) ==
        ProtocolErrorCode::kPacketTooLarge);
}

TEST_CASE("route table lookups") {
  comm::RouteTable t;
  t.add("DIGITIZE_LM_2", {1, core::Arity::exactly(3), "digitization"});
  CHECK_THROWS_AS(t.add("DIGITIZE_LM_2", {}), std::invalid_argument);
  auto d = comm::decode(comm::encode("DIGITIZE_LM_2", {1, 2, 3}), &t);
  CHECK(d.known_route);
  CHECK(d.route_index == 1);

  auto unknown = comm::decode(comm::encode("SOMETHING", {}), &t);
  CHECK_FALSE(unknown.known_route);
  CHECK(unknown.route_index == -1);

  CHECK(code_of([&] { comm::decode(comm::encode("DIGITIZE_LM_2", {1, 2}), &t); }) ==
        ProtocolErrorCode::kArityMismatch);
}

TEST_CASE("framing survives arbitrary splits") {
  std::vector<std::string> packets{comm::encode("A", {}), comm::encode("PLAN_POSE", {1, 2, 3, 4, 5, 6}),
                                   comm::encode("B", {-0.5})};
  std::string stream;
  for (const auto& p : packets) stream += comm::frame(p);
  CHECK(stream.substr(0, 4) == "0016");
  for (std::size_t chunk = 1; chunk <= stream.size(); ++chunk) {
    std::string buffer;
    std::vector<std::string> got;
    for (std::size_t i = 0; i < stream.size(); i += chunk) {
      buffer += stream.substr(i, chunk);
      for (auto& p : comm::unframe(buffer)) got.push_back(std::move(p));
    }
    CHECK(buffer.empty());
    CHECK(got == packets);
  }
  std::string bad = "00x1ABCD";
  CHECK_THROWS_AS(comm::unframe(bad), comm::ProtocolError);
}

TEST_CASE("round trip over random valid commands") {
  std::mt19937_64 rng(20240607);
  const std::string alphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_";
  std::uniform_int_distribution<std::size_t> len(1, 16), pick(0, alphabet.size() - 1);
  std::uniform_real_distribution<double> value(-1000.0, 1000.0);
  const std::size_t counts[] = {0, 3, 6, 7};
  for (int i = 0; i < 10000; ++i) {
    std::string name(len(rng), 'A');
    for (auto& c : name) c = alphabet[pick(rng)];
    if (name.back() == '_') name.back() = 'Z';
    std::vector<double> values(counts[rng() % 4]);
    for (auto& v : values) v = value(rng);

    auto d = comm::decode(comm::encode(name, values));
    REQUIRE(d.name == name);
    REQUIRE(d.values.size() == values.size());
    for (std::size_t k = 0; k < values.size(); ++k) REQUIRE(std::abs(d.values[k] - values[k]) <= 5e-7);
  }
}
