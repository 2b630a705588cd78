#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <set>

#include "support.hpp"
#include "wfctl/builtin_workflows.hpp"
#include "wfctl/def/flatten.hpp"
#include "wfctl/def/validate.hpp"

using namespace wfctl::def;
using test_support::load;

namespace {

const char* kMinimal = "workflow tiny\nbranch only level 1 start 0\nstate 0\n";

std::string four_independent() {
  std::string text = "workflow indep\n";
  for (const char* name : {"a", "b", "c", "d"}) {
    text += std::string("branch ") + name + " level 1 start 0\nstate 0\nstate 1\n";
    text += "op set kind SCO from 0 to 1 steps -\n";
    text += "op reinit kind RIO from 0 to 0 steps -\nop reinit kind RIO from 1 to 0 steps -\n";
  }
  return text;
}

}  // namespace

TEST_CASE("minimal definition parses") {
  auto def = parse_definition(kMinimal);
  CHECK(def.name == "tiny");
  REQUIRE(def.branches.size() == 1);
  CHECK(def.branches[0].states.size() == 1);
  CHECK(def.branches[0].states[0].operations.empty());
  CHECK(validate(def).ok());
}

TEST_CASE("registration branch of the RATMS workflow") {
  auto def = parse_definition(wfctl::builtin::kRatms);
  const BranchDef* reg = def.find_branch("registration");
  REQUIRE(reg != nullptr);
  CHECK(reg->level == 1);
  CHECK(reg->start_state == "000");
  std::vector<std::string> digits;
  for (const auto& s : reg->states) digits.push_back(s.digits);
  CHECK(digits == std::vector<std::string>{"000", "100", "110", "111"});
  CHECK(reg->find_state("110")->find("register") != nullptr);
  CHECK(reg->find_state("000")->find("register") == nullptr);

  const BranchDef* dig = def.find_branch("digitization");
  REQUIRE(dig != nullptr);
  REQUIRE(dig->parent);
  CHECK(dig->parent->branch == "registration");
  CHECK(dig->parent->digit_index == 1);
  CHECK(anchor_states(def, *dig) == std::vector<std::string>{"100"});
  CHECK(scope_states(def, *dig) == std::vector<std::string>{"100", "110", "111"});
}

TEST_CASE("parse errors carry line and column") {
  SUBCASE("duplicate state") {
    try {
      parse_definition("workflow w\nbranch b level 1 start 10\nstate 10\nstate 01\nstate 10\n");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 5);
      CHECK(e.column() == 7);
    }
  }
  SUBCASE("malformed digits") {
    try {
      parse_definition("workflow w\nbranch b level 1 start 0\nstate 02\n");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 3);
      CHECK(e.column() == 7);
    }
  }
  SUBCASE("unknown directive") {
    CHECK_THROWS_AS(parse_definition("workflow w\nstates 0\n"), ParseError);
  }
  SUBCASE("workflow must come first") {
    CHECK_THROWS_AS(parse_definition("branch b level 1 start 0\n"), ParseError);
  }
  SUBCASE("op missing kind") {
    try {
      parse_definition("workflow w\nbranch b level 1 start 0\nstate 0\nop x from 0 to 0\n");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 4);
      CHECK(std::string(e.what()).find("kind") != std::string::npos);
    }
  }
  SUBCASE("op leaving an undeclared state") {
    CHECK_THROWS_AS(parse_definition("workflow w\nbranch b level 1 start 0\nstate 0\n"
                                     "op x kind SMO from 1 to 1 steps -\n"),
                    ParseError);
  }
  SUBCASE("duplicate branch") {
    CHECK_THROWS_AS(parse_definition("workflow w\nbranch b level 1 start 0\nstate 0\n"
                                     "branch b level 1 start 0\nstate 0\n"),
                    ParseError);
  }
  SUBCASE("duplicate operation from the same state") {
    CHECK_THROWS_AS(parse_definition("workflow w\nbranch b level 1 start 0\nstate 0\n"
                                     "op x kind SMO from 0 to 0 steps -\n"
                                     "op x kind SMO from 0 to 0 steps -\n"),
                    ParseError);
  }
}

TEST_CASE("comments and blank lines are ignored") {
  auto def = parse_definition(
      "# header\n\nworkflow w  # trailing\nversion 2.1 beta\n"
      "branch b level 1 start 0\n   \nstate 0 # only\n"
      "op r kind RIO from 0 to 0 steps a,b\n");
  CHECK(def.version == "2.1 beta");
  CHECK(def.branches[0].states[0].operations[0].steps == std::vector<std::string>{"a", "b"});
}

TEST_CASE("serialize round-trips") {
  for (auto text : {wfctl::builtin::kRatms, wfctl::builtin::kFemoroplasty,
                    wfctl::builtin::kRatmsFlat, wfctl::builtin::kStimGrid}) {
    auto def = parse_definition(text);
    auto again = parse_definition(serialize(def));
    CHECK(again == def);
    CHECK(serialize(again) == serialize(def));
  }
}

TEST_CASE("parse and validate are deterministic") {
  auto a = parse_definition(wfctl::builtin::kRatms);
  auto b = parse_definition(wfctl::builtin::kRatms);
  CHECK(a == b);
  auto ra = validate(a);
  auto rb = validate(b);
  CHECK(ra.ok() == rb.ok());
  CHECK(ra.warnings.size() == rb.warnings.size());
}

TEST_CASE("shipped workflows validate clean") {
  for (auto text : {wfctl::builtin::kRatms, wfctl::builtin::kFemoroplasty,
                    wfctl::builtin::kRatmsFlat, wfctl::builtin::kStimGrid}) {
    auto report = validate(parse_definition(text));
    for (const auto& v : report.violations) INFO(format_finding(v));
    CHECK(report.ok());
    CHECK(report.warnings.empty());
  }
  auto chain = validate(load("tests/fixtures/chain/chain.hfsm"));
  CHECK(chain.ok());
}

TEST_CASE("each rule fixture reports exactly its rule") {
  namespace fs = std::filesystem;
  int per_rule[3] = {0, 0, 0};
  for (const auto& entry : fs::directory_iterator(test_support::source_path("tests/fixtures/rules"))) {
    std::string file = entry.path().filename().string();
    std::string expected = file.substr(0, 2);
    for (auto& c : expected) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    auto report = validate(parse_definition(test_support::read_text("tests/fixtures/rules/" + file)));
    INFO(file);
    CHECK(report.rule_ids() == std::vector<std::string>{expected});
    CHECK(report.violations.size() == 1);
    per_rule[expected[1] - '1']++;
  }
  CHECK(per_rule[0] >= 3);
  CHECK(per_rule[1] >= 3);
  CHECK(per_rule[2] >= 3);
}

TEST_CASE("structural findings") {
  SUBCASE("start state missing") {
    auto def = parse_definition("workflow w\nbranch b level 1 start 1\nstate 0\n");
    CHECK(validate(def).rule_ids() == std::vector<std::string>{"S1"});
  }
  SUBCASE("digit length mismatch") {
    auto def = parse_definition("workflow w\nbranch b level 1 start 0\nstate 0\nstate 10\n");
    auto ids = validate(def).rule_ids();
    CHECK(std::find(ids.begin(), ids.end(), "S2") != ids.end());
  }
  SUBCASE("kind inconsistent with endpoints") {
    auto def = parse_definition(
        "workflow w\nbranch b level 1 start 0\nstate 0\nstate 1\n"
        "op x kind SMO from 0 to 1 steps -\nop y kind RIO from 1 to 1 steps -\n");
    auto report = validate(def);
    CHECK(report.rule_ids() == std::vector<std::string>{"S4"});
    CHECK(report.violations.size() == 2);
  }
  SUBCASE("undeclared target") {
    auto def = parse_definition("workflow w\nbranch b level 1 start 0\nstate 0\n"
                                "op x kind SCO from 0 to 1 steps -\n");
    CHECK(validate(def).rule_ids() == std::vector<std::string>{"S3"});
  }
  SUBCASE("unreachable state is a warning") {
    auto def = parse_definition("workflow w\nbranch b level 1 start 0\nstate 0\nstate 1\n");
    auto report = validate(def);
    CHECK(report.ok());
    REQUIRE(report.warnings.size() == 1);
    CHECK(report.warnings[0].rule == "W1");
    CHECK(report.warnings[0].location == "1");
  }
  SUBCASE("child level must be parent level plus one") {
    auto text = std::string(wfctl::builtin::kRatms);
    auto pos = text.find("branch digitization level 2");
    text.replace(pos, std::string("branch digitization level 2").size(), "branch digitization level 3");
    CHECK(validate(parse_definition(text)).rule_ids() == std::vector<std::string>{"S6"});
  }
  SUBCASE("emitting an operation the parent lacks") {
    auto text = std::string(wfctl::builtin::kRatms);
    auto pos = text.find("emits landmarks_digitized");
    text.replace(pos, std::string("emits landmarks_digitized").size(), "emits nothing_here");
    auto ids = validate(parse_definition(text)).rule_ids();
    CHECK(std::find(ids.begin(), ids.end(), "S7") != ids.end());
  }
}

TEST_CASE("incoming classification") {
  auto def = parse_definition(wfctl::builtin::kRatms);
  classify_incoming(def);
  const BranchDef* reg = def.find_branch("registration");
  CHECK(reg->find_state("100")->find("landmarks_digitized")->incoming == IncomingClass::kIio);
  CHECK(reg->find_state("111")->find("landmarks_undigitized")->incoming == IncomingClass::kIio);
  CHECK(reg->find_state("000")->find("plan_landmarks")->incoming == IncomingClass::kDio);
  CHECK(reg->find_state("110")->find("register")->incoming == IncomingClass::kDio);
  CHECK(reg->find_state("111")->find("place_tool")->incoming == IncomingClass::kNone);
}

TEST_CASE("flat expansion") {
  SUBCASE("registration with pose planning gives the 8-state machine") {
    auto def = parse_definition(wfctl::builtin::kRatms);
    auto flat = expand_flat(def, ExpandOptions{4096, {"registration", "pose-plan"}});
    REQUIRE(flat.branches.size() == 1);
    CHECK(flat.branches[0].states.size() == 8);
    CHECK(flat.branches[0].start_state == "0000");
    CHECK(validate(flat).ok());
    // Same state set as the hand-written single-level machine, modulo the
    // position of the pose digit.
    auto hand = parse_definition(wfctl::builtin::kRatmsFlat);
    std::set<std::string> expected;
    for (const auto& s : hand.branches[0].states) {
      const auto& d = s.digits;  // planned, digitized, pose, registered
      expected.insert(std::string{d[0], d[1], d[3], d[2]});
    }
    std::set<std::string> got;
    for (const auto& s : flat.branches[0].states) got.insert(s.digits);
    CHECK(got == expected);
  }
  SUBCASE("full RATMS definition") {
    auto flat = expand_flat(parse_definition(wfctl::builtin::kRatms));
    CHECK(flat.branches[0].states.size() == 16);
  }
  SUBCASE("four independent binary operations") {
    auto flat = expand_flat(parse_definition(four_independent()));
    CHECK(flat.branches[0].states.size() == 16);
    CHECK(flat.branches[0].digit_count() == 4);
  }
  SUBCASE("already flat") {
    auto def = parse_definition(
        "workflow one\nbranch b level 1 start 0\nstate 0\nstate 1\n"
        "op set kind SCO from 0 to 1 steps -\nop reinit kind RIO from 1 to 0 steps -\n");
    CHECK(expand_flat(def) == def);
  }
  SUBCASE("state cap") {
    CHECK_THROWS_AS(expand_flat(parse_definition(four_independent()), ExpandOptions{15, {}}),
                    ExpansionError);
    CHECK_NOTHROW(expand_flat(parse_definition(four_independent()), ExpandOptions{16, {}}));
  }
  SUBCASE("three-level chain keeps only the root digit") {
    auto flat = expand_flat(load("tests/fixtures/chain/chain.hfsm"));
    CHECK(flat.branches[0].states.size() == 2);
  }
}
