#include <doctest.h>

#include <atomic>
#include <random>
#include <thread>

#include "wfctl/builtin_workflows.hpp"
#include "wfctl/def/definition.hpp"
#include "wfctl/dispatch/dispatcher.hpp"
#include "wfctl/dispatch/queue.hpp"
#include "wfctl/dispatch/snapshot.hpp"

using namespace wfctl;
using dispatch::Command;
using dispatch::CommandBinding;
using dispatch::DispatchStatus;

namespace {

// Noop RATMS wiring with the usual flags.
void wire(dispatch::Dispatcher& d, const def::WorkflowDefinition& def) {
  for (const auto& name : def.step_names()) d.declare_noop(name);
  d.register_command("PLAN_LANDMARKS",
                     CommandBinding::op("registration", "plan_landmarks", core::Arity::repeated(3)));
  d.register_command("DIGITIZE_LM_1",
                     CommandBinding::op("digitization", "digitize_point", core::Arity::exactly(3), 0));
  d.register_command("ALL_DIGITIZED", CommandBinding::op("digitization", "all_digitized"));
  d.register_command("REGISTRATION_REG", CommandBinding::op("registration", "register"));
  d.register_command("PLAN_POSE", CommandBinding::op("pose-plan", "plan_pose", core::Arity::exactly(6)));
  d.register_command("CONNECT_ROBOT", CommandBinding::op("robot-connection", "connect"));
  d.register_command("REINIT_REG", CommandBinding::reinit("registration"));
  d.bind_flag("planned", "registration", 0);
  d.bind_flag("digitized", "registration", 1);
  d.bind_flag("registered", "registration", 2);
  d.bind_flag("all_digitized", "digitization", 0);
  d.bind_flag("pose_planned", "pose-plan", 0);
}

struct Fixture {
  explicit Fixture(bool flags = true) : d(dispatch::DispatcherOptions{flags, {}}) {
    def = def::parse_definition(builtin::kRatms);
    wire(d, def);
    d.compile(def);
  }
  dispatch::DispatchResult send(const char* name, std::vector<double> v = {}) {
    return d.dispatch(Command::make(name, std::move(v)));
  }
  def::WorkflowDefinition def;
  dispatch::Dispatcher d;
};

bool flag(const dispatch::Dispatcher& d, const std::string& name) { return d.get_flags().at(name).value; }

}  // namespace

TEST_CASE("command names pad to sixteen characters") {
  CHECK(dispatch::pad_command("START_VIS") == "START_VIS_______");
  CHECK(dispatch::pad_command("REGISTRATION_REG") == "REGISTRATION_REG");
  CHECK_THROWS_AS(dispatch::pad_command(""), std::invalid_argument);
  CHECK_THROWS_AS(dispatch::pad_command("REGISTRATION_REG_"), std::invalid_argument);
  CHECK(Command::make("ALL_DIGITIZED").name.size() == 16);
}

TEST_CASE("unknown commands and arity mismatches never reach the machine") {
  Fixture f;
  auto r = f.send("SELF_DESTRUCT");
  CHECK(r.status == DispatchStatus::kUnknownCommand);
  CHECK(r.detail == "forbidden/unknown command");
  CHECK_FALSE(r.record);

  r = f.send("PLAN_POSE", {1, 2, 3});
  CHECK(r.status == DispatchStatus::kArityMismatch);
  r = f.send("PLAN_LANDMARKS", {1, 2, 3, 4});
  CHECK(r.status == DispatchStatus::kArityMismatch);
  r = f.send("PLAN_LANDMARKS", {});
  CHECK(r.status == DispatchStatus::kArityMismatch);
  CHECK(f.d.machine().transition_log().empty());

  auto t = f.d.telemetry();
  CHECK(t["dispatched"] == 4);
  CHECK(t["unknown"] == 1);
  CHECK(t["arity_mismatch"] == 3);
}

TEST_CASE("fixed arities are limited to the standard counts") {
  dispatch::Dispatcher d;
  CHECK_THROWS_AS(d.register_command("X", CommandBinding::op("b", "o", core::Arity::exactly(4))),
                  std::invalid_argument);
  CHECK_NOTHROW(d.register_command("Y", CommandBinding::op("b", "o", core::Arity::exactly(7))));
  CHECK_THROWS_AS(d.register_command("Y", CommandBinding::op("b", "o")), std::invalid_argument);
}

TEST_CASE("registration is frozen after compile") {
  Fixture f;
  CHECK_THROWS_AS(f.d.register_command("NEW", CommandBinding::reinit("registration")),
                  core::LifecycleError);
  CHECK_THROWS_AS(f.d.bind_flag("x", "registration", 0), core::LifecycleError);
  CHECK_THROWS_AS(f.d.declare_noop("x"), core::LifecycleError);
  CHECK_THROWS_AS(f.d.compile(f.def), core::LifecycleError);
}

TEST_CASE("compile rejects bindings to missing names") {
  auto def = def::parse_definition(builtin::kRatms);
  {
    dispatch::Dispatcher d;
    wire(d, def);
    d.register_command("BAD", CommandBinding::op("registration", "teleport"));
    CHECK_THROWS_AS(d.compile(def), std::invalid_argument);
  }
  {
    dispatch::Dispatcher d;
    wire(d, def);
    d.bind_flag("bogus", "pose-plan", 3);
    CHECK_THROWS_AS(d.compile(def), std::invalid_argument);
  }
  {
    dispatch::Dispatcher d;
    wire(d, def);
    d.register_command("DATA", CommandBinding::data("nowhere", core::Arity::exactly(6)));
    CHECK_THROWS_AS(d.compile(def), std::invalid_argument);
  }
}

TEST_CASE("the same command is accepted or rejected depending on state") {
  Fixture f;
  auto early = f.send("REGISTRATION_REG");
  REQUIRE(early.record);
  CHECK(early.record->outcome == core::Outcome::kRejectedInvalid);
  CHECK(f.d.machine().active_state("registration") == "000");

  REQUIRE(f.send("PLAN_LANDMARKS", {0, 0, 0, 1, 0, 0, 0, 1, 0}).accepted());
  REQUIRE(f.send("DIGITIZE_LM_1", {0, 0, 0}).accepted());
  auto all = f.send("ALL_DIGITIZED");
  REQUIRE(all.accepted());
  CHECK(all.cascade_records == 1);
  CHECK(f.d.machine().active_state("registration") == "110");

  auto reg = f.send("REGISTRATION_REG");
  CHECK(reg.accepted());
  CHECK(reg.verdict() == "transition Accepted registration.register 110->111");
}

TEST_CASE("flags mirror committed digits and reset on re-plan") {
  Fixture f;
  CHECK_FALSE(flag(f.d, "planned"));
  CHECK(f.d.get_flags().at("planned").last_transition == 0);

  f.send("PLAN_LANDMARKS", {0, 0, 0});
  f.send("DIGITIZE_LM_1", {0, 0, 0});
  f.send("ALL_DIGITIZED");
  f.send("REGISTRATION_REG");
  CHECK(flag(f.d, "planned"));
  CHECK(flag(f.d, "digitized"));
  CHECK(flag(f.d, "registered"));
  CHECK(flag(f.d, "all_digitized"));

  // Rejected requests leave flags alone.
  auto before = f.d.get_flags();
  f.send("ALL_DIGITIZED");
  CHECK(f.d.get_flags() == before);

  f.send("PLAN_LANDMARKS", {0, 0, 0});
  CHECK(flag(f.d, "planned"));
  CHECK_FALSE(flag(f.d, "digitized"));
  CHECK_FALSE(flag(f.d, "registered"));
  CHECK_FALSE(flag(f.d, "all_digitized"));

  f.send("REINIT_REG");
  CHECK_FALSE(flag(f.d, "planned"));
}

TEST_CASE("disabled flags leave an empty registry and identical verdicts") {
  Fixture on(true), off(false);
  CHECK(off.d.get_flags().empty());
  std::mt19937 rng(7);
  const std::vector<std::pair<const char*, std::size_t>> menu{
      {"PLAN_LANDMARKS", 3}, {"DIGITIZE_LM_1", 3}, {"ALL_DIGITIZED", 0}, {"REGISTRATION_REG", 0},
      {"PLAN_POSE", 6},      {"CONNECT_ROBOT", 0}, {"REINIT_REG", 0},    {"NOPE", 0}};
  for (int i = 0; i < 500; ++i) {
    auto [name, n] = menu[rng() % menu.size()];
    std::vector<double> v(n, 1.0);
    CHECK(on.send(name, v).verdict() == off.send(name, v).verdict());
  }
  CHECK(off.d.get_flags().empty());
  CHECK(on.d.machine().active_states() == off.d.machine().active_states());
}

TEST_CASE("scaling and route index are applied before the step runs") {
  auto def = def::parse_definition(builtin::kRatms);
  dispatch::Dispatcher d;
  std::vector<double> seen;
  int route = -2;
  for (const auto& name : def.step_names()) {
    if (name == "store_digitization") {
      d.register_handler(name, [&](const core::StepContext& c) {
        seen = c.message.values;
        route = c.message.route_index;
        return core::StepResult::success();
      });
    } else {
      d.declare_noop(name);
    }
  }
  d.register_command("PLAN", CommandBinding::op("registration", "plan_landmarks", core::Arity::repeated(3)));
  auto b = CommandBinding::op("digitization", "digitize_point", core::Arity::exactly(3), 4);
  b.scale = 1000.0;
  d.register_command("DIG_M", b);
  d.compile(def);
  d.dispatch(Command::make("PLAN", {0, 0, 0}));
  REQUIRE(d.dispatch(Command::make("DIG_M", {0.001, -0.002, 0.0})).accepted());
  REQUIRE(seen.size() == 3);
  CHECK(seen[0] == doctest::Approx(1.0));
  CHECK(seen[1] == doctest::Approx(-2.0));
  CHECK(route == 4);
}

TEST_CASE("data commands go to their sink without touching the machine") {
  auto def = def::parse_definition(builtin::kRatms);
  dispatch::Dispatcher d;
  wire(d, def);
  int hits = 0;
  d.register_sink("tracker", [&](const Command& c) { hits += static_cast<int>(c.payload.values.size()); });
  d.register_command("TRACKER_POSE", CommandBinding::data("tracker", core::Arity::exactly(6)));
  d.compile(def);
  auto r = d.dispatch(Command::make("TRACKER_POSE", {1, 2, 3, 4, 5, 6}));
  CHECK(r.status == DispatchStatus::kData);
  CHECK(hits == 6);
  CHECK(d.machine().transition_log().empty());
}

TEST_CASE("snapshot carries states, flags, operations and metrics") {
  auto def = def::parse_definition(builtin::kRatms);
  dispatch::Dispatcher d;
  for (const auto& name : def.step_names()) {
    if (name == "register_landmarks") {
      d.register_handler(name, [](const core::StepContext&) {
        return core::StepResult::success({{dispatch::kAvgResidualKey, 1.25}});
      });
    } else {
      d.declare_noop(name);
    }
  }
  d.register_command("PLAN_LANDMARKS", CommandBinding::op("registration", "plan_landmarks", core::Arity::repeated(3)));
  d.register_command("DIGITIZE_LM_1", CommandBinding::op("digitization", "digitize_point", core::Arity::exactly(3)));
  d.register_command("ALL_DIGITIZED", CommandBinding::op("digitization", "all_digitized"));
  d.register_command("REGISTRATION_REG", CommandBinding::op("registration", "register"));
  d.bind_flag("registered", "registration", 2);
  d.compile(def);

  auto s0 = dispatch::take_snapshot(d, 0);
  CHECK(s0.available.at("digitization").empty());
  CHECK_FALSE(s0.avg_residual);

  d.dispatch(Command::make("PLAN_LANDMARKS", {0, 0, 0}));
  d.dispatch(Command::make("DIGITIZE_LM_1", {0, 0, 0}));
  d.dispatch(Command::make("ALL_DIGITIZED"));
  d.dispatch(Command::make("REGISTRATION_REG"));
  auto s = dispatch::take_snapshot(d, 9, 2);
  CHECK(s.states.at("registration") == "111");
  CHECK(s.flags.at("registered"));
  CHECK(s.recent.size() == 2);
  REQUIRE(s.avg_residual);
  CHECK(*s.avg_residual == 1.25);

  auto j = dispatch::to_json(s);
  CHECK(j["type"] == "snapshot");
  CHECK(j["sequence"] == 9);
  CHECK(j["avg_residual"] == 1.25);
  CHECK(j["pose_error"]["translational_mm"].is_null());
  CHECK(j["available"]["registration"].size() >= 2);
}

TEST_CASE("queue applies backpressure and close semantics") {
  dispatch::CommandQueue q(2);
  CHECK(q.try_push(Command::make("A")));
  CHECK(q.try_push(Command::make("B")));
  CHECK_FALSE(q.try_push(Command::make("C")));
  std::thread producer([&] { CHECK(q.push(Command::make("C"))); });
  CHECK(q.pop()->name == dispatch::pad_command("A"));
  producer.join();
  CHECK(q.size() == 2);
  q.close();
  CHECK_FALSE(q.push(Command::make("D")));
  CHECK(q.pop()->name == dispatch::pad_command("B"));
  CHECK(q.pop()->name == dispatch::pad_command("C"));
  CHECK_FALSE(q.pop());
}

TEST_CASE("dispatch loop preserves arrival order across producers") {
  auto def = def::parse_definition(builtin::kRatms);
  dispatch::Dispatcher d;
  wire(d, def);
  d.compile(def);
  dispatch::CommandQueue q(64);
  std::vector<std::string> seen;
  dispatch::DispatchLoop loop(d, q, [&](const dispatch::DispatchResult& r) { seen.push_back(r.command); });
  loop.start();
  std::vector<std::string> sent;
  std::mutex sent_mu;
  std::vector<std::thread> producers;
  for (int p = 0; p < 4; ++p) {
    producers.emplace_back([&, p] {
      for (int i = 0; i < 250; ++i) {
        const char* name = (i + p) % 3 == 0 ? "ALL_DIGITIZED" : ((i + p) % 3 == 1 ? "REINIT_REG" : "NOPE");
        std::lock_guard<std::mutex> lock(sent_mu);  // fixes the order the queue sees
        sent.push_back(dispatch::pad_command(name));
        q.push(Command::make(name));
      }
    });
  }
  for (auto& t : producers) t.join();
  loop.stop();
  CHECK(loop.processed() == 1000);
  CHECK(loop.failures() == 0);
  CHECK(seen == sent);
  CHECK(loop.snapshot().telemetry.at("dispatched") == 1000);
}
