#include <doctest.h>

#include <chrono>
#include <map>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "wfctl/comm/transport.hpp"

using namespace wfctl;
using namespace std::chrono_literals;

namespace {

struct Collector {
  std::mutex mu;
  std::vector<dispatch::Command> got;

  comm::CommandSink sink() {
    return [this](dispatch::Command c) {
      std::lock_guard<std::mutex> lock(mu);
      got.push_back(std::move(c));
    };
  }
  std::size_t size() {
    std::lock_guard<std::mutex> lock(mu);
    return got.size();
  }
  bool wait_for(std::size_t n, std::chrono::milliseconds timeout) {
    auto deadline = std::chrono::steady_clock::now() + timeout;
    while (size() < n) {
      if (std::chrono::steady_clock::now() > deadline) return false;
      std::this_thread::sleep_for(1ms);
    }
    return true;
  }
};

comm::RouteTable routes() {
  comm::RouteTable t;
  t.add("DIGITIZE_LM_1", {0, core::Arity::exactly(3), "digitization.digitize_point"});
  t.add("ALL_DIGITIZED", {-1, core::Arity{}, "digitization.all_digitized"});
  return t;
}

}  // namespace

TEST_CASE("datagram receiver delivers every loopback packet in order") {
  Collector c;
  comm::DatagramReceiver rx({"127.0.0.1", 0}, routes(), c.sink());
  rx.start();
  comm::DatagramSender tx({"127.0.0.1", rx.bound_port()});
  for (int i = 0; i < 1000; ++i) {
    tx.send("DIGITIZE_LM_1", {double(i), 0.5, -1.0});
    if (i % 100 == 99) std::this_thread::sleep_for(2ms);
  }
  REQUIRE(c.wait_for(1000, 5s));
  rx.stop();
  auto s = rx.stats();
  CHECK(s.received == 1000);
  CHECK(s.dropped == 0);
  CHECK(s.enqueued == 1000);
  for (int i = 0; i < 1000; ++i) {
    CHECK(c.got[i].payload.values[0] == double(i));
    CHECK(c.got[i].payload.route_index == 0);
    CHECK(c.got[i].origin == dispatch::Origin::kDatagram);
  }
}

TEST_CASE("malformed datagrams are dropped and counted, valid ones still pass") {
  Collector c;
  comm::DatagramReceiver rx({"127.0.0.1", 0}, routes(), c.sink());
  rx.start();
  comm::DatagramSender tx({"127.0.0.1", rx.bound_port()});
  for (int i = 0; i < 100; ++i) {
    if (i % 2) {
      tx.send_raw(i % 4 == 1 ? "garbage" : "DIGITIZE_LM_1___1,2");
    } else {
      tx.send("ALL_DIGITIZED", {});
    }
  }
  tx.send("UNROUTED", {});
  REQUIRE(c.wait_for(51, 3s));
  std::this_thread::sleep_for(20ms);
  rx.stop();
  auto s = rx.stats();
  CHECK(s.received == 101);
  CHECK(s.dropped == 50);
  CHECK(s.unknown_route == 1);
  CHECK(c.size() == 51);
  CHECK(c.got.back().name == "UNROUTED________");
}

TEST_CASE("bridge forwards framed commands and streams snapshots") {
  Collector c;
  std::atomic<int> seq{0};
  comm::BridgeOptions opts;
  opts.snapshot_period = 10ms;
  comm::BridgeServer server(
      opts, [&] { return nlohmann::json{{"type", "snapshot"}, {"sequence", seq++}}.dump(); }, routes(),
      c.sink());
  server.start();

  comm::BridgeClient a({"127.0.0.1", server.bound_port()});
  comm::BridgeClient b({"127.0.0.1", server.bound_port()});
  a.send("DIGITIZE_LM_1", {1, 2, 3});
  a.send_packet("bad");
  b.send("ALL_DIGITIZED");
  REQUIRE(c.wait_for(2, 2s));
  for (const auto& cmd : c.got) CHECK(cmd.origin == dispatch::Origin::kBridge);

  // Both clients see the same lines for the same sequence numbers.
  std::map<int, std::string> seen_a, seen_b;
  for (int i = 0; i < 20; ++i) {
    auto la = a.read_line(1s);
    auto lb = b.read_line(1s);
    REQUIRE(la);
    REQUIRE(lb);
    seen_a[nlohmann::json::parse(*la)["sequence"].get<int>()] = *la;
    seen_b[nlohmann::json::parse(*lb)["sequence"].get<int>()] = *lb;
  }
  int common = 0;
  for (const auto& [k, v] : seen_a) {
    if (seen_b.count(k)) {
      CHECK(seen_b[k] == v);
      ++common;
    }
  }
  CHECK(common >= 15);
  auto s = server.stats();
  CHECK(s.accepted_clients == 2);
  CHECK(s.bad_frames == 1);
  CHECK(s.frames == 3);
  server.stop();
}

TEST_CASE("bridge disconnects a client that stops reading") {
  Collector c;
  comm::BridgeOptions opts;
  opts.snapshot_period = 1ms;
  opts.max_pending_bytes = 64 * 1024;
  const std::string big(8192, 'x');
  comm::BridgeServer server(opts, [&] { return "\"" + big + "\""; }, routes(), c.sink());
  server.start();
  comm::BridgeClient idle({"127.0.0.1", server.bound_port()});
  auto deadline = std::chrono::steady_clock::now() + 10s;
  while (server.stats().slow_disconnects == 0 && std::chrono::steady_clock::now() < deadline) {
    std::this_thread::sleep_for(5ms);
  }
  CHECK(server.stats().slow_disconnects == 1);
  server.stop();
}
