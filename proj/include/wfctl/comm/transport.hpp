#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "wfctl/comm/protocol.hpp"
#include "wfctl/dispatch/command.hpp"

namespace wfctl::dispatch {
class Dispatcher;
}

namespace wfctl::comm {

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;  // 0 picks an ephemeral port
};

// Receives decoded commands; may block to apply backpressure.
using CommandSink = std::function<void(dispatch::Command)>;

// Routes for every command the dispatcher knows.
RouteTable make_route_table(const dispatch::Dispatcher& d);

struct ReceiverStats {
  std::uint64_t received = 0;
  std::uint64_t enqueued = 0;
  std::uint64_t dropped = 0;        // malformed datagrams
  std::uint64_t unknown_route = 0;  // forwarded, the dispatcher rejects them
};

// UDP command receiver. The socket is bound in the constructor; start()
// launches a worker that polls every `period` and forwards each valid
// datagram to the sink. The caller's thread never blocks.
class DatagramReceiver {
 public:
  DatagramReceiver(Endpoint endpoint, RouteTable routes, CommandSink sink,
                   std::chrono::milliseconds period = std::chrono::milliseconds(5));
  ~DatagramReceiver();
  DatagramReceiver(const DatagramReceiver&) = delete;
  DatagramReceiver& operator=(const DatagramReceiver&) = delete;

  void start();
  void stop();
  std::uint16_t bound_port() const { return port_; }
  ReceiverStats stats() const;

 private:
  void run();
  void handle(std::string_view datagram);

  int fd_ = -1;
  std::uint16_t port_ = 0;
  RouteTable routes_;
  CommandSink sink_;
  std::chrono::milliseconds period_;
  std::thread worker_;
  std::atomic<bool> running_{false};
  std::atomic<std::uint64_t> received_{0}, enqueued_{0}, dropped_{0}, unknown_{0};
};

class DatagramSender {
 public:
  explicit DatagramSender(Endpoint destination);
  ~DatagramSender();
  DatagramSender(const DatagramSender&) = delete;
  DatagramSender& operator=(const DatagramSender&) = delete;

  void send(std::string_view name, const std::vector<double>& values);
  void send_raw(std::string_view bytes);

 private:
  int fd_ = -1;
};

struct BridgeOptions {
  Endpoint endpoint;
  std::chrono::milliseconds snapshot_period{50};
  // Unsent snapshot bytes allowed per client before it is disconnected.
  std::size_t max_pending_bytes = 1 << 20;
};

struct BridgeStats {
  std::uint64_t accepted_clients = 0;
  std::uint64_t slow_disconnects = 0;
  std::uint64_t frames = 0;
  std::uint64_t bad_frames = 0;
  std::uint64_t snapshots = 0;
};

// Console transport over TCP. Inbound: length-prefixed command packets.
// Outbound: one JSON snapshot per line to every client each period.
class BridgeServer {
 public:
  using SnapshotProvider = std::function<std::string()>;

  BridgeServer(BridgeOptions options, SnapshotProvider snapshots, RouteTable routes,
               CommandSink sink);
  ~BridgeServer();
  BridgeServer(const BridgeServer&) = delete;
  BridgeServer& operator=(const BridgeServer&) = delete;

  void start();
  void stop();
  std::uint16_t bound_port() const { return port_; }
  std::size_t client_count() const { return clients_.load(); }
  BridgeStats stats() const;

 private:
  struct Client;
  void run();

  BridgeOptions options_;
  SnapshotProvider snapshots_;
  RouteTable routes_;
  CommandSink sink_;
  int listen_fd_ = -1;
  int wake_fds_[2] = {-1, -1};
  std::uint16_t port_ = 0;
  std::thread worker_;
  std::atomic<bool> running_{false};
  std::atomic<std::size_t> clients_{0};
  std::atomic<std::uint64_t> accepted_{0}, slow_{0}, frames_{0}, bad_frames_{0}, snapshots_sent_{0};
};

// Minimal blocking client for the bridge, used by tools and tests.
class BridgeClient {
 public:
  explicit BridgeClient(Endpoint server);
  ~BridgeClient();
  BridgeClient(const BridgeClient&) = delete;
  BridgeClient& operator=(const BridgeClient&) = delete;

  void send(std::string_view name, const std::vector<double>& values = {});
  void send_packet(std::string_view packet);
  // Next newline-terminated line, or nullopt on timeout / close.
  std::optional<std::string> read_line(std::chrono::milliseconds timeout);

 private:
  int fd_ = -1;
  std::string buffer_;
};

}  // namespace wfctl::comm
