#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <mutex>
#include <optional>
#include <thread>

#include "wfctl/dispatch/dispatcher.hpp"
#include "wfctl/dispatch/snapshot.hpp"

namespace wfctl::dispatch {

// Bounded multi-producer queue. push() blocks while full (backpressure).
class CommandQueue {
 public:
  explicit CommandQueue(std::size_t capacity = 1024);

  // False once the queue is closed.
  bool push(Command cmd);
  bool try_push(Command cmd);
  std::optional<Command> pop();
  std::optional<Command> pop_for(std::chrono::milliseconds timeout);
  void close();

  bool closed() const;
  std::size_t size() const;
  std::size_t capacity() const { return capacity_; }

 private:
  const std::size_t capacity_;
  mutable std::mutex mu_;
  std::condition_variable not_empty_;
  std::condition_variable not_full_;
  std::deque<Command> items_;
  bool closed_ = false;
};

// Single consumer that owns all dispatcher mutation. Results are reported in
// arrival order; a fresh snapshot is published after every command.
class DispatchLoop {
 public:
  using ResultCallback = std::function<void(const DispatchResult&)>;

  DispatchLoop(Dispatcher& dispatcher, CommandQueue& queue, ResultCallback on_result = {});
  ~DispatchLoop();
  DispatchLoop(const DispatchLoop&) = delete;
  DispatchLoop& operator=(const DispatchLoop&) = delete;

  void start();
  // Drains whatever is already queued, then joins.
  void stop();

  Snapshot snapshot() const;
  std::uint64_t processed() const { return processed_.load(); }
  std::uint64_t failures() const { return failures_.load(); }

 private:
  void run();
  void publish();

  Dispatcher& dispatcher_;
  CommandQueue& queue_;
  ResultCallback on_result_;
  std::thread worker_;
  std::atomic<bool> stopping_{false};
  std::atomic<std::uint64_t> processed_{0};
  std::atomic<std::uint64_t> failures_{0};
  mutable std::mutex snap_mu_;
  Snapshot snapshot_;
};

}  // namespace wfctl::dispatch
