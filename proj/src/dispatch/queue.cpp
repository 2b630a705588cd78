#include "wfctl/dispatch/queue.hpp"


namespace wfctl::dispatch {

CommandQueue::CommandQueue(std::size_t capacity) : capacity_(capacity == 0 ? 1 : capacity) {}

bool CommandQueue::push(Command cmd) {
  std::unique_lock lock(mu_);
  not_full_.wait(lock, [&] { return closed_ || items_.size() < capacity_; });
  if (closed_) return false;
  items_.push_back(std::move(cmd));
  not_empty_.notify_one();
  return true;
}

bool CommandQueue::try_push(Command cmd) {
  std::lock_guard lock(mu_);
  if (closed_ || items_.size() >= capacity_) return false;
  items_.push_back(std::move(cmd));
  not_empty_.notify_one();
  return true;
}

std::optional<Command> CommandQueue::pop() {
  std::unique_lock lock(mu_);
  not_empty_.wait(lock, [&] { return closed_ || !items_.empty(); });
  if (items_.empty()) return std::nullopt;
  Command cmd = std::move(items_.front());
  items_.pop_front();
  not_full_.notify_one();
  return cmd;
}

std::optional<Command> CommandQueue::pop_for(std::chrono::milliseconds timeout) {
  std::unique_lock lock(mu_);
  if (!not_empty_.wait_for(lock, timeout, [&] { return closed_ || !items_.empty(); })) {
    return std::nullopt;
  }
  if (items_.empty()) return std::nullopt;
  Command cmd = std::move(items_.front());
  items_.pop_front();
  not_full_.notify_one();
  return cmd;
}

void CommandQueue::close() {
  std::lock_guard lock(mu_);
  closed_ = true;
  not_empty_.notify_all();
  not_full_.notify_all();
}

bool CommandQueue::closed() const {
  std::lock_guard lock(mu_);
  return closed_;
}

std::size_t CommandQueue::size() const {
  std::lock_guard lock(mu_);
  return items_.size();
}

DispatchLoop::DispatchLoop(Dispatcher& dispatcher, CommandQueue& queue, ResultCallback on_result)
    : dispatcher_(dispatcher), queue_(queue), on_result_(std::move(on_result)) {
  publish();
}

DispatchLoop::~DispatchLoop() { stop(); }

void DispatchLoop::start() {
  if (worker_.joinable()) return;
  stopping_ = false;
  worker_ = std::thread([this] { run(); });
}

void DispatchLoop::stop() {
  stopping_ = true;
  if (worker_.joinable()) worker_.join();
}

Snapshot DispatchLoop::snapshot() const {
  std::lock_guard lock(snap_mu_);
  return snapshot_;
}

void DispatchLoop::publish() {
  Snapshot s = take_snapshot(dispatcher_, processed_.load());
  std::lock_guard lock(snap_mu_);
  snapshot_ = std::move(s);
}

void DispatchLoop::run() {
  using namespace std::chrono_literals;
  while (true) {
    auto cmd = queue_.pop_for(5ms);
    if (!cmd) {
      if (stopping_ || queue_.closed()) break;
      continue;
    }
    DispatchResult result;
    try {
      result = dispatcher_.dispatch(*cmd);
    } catch (const std::exception& e) {
      ++failures_;
      result.command = cmd->name;
      result.origin = cmd->origin;
      result.detail = std::string("dispatch error: ") + e.what();
    }
    ++processed_;
    publish();
    if (on_result_) on_result_(result);
  }
}

}  // namespace wfctl::dispatch
