#include "wfctl/comm/transport.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <list>
#include <system_error>

#include "wfctl/dispatch/dispatcher.hpp"

namespace wfctl::comm {

namespace {

[[noreturn]] void throw_errno(const std::string& what) {
  throw std::system_error(errno, std::generic_category(), what);
}

sockaddr_in to_sockaddr(const Endpoint& ep) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(ep.port);
  const std::string host = ep.host.empty() || ep.host == "localhost" ? "127.0.0.1" : ep.host;
  if (inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    throw std::invalid_argument("not an IPv4 address: '" + ep.host + "'");
  }
  return addr;
}

std::uint16_t local_port(int fd) {
  sockaddr_in addr{};
  socklen_t len = sizeof addr;
  if (getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len) != 0) throw_errno("getsockname");
  return ntohs(addr.sin_port);
}

void set_nonblocking(int fd) {
  int flags = fcntl(fd, F_GETFL, 0);
  if (flags < 0 || fcntl(fd, F_SETFL, flags | O_NONBLOCK) != 0) throw_errno("fcntl");
}

int bound_socket(int type, const Endpoint& ep) {
  int fd = socket(AF_INET, type, 0);
  if (fd < 0) throw_errno("socket");
  int one = 1;
  setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr = to_sockaddr(ep);
  if (bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    int err = errno;
    close(fd);
    throw std::system_error(err, std::generic_category(),
                            "bind " + ep.host + ":" + std::to_string(ep.port));
  }
  return fd;
}

}  // namespace

RouteTable make_route_table(const dispatch::Dispatcher& d) {
  RouteTable table;
  for (const auto& [header, binding] : d.commands()) {
    auto end = header.find_last_not_of(dispatch::kPadChar);
    std::string destination = binding.target == dispatch::CommandBinding::Target::kDataSink
                                  ? "sink:" + binding.sink
                                  : binding.branch + "." + binding.operation;
    table.add(header.substr(0, end + 1), RouteEntry{binding.route_index, binding.arity, destination});
  }
  return table;
}

// ---------------------------------------------------------------- receiver

DatagramReceiver::DatagramReceiver(Endpoint endpoint, RouteTable routes, CommandSink sink,
                                   std::chrono::milliseconds period)
    : routes_(std::move(routes)), sink_(std::move(sink)), period_(period) {
  if (period_.count() <= 0) throw std::invalid_argument("poll period must be positive");
  fd_ = bound_socket(SOCK_DGRAM, endpoint);
  int rcvbuf = 4 << 20;
  setsockopt(fd_, SOL_SOCKET, SO_RCVBUF, &rcvbuf, sizeof rcvbuf);
  set_nonblocking(fd_);
  port_ = local_port(fd_);
}

DatagramReceiver::~DatagramReceiver() {
  stop();
  if (fd_ >= 0) close(fd_);
}

void DatagramReceiver::start() {
  if (running_.exchange(true)) return;
  worker_ = std::thread([this] { run(); });
}

void DatagramReceiver::stop() {
  running_ = false;
  if (worker_.joinable()) worker_.join();
}

ReceiverStats DatagramReceiver::stats() const {
  return {received_.load(), enqueued_.load(), dropped_.load(), unknown_.load()};
}

void DatagramReceiver::handle(std::string_view datagram) {
  ++received_;
  Decoded d;
  try {
    d = decode(datagram, &routes_);
  } catch (const ProtocolError&) {
    ++dropped_;
    return;
  }
  if (!d.known_route) ++unknown_;
  sink_(dispatch::Command{d.header, core::DecodedMessage{std::move(d.values), d.route_index},
                          dispatch::Origin::kDatagram});
  ++enqueued_;
}

void DatagramReceiver::run() {
  char buf[kMaxPacket + 64];
  while (running_) {
    pollfd p{fd_, POLLIN, 0};
    int n = poll(&p, 1, static_cast<int>(period_.count()));
    if (n <= 0) continue;
    while (true) {
      ssize_t got = recv(fd_, buf, sizeof buf, 0);
      if (got < 0) break;  // EAGAIN: drained
      handle(std::string_view(buf, static_cast<std::size_t>(got)));
    }
  }
}

// ---------------------------------------------------------------- sender

DatagramSender::DatagramSender(Endpoint destination) {
  fd_ = socket(AF_INET, SOCK_DGRAM, 0);
  if (fd_ < 0) throw_errno("socket");
  sockaddr_in addr = to_sockaddr(destination);
  if (connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    int err = errno;
    close(fd_);
    throw std::system_error(err, std::generic_category(), "connect");
  }
}

DatagramSender::~DatagramSender() {
  if (fd_ >= 0) close(fd_);
}

void DatagramSender::send(std::string_view name, const std::vector<double>& values) {
  send_raw(encode(name, values));
}

void DatagramSender::send_raw(std::string_view bytes) {
  if (::send(fd_, bytes.data(), bytes.size(), 0) < 0) throw_errno("send");
}

// ---------------------------------------------------------------- bridge

struct BridgeServer::Client {
  int fd = -1;
  std::string in;
  std::string out;
  bool dead = false;
};

BridgeServer::BridgeServer(BridgeOptions options, SnapshotProvider snapshots, RouteTable routes,
                           CommandSink sink)
    : options_(std::move(options)),
      snapshots_(std::move(snapshots)),
      routes_(std::move(routes)),
      sink_(std::move(sink)) {
  if (options_.snapshot_period.count() <= 0) throw std::invalid_argument("snapshot period must be positive");
  listen_fd_ = bound_socket(SOCK_STREAM, options_.endpoint);
  if (listen(listen_fd_, 16) != 0) {
    int err = errno;
    close(listen_fd_);
    throw std::system_error(err, std::generic_category(), "listen");
  }
  set_nonblocking(listen_fd_);
  port_ = local_port(listen_fd_);
  if (pipe(wake_fds_) != 0) throw_errno("pipe");
  set_nonblocking(wake_fds_[0]);
}

BridgeServer::~BridgeServer() {
  stop();
  if (listen_fd_ >= 0) close(listen_fd_);
  for (int fd : wake_fds_) {
    if (fd >= 0) close(fd);
  }
}

void BridgeServer::start() {
  if (running_.exchange(true)) return;
  worker_ = std::thread([this] { run(); });
}

void BridgeServer::stop() {
  if (running_.exchange(false)) {
    char c = 1;
    [[maybe_unused]] auto w = write(wake_fds_[1], &c, 1);
  }
  if (worker_.joinable()) worker_.join();
}

BridgeStats BridgeServer::stats() const {
  return {accepted_.load(), slow_.load(), frames_.load(), bad_frames_.load(), snapshots_sent_.load()};
}

void BridgeServer::run() {
  using clock = std::chrono::steady_clock;
  std::list<Client> clients;
  auto next_snapshot = clock::now();
  char buf[4096];

  while (running_) {
    auto now = clock::now();
    if (now >= next_snapshot) {
      std::string line = snapshots_() + "\n";
      for (auto& c : clients) {
        c.out += line;
        if (c.out.size() > options_.max_pending_bytes) {
          c.dead = true;
          ++slow_;
        }
      }
      ++snapshots_sent_;
      next_snapshot += options_.snapshot_period;
      if (next_snapshot < now) next_snapshot = now + options_.snapshot_period;
    }

    std::vector<pollfd> fds;
    fds.push_back({listen_fd_, POLLIN, 0});
    fds.push_back({wake_fds_[0], POLLIN, 0});
    for (auto& c : clients) {
      short events = POLLIN;
      if (!c.out.empty()) events |= POLLOUT;
      fds.push_back({c.fd, events, 0});
    }
    auto wait = std::chrono::duration_cast<std::chrono::milliseconds>(next_snapshot - clock::now());
    int timeout = static_cast<int>(std::max<long long>(0, wait.count()));
    if (poll(fds.data(), fds.size(), timeout) < 0 && errno != EINTR) break;

    if (fds[0].revents & POLLIN) {
      while (true) {
        int fd = accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) break;
        set_nonblocking(fd);
        int one = 1;
        setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
        clients.push_back(Client{fd, {}, {}, false});
        ++accepted_;
      }
    }
    std::size_t i = 2;
    for (auto& c : clients) {
      if (i >= fds.size()) break;
      const pollfd& p = fds[i++];
      if (c.dead) continue;
      if (p.revents & (POLLERR | POLLNVAL)) {
        c.dead = true;
        continue;
      }
      if (p.revents & (POLLIN | POLLHUP)) {
        ssize_t got = recv(c.fd, buf, sizeof buf, 0);
        if (got <= 0) {
          if (got == 0 || (errno != EAGAIN && errno != EWOULDBLOCK)) c.dead = true;
        } else {
          c.in.append(buf, static_cast<std::size_t>(got));
          std::vector<std::string> packets;
          try {
            packets = unframe(c.in);
          } catch (const ProtocolError&) {
            ++bad_frames_;
            c.dead = true;
          }
          for (const auto& packet : packets) {
            ++frames_;
            try {
              Decoded d = decode(packet, &routes_);
              sink_(dispatch::Command{d.header,
                                      core::DecodedMessage{std::move(d.values), d.route_index},
                                      dispatch::Origin::kBridge});
            } catch (const ProtocolError&) {
              ++bad_frames_;
            }
          }
        }
      }
      if (!c.dead && (p.revents & POLLOUT) && !c.out.empty()) {
        ssize_t sent = ::send(c.fd, c.out.data(), c.out.size(), MSG_NOSIGNAL);
        if (sent > 0) {
          c.out.erase(0, static_cast<std::size_t>(sent));
        } else if (sent < 0 && errno != EAGAIN && errno != EWOULDBLOCK) {
          c.dead = true;
        }
      }
    }
    for (auto it = clients.begin(); it != clients.end();) {
      if (it->dead) {
        close(it->fd);
        it = clients.erase(it);
      } else {
        ++it;
      }
    }
    clients_ = clients.size();
    char drain[16];
    while (read(wake_fds_[0], drain, sizeof drain) > 0) {
    }
  }
  for (auto& c : clients) close(c.fd);
  clients_ = 0;
}

// ---------------------------------------------------------------- client

BridgeClient::BridgeClient(Endpoint server) {
  fd_ = socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw_errno("socket");
  sockaddr_in addr = to_sockaddr(server);
  if (connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    int err = errno;
    close(fd_);
    throw std::system_error(err, std::generic_category(), "connect");
  }
  int one = 1;
  setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

BridgeClient::~BridgeClient() {
  if (fd_ >= 0) close(fd_);
}

void BridgeClient::send(std::string_view name, const std::vector<double>& values) {
  send_packet(encode(name, values));
}

void BridgeClient::send_packet(std::string_view packet) {
  std::string framed = frame(packet);
  std::size_t off = 0;
  while (off < framed.size()) {
    ssize_t n = ::send(fd_, framed.data() + off, framed.size() - off, MSG_NOSIGNAL);
    if (n < 0) throw_errno("send");
    off += static_cast<std::size_t>(n);
  }
}

std::optional<std::string> BridgeClient::read_line(std::chrono::milliseconds timeout) {
  auto deadline = std::chrono::steady_clock::now() + timeout;
  char buf[4096];
  while (true) {
    auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) return std::nullopt;
    pollfd p{fd_, POLLIN, 0};
    if (poll(&p, 1, static_cast<int>(left.count())) <= 0) return std::nullopt;
    ssize_t n = recv(fd_, buf, sizeof buf, 0);
    if (n <= 0) return std::nullopt;
    buffer_.append(buf, static_cast<std::size_t>(n));
  }
}

}  // namespace wfctl::comm
