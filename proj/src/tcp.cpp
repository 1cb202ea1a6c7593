// Copyright 2026 The TDA Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "tda/tcp.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <iostream>

#include "tda/error.hpp"

namespace tda {

namespace {

[[noreturn]] void os_error(const std::string& what) {
  throw Error(ErrorCode::kTransportError, what + ": " + std::strerror(errno));
}

std::pair<std::string, std::string> split_host_port(const Address& addr) {
  auto colon = addr.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == addr.size())
    throw Error(ErrorCode::kTransportError, "address must be host:port, got '" + addr + "'");
  return {addr.substr(0, colon), addr.substr(colon + 1)};
}

struct AddrInfo {
  addrinfo* head = nullptr;
  ~AddrInfo() {
    if (head) freeaddrinfo(head);
  }
};

void resolve(const Address& addr, bool passive, AddrInfo& out) {
  auto [host, port] = split_host_port(addr);
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  if (passive) hints.ai_flags = AI_PASSIVE;
  int rc = getaddrinfo(host.c_str(), port.c_str(), &hints, &out.head);
  if (rc != 0) throw Error(ErrorCode::kTransportError, "cannot resolve " + addr + ": " + gai_strerror(rc));
}

void set_nonblocking(int fd) {
  int flags = fcntl(fd, F_GETFL, 0);
  if (flags < 0 || fcntl(fd, F_SETFL, flags | O_NONBLOCK) < 0) os_error("fcntl");
}

void set_nodelay(int fd) {
  int one = 1;
  setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

}  // namespace

Fd& Fd::operator=(Fd&& o) noexcept {
  if (this != &o) {
    if (fd_ >= 0) ::close(fd_);
    fd_ = o.release();
  }
  return *this;
}

Fd::~Fd() {
  if (fd_ >= 0) ::close(fd_);
}

int Fd::release() {
  int fd = fd_;
  fd_ = -1;
  return fd;
}

TcpStream TcpStream::connect(const Address& addr) {
  AddrInfo ai;
  resolve(addr, false, ai);
  Fd fd(::socket(ai.head->ai_family, ai.head->ai_socktype, ai.head->ai_protocol));
  if (!fd) os_error("socket");
  if (::connect(fd.get(), ai.head->ai_addr, ai.head->ai_addrlen) != 0) os_error("connect " + addr);
  set_nodelay(fd.get());
  return TcpStream(std::move(fd));
}

void TcpStream::send(const Message& m) { send_bytes(encode_frame(m)); }

void TcpStream::send_bytes(std::span<const std::uint8_t> bytes) {
  std::size_t done = 0;
  while (done < bytes.size()) {
    ssize_t n = ::send(fd_.get(), bytes.data() + done, bytes.size() - done, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      os_error("send");
    }
    done += static_cast<std::size_t>(n);
  }
}

Message TcpStream::receive() {
  std::uint8_t buf[65536];
  while (true) {
    if (auto m = reader_.next()) return std::move(*m);
    ssize_t n = ::recv(fd_.get(), buf, sizeof buf, 0);
    if (n < 0) {
      if (errno == EINTR) continue;
      os_error("recv");
    }
    if (n == 0) throw Error(ErrorCode::kTransportError, "connection closed");
    reader_.append(std::span(buf, static_cast<std::size_t>(n)));
  }
}

TcpListener TcpListener::bind(const Address& addr) {
  AddrInfo ai;
  resolve(addr, true, ai);
  Fd fd(::socket(ai.head->ai_family, ai.head->ai_socktype, ai.head->ai_protocol));
  if (!fd) os_error("socket");
  int one = 1;
  setsockopt(fd.get(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  if (::bind(fd.get(), ai.head->ai_addr, ai.head->ai_addrlen) != 0) os_error("bind " + addr);
  if (::listen(fd.get(), 64) != 0) os_error("listen " + addr);
  sockaddr_in local{};
  socklen_t len = sizeof local;
  if (::getsockname(fd.get(), reinterpret_cast<sockaddr*>(&local), &len) != 0) os_error("getsockname");
  char host[INET_ADDRSTRLEN] = {};
  inet_ntop(AF_INET, &local.sin_addr, host, sizeof host);
  return TcpListener(std::move(fd), std::string(host) + ":" + std::to_string(ntohs(local.sin_port)));
}

TcpStream TcpListener::accept() {
  while (true) {
    int fd = ::accept(fd_.get(), nullptr, nullptr);
    if (fd >= 0) {
      set_nodelay(fd);
      return TcpStream(Fd(fd));
    }
    if (errno != EINTR) os_error("accept");
  }
}

// --- event loop -------------------------------------------------------------

TcpRuntime::TcpRuntime(Node& node, std::optional<Address> listen)
    : node_(node), epoch_(std::chrono::steady_clock::now()) {
  if (listen) {
    listener_.emplace(TcpListener::bind(*listen));
    set_nonblocking(listener_->fd());
    self_ = listener_->address();
  } else {
    self_ = "unbound:" + std::to_string(::getpid());
  }
}

TcpRuntime::~TcpRuntime() = default;

Millis TcpRuntime::now() const {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - epoch_).count();
}

TcpRuntime::Conn* TcpRuntime::add_conn(Fd fd, Address name) {
  set_nonblocking(fd.get());
  int key = fd.get();
  Conn& c = conns_[key];
  c.fd = std::move(fd);
  c.name = name;
  by_name_[name] = key;
  return &c;
}

void TcpRuntime::close_conn(int fd, bool notify) {
  auto it = conns_.find(fd);
  if (it == conns_.end()) return;
  Address name = it->second.name;
  by_name_.erase(name);
  conns_.erase(it);
  if (notify) node_.on_peer_lost(*this, name);
}

bool TcpRuntime::send(const Address& to, const Message& m) {
  std::vector<std::uint8_t> frame;
  try {
    frame = encode_frame(m);
  } catch (const Error& e) {
    std::cerr << "tda: dropping message to " << to << ": " << e.what() << "\n";
    return false;
  }
  Conn* c = nullptr;
  if (auto it = by_name_.find(to); it != by_name_.end()) {
    c = &conns_.at(it->second);
  } else {
    if (to.rfind("peer:", 0) == 0) return false;
    try {
      c = add_conn(TcpStream::connect(to).release_fd(), to);
    } catch (const Error&) {
      return false;
    }
  }
  c->out.insert(c->out.end(), frame.begin(), frame.end());
  flush(*c);
  return true;
}

void TcpRuntime::flush(Conn& c) {
  while (c.out_offset < c.out.size()) {
    ssize_t n = ::send(c.fd.get(), c.out.data() + c.out_offset, c.out.size() - c.out_offset, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      if (errno == EAGAIN || errno == EWOULDBLOCK) return;
      return;  // error surfaces as POLLERR/POLLHUP
    }
    c.out_offset += static_cast<std::size_t>(n);
  }
  c.out.clear();
  c.out_offset = 0;
}

TimerId TcpRuntime::set_timer(Millis delay, std::uint64_t tag) {
  TimerId id = next_timer_++;
  timers_.push({now() + std::max<Millis>(delay, 0), id, tag});
  return id;
}

void TcpRuntime::cancel_timer(TimerId id) { cancelled_.insert(id); }

void TcpRuntime::disconnect(const Address& peer) {
  if (auto it = by_name_.find(peer); it != by_name_.end()) close_conn(it->second, false);
}

void TcpRuntime::read_from(Conn& c) {
  std::uint8_t buf[65536];
  const int fd = c.fd.get();
  while (true) {
    ssize_t n = ::recv(fd, buf, sizeof buf, 0);
    if (n < 0) {
      if (errno == EINTR) continue;
      if (errno == EAGAIN || errno == EWOULDBLOCK) break;
      close_conn(fd, true);
      return;
    }
    if (n == 0) {
      close_conn(fd, true);
      return;
    }
    c.reader.append(std::span(buf, static_cast<std::size_t>(n)));
    if (static_cast<std::size_t>(n) < sizeof buf) break;
  }
  const Address name = c.name;
  while (true) {
    auto it = conns_.find(fd);
    if (it == conns_.end()) return;  // closed by a handler
    std::optional<Message> m;
    try {
      m = it->second.reader.next();
    } catch (const Error& e) {
      std::cerr << "tda: dropping " << name << ": " << e.what() << "\n";
      close_conn(fd, true);
      return;
    }
    if (!m) return;
    node_.on_message(*this, name, *m);
    if (stop_.load()) return;
  }
}

void TcpRuntime::fire_due_timers() {
  const Millis t = now();
  std::vector<Timer> due;
  while (!timers_.empty() && timers_.top().deadline <= t) {
    due.push_back(timers_.top());
    timers_.pop();
  }
  for (const Timer& tm : due) {
    if (cancelled_.erase(tm.id)) continue;
    node_.on_timer(*this, tm.tag);
    if (stop_.load()) return;
  }
}

bool TcpRuntime::pending_output() const {
  for (const auto& [fd, c] : conns_) {
    if (c.out_offset < c.out.size()) return true;
  }
  return false;
}

void TcpRuntime::run() {
  node_.on_start(*this);
  while (!stop_.load()) {
    std::vector<pollfd> fds;
    if (listener_) fds.push_back({listener_->fd(), POLLIN, 0});
    for (const auto& [fd, c] : conns_) {
      short ev = POLLIN;
      if (c.out_offset < c.out.size()) ev |= POLLOUT;
      fds.push_back({fd, ev, 0});
    }
    int timeout = 100;
    if (!timers_.empty()) {
      Millis wait = timers_.top().deadline - now();
      timeout = wait <= 0 ? 0 : std::min(timeout, static_cast<int>(wait) + 1);
    }
    int rc = ::poll(fds.data(), fds.size(), timeout);
    if (rc < 0 && errno != EINTR) os_error("poll");
    for (const pollfd& p : fds) {
      if (stop_.load()) break;
      if (p.revents == 0) continue;
      if (listener_ && p.fd == listener_->fd()) {
        while (true) {
          int fd = ::accept(listener_->fd(), nullptr, nullptr);
          if (fd < 0) break;
          set_nodelay(fd);
          add_conn(Fd(fd), "peer:" + std::to_string(next_peer_++));
        }
        continue;
      }
      auto it = conns_.find(p.fd);
      if (it == conns_.end()) continue;
      if (p.revents & POLLOUT) flush(it->second);
      if (p.revents & (POLLIN | POLLHUP | POLLERR)) read_from(it->second);
    }
    if (!stop_.load()) fire_due_timers();
  }
  // Best-effort drain of queued output before returning.
  auto deadline = now() + 2000;
  while (pending_output() && now() < deadline) {
    std::vector<pollfd> fds;
    for (const auto& [fd, c] : conns_) {
      if (c.out_offset < c.out.size()) fds.push_back({fd, POLLOUT, 0});
    }
    if (::poll(fds.data(), fds.size(), 50) < 0 && errno != EINTR) break;
    for (const pollfd& p : fds) {
      if (p.revents & (POLLERR | POLLHUP)) {
        close_conn(p.fd, false);
      } else if (p.revents & POLLOUT) {
        flush(conns_.at(p.fd));
      }
    }
  }
}

}  // namespace tda
