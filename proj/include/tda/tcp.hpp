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

#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "tda/protocol.hpp"
#include "tda/runtime.hpp"

namespace tda {

/// Owned POSIX file descriptor.
class Fd {
 public:
  Fd() = default;
  explicit Fd(int fd) : fd_(fd) {}
  Fd(Fd&& o) noexcept : fd_(o.release()) {}
  Fd& operator=(Fd&& o) noexcept;
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  ~Fd();

  int get() const { return fd_; }
  int release();
  explicit operator bool() const { return fd_ >= 0; }

 private:
  int fd_ = -1;
};

/// Blocking framed stream. Throws Error{kTransportError} with the OS cause.
class TcpStream {
 public:
  static TcpStream connect(const Address& addr);
  explicit TcpStream(Fd fd) : fd_(std::move(fd)) {}

  void send(const Message& m);
  void send_bytes(std::span<const std::uint8_t> bytes);
  /// Blocks until a whole message arrives. Throws on EOF.
  Message receive();

  int fd() const { return fd_.get(); }
  Fd release_fd() { return std::move(fd_); }

 private:
  Fd fd_;
  FrameReader reader_;
};

class TcpListener {
 public:
  /// "host:port"; port 0 picks a free port.
  static TcpListener bind(const Address& addr);

  TcpStream accept();
  const Address& address() const { return address_; }
  int fd() const { return fd_.get(); }

 private:
  TcpListener(Fd fd, Address a) : fd_(std::move(fd)), address_(std::move(a)) {}
  Fd fd_;
  Address address_;
};

/// Single-threaded event loop that drives one Node over TCP. Outbound
/// links are opened on first send to a "host:port" address; inbound
/// connections are named "peer:<n>" and replies to that name go back over
/// the same connection. Node callbacks all run on the thread inside run().
class TcpRuntime : public Context {
 public:
  /// Binds immediately when listen is given.
  TcpRuntime(Node& node, std::optional<Address> listen = std::nullopt);
  ~TcpRuntime() override;

  /// Calls node.on_start and services sockets and timers until stop().
  void run();
  /// Safe from any thread.
  void request_stop() { stop_.store(true); }

  Millis now() const override;
  const Address& self() const override { return self_; }
  bool send(const Address& to, const Message& m) override;
  TimerId set_timer(Millis delay, std::uint64_t tag) override;
  void cancel_timer(TimerId id) override;
  void disconnect(const Address& peer) override;
  Millis work_cost(JobId, std::uint64_t) override { return 0; }
  Millis assignment_overhead() override { return 0; }
  void stop() override { stop_.store(true); }

 private:
  struct Conn {
    Fd fd;
    Address name;
    FrameReader reader;
    std::vector<std::uint8_t> out;
    std::size_t out_offset = 0;
  };
  struct Timer {
    Millis deadline;
    TimerId id;
    std::uint64_t tag;
    bool operator>(const Timer& o) const { return deadline != o.deadline ? deadline > o.deadline : id > o.id; }
  };

  Conn* add_conn(Fd fd, Address name);
  void close_conn(int fd, bool notify);
  void flush(Conn& c);
  void read_from(Conn& c);
  void fire_due_timers();
  bool pending_output() const;

  Node& node_;
  std::optional<TcpListener> listener_;
  Address self_;
  std::chrono::steady_clock::time_point epoch_;
  std::atomic<bool> stop_{false};
  std::map<int, Conn> conns_;  // by fd
  std::unordered_map<Address, int> by_name_;
  std::priority_queue<Timer, std::vector<Timer>, std::greater<Timer>> timers_;
  std::set<TimerId> cancelled_;
  TimerId next_timer_ = 1;
  std::uint64_t next_peer_ = 1;
};

}  // namespace tda
