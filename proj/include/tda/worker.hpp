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

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "tda/config.hpp"
#include "tda/protocol.hpp"
#include "tda/runtime.hpp"
#include "tda/workloads.hpp"

namespace tda {

/// Where a worker's load figure comes from. Every value handed out is
/// clamped to [0,1]; a failed sample repeats the last good one (0 before
/// any success).
class LoadSource {
 public:
  using Sampler = std::function<std::optional<double>()>;

  /// One value per measure() call; the last value repeats once exhausted.
  static LoadSource scripted(std::vector<double> values);
  /// Load script file: one float per line.
  static LoadSource script_file(const std::string& path);
  /// One-minute host load average divided by the number of CPUs. A single
  /// small file read per call.
  static LoadSource sampled();
  static LoadSource from_sampler(Sampler sampler);

  double measure();
  double last() const { return last_; }

 private:
  explicit LoadSource(Sampler s) : sampler_(std::move(s)) {}

  Sampler sampler_;
  double last_ = 0.0;
};

/// The service-provider role: registers, heartbeats, echoes probes, runs
/// sub-jobs in checkpointed chunks, asks to hand work off when overloaded,
/// and delivers results straight to the requesting client.
class Worker : public Node {
 public:
  static constexpr std::uint64_t kHeartbeatTimer = 1;
  static constexpr std::uint64_t kChunkTimer = 2;
  static constexpr std::uint64_t kRegisterTimer = 3;

  static constexpr Millis kBackoffBase = 1000.0;
  static constexpr Millis kBackoffCap = 60000.0;
  static constexpr int kDeliveryRetries = 3;

  struct Stats {
    std::uint64_t register_attempts = 0;
    std::uint64_t heartbeats = 0;
    std::uint64_t echoes = 0;
    std::uint64_t refusals = 0;
    std::uint64_t fragments = 0;
    std::uint64_t rejects = 0;
  };

  Worker(Address coordinator, double perf_param, LoadSource load, WorkerConfig config,
         std::shared_ptr<const RecordTable> table = nullptr);

  void on_start(Context& ctx) override;
  void on_message(Context& ctx, const Address& from, const Message& m) override;
  void on_timer(Context& ctx, std::uint64_t tag) override;
  void on_peer_lost(Context& ctx, const Address& peer) override;

  std::optional<NodeId> node_id() const { return node_id_; }
  const Stats& stats() const { return stats_; }
  std::size_t queued() const { return queue_.size(); }
  Millis current_backoff() const { return backoff_; }

 private:
  struct Task {
    msg::SubJobAssign assign;
    std::uint64_t position = 0;
    Payload partial;
    bool refusal_pending = false;
    bool refusal_suppressed = false;  // set by a Deny until load drops
  };

  void try_register(Context& ctx);
  void on_assign(Context& ctx, const msg::SubJobAssign& m);
  void start_next(Context& ctx);
  void schedule_chunk(Context& ctx, Millis extra_delay);
  void run_chunk(Context& ctx);
  void finish_front(Context& ctx, Range delivered);
  bool supports(const msg::SubJobAssign& m) const;

  Address coordinator_;
  double perf_param_;
  LoadSource load_;
  WorkerConfig config_;
  std::shared_ptr<const RecordTable> table_;

  std::optional<NodeId> node_id_;
  Millis backoff_ = kBackoffBase;
  std::optional<TimerId> register_timer_;
  std::optional<TimerId> heartbeat_timer_;
  std::optional<TimerId> chunk_timer_;
  std::deque<Task> queue_;
  bool running_ = false;
  Stats stats_;
};

}  // namespace tda
