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

// The coordinator's knowledge base about workers, plus the homogenization
// and partitioning policy that sizes each worker's share of a job.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "tda/config.hpp"
#include "tda/types.hpp"

namespace tda {

enum class NodeStatus { kIdle, kBusy, kDead };

std::string_view to_string(NodeStatus s);

struct CspRecord {
  NodeId node_id;
  Address address;
  double perf_param = 0;
  double last_load = 0;
  std::optional<Millis> rtt_ewma;
  double homogenized_perf = 0;  // perf_param * (1 - last_load)
  NodeStatus status = NodeStatus::kIdle;
  bool lazy = false;
  Millis last_seen = 0;
  double busy_mark_load = 0;  // load at the moment the node was marked Busy
};

/// A schedulable worker and its homogenized performance.
struct Candidate {
  NodeId node_id;
  double homogenized_perf = 0;
};

struct Assignment {
  NodeId node_id;
  Range range;

  friend bool operator==(const Assignment&, const Assignment&) = default;
};

struct PartitionPlan {
  std::vector<Assignment> assignments;

  friend bool operator==(const PartitionPlan&, const PartitionPlan&) = default;
};

class Registry {
 public:
  explicit Registry(SchedulerConfig config);

  /// Throws Error{kInvalidRegistration} unless perf_param is positive and finite.
  NodeId register_node(double perf_param, Address address, Millis now);

  /// A node registering again from the same address keeps its id; its
  /// performance is replaced and it returns to Idle.
  void refresh(NodeId id, double perf_param, Millis now);

  /// Returns the recomputed homogenized performance. A Dead node comes back
  /// as Idle; a Busy node is cleared once it reports a lower load than the
  /// one it was marked at.
  double record_heartbeat(NodeId id, double load, Millis now);

  /// Returns the updated RTT average.
  Millis record_probe_echo(NodeId id, Millis rtt, Millis now);

  /// Marks every stale, not-yet-Dead node Dead and returns those ids.
  std::vector<NodeId> sweep_dead(Millis now);

  std::vector<NodeId> eligible(std::uint64_t job_size) const;
  std::vector<Candidate> eligible_candidates(std::uint64_t job_size) const;

  void set_lazy(NodeId id, bool lazy);
  void mark_busy(NodeId id);

  const CspRecord* find(NodeId id) const;
  std::vector<CspRecord> snapshot() const;
  std::size_t size() const { return records_.size(); }
  const SchedulerConfig& config() const { return config_; }

 private:
  CspRecord& get(NodeId id);

  SchedulerConfig config_;
  std::map<NodeId, CspRecord> records_;
  std::uint64_t next_id_ = 1;
};

/// Number of sub-jobs for a job of n items across `eligible` workers:
/// min(eligible, max_granules, ceil(n / min_granule)).
std::uint64_t granule_count(std::uint64_t n, std::size_t eligible, const SchedulerConfig& config);

/// Splits [0, n) over the leading granule_count() candidates with sizes
/// proportional to homogenized performance (largest-remainder rule, ties to
/// the lower NodeId). Ranges are contiguous in candidate order and workers
/// apportioned nothing are dropped. Throws Error{kNoEligibleWorkers} on an
/// empty candidate list.
PartitionPlan partition(std::uint64_t n, std::span<const Candidate> candidates,
                        const SchedulerConfig& config);

/// Sizes of k near-equal contiguous pieces of n, larger pieces first.
std::vector<std::uint64_t> equal_sizes(std::uint64_t n, std::uint64_t k);

/// Like partition(), but ignores performance and splits equally.
PartitionPlan partition_equal(std::uint64_t n, std::span<const Candidate> candidates,
                              const SchedulerConfig& config);

}  // namespace tda
