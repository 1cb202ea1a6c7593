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

// Deterministic discrete-event transport. Nodes run unmodified against a
// logical millisecond clock; every message is framed and decoded exactly
// as on the wire. Identical configuration and nodes give an identical
// trace.

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "tda/protocol.hpp"
#include "tda/runtime.hpp"

namespace tda {

enum class FaultKind {
  kCrash,               // silent stop: no further sends, receives or timers
  kCrashAfterFragment,  // arms a crash that fires right after the node's next ResultFragment send
  kLoadSet,             // sets the node's injected load
};

struct Fault {
  Millis time = 0;
  Address node;
  FaultKind kind = FaultKind::kCrash;
  double value = 0;  // load for kLoadSet
};

struct SimConfig {
  Millis default_latency = 0;
  std::map<std::pair<Address, Address>, Millis> latency;  // symmetric overrides
  std::map<Address, double> service_rate;                 // items per ms; default 1
  Millis per_subjob_overhead = 0;
  std::vector<Fault> faults;
  std::uint64_t seed = 0;

  Millis latency_between(const Address& a, const Address& b) const;
  double rate_of(const Address& node) const;
  /// Throws Error{kConfigError} on negative latency or non-positive rate.
  void validate() const;
};

/// One message handed to the simulated network.
struct SentRecord {
  Millis time = 0;
  Address from;
  Address to;
  Message message;
};

class Simulator {
 public:
  explicit Simulator(SimConfig config);
  ~Simulator();
  Simulator(const Simulator&) = delete;
  Simulator& operator=(const Simulator&) = delete;

  /// The node must outlive the simulator. Throws Error{kConfigError} when
  /// the name is taken.
  void add_node(const Address& name, Node& node, Millis start_at = 0);

  /// Injected load for a node, moved by kLoadSet faults. Created on first
  /// use, so it may be fetched before the node is added.
  std::shared_ptr<double> load_cell(const Address& node);

  /// Processes events until `until()` holds after an event, the queue
  /// drains, or the clock would pass `horizon`. Fault nodes must exist.
  void run(const std::function<bool()>& until, Millis horizon);

  /// Called after every processed event; a returned string is recorded as
  /// an invariant violation.
  void add_invariant(std::function<std::optional<std::string>()> check);

  Millis now() const { return now_; }
  const std::vector<std::string>& trace() const { return trace_; }
  const std::vector<SentRecord>& sent() const { return sent_; }
  const std::vector<std::string>& violations() const { return violations_; }
  bool crashed(const Address& node) const;
  bool stopped(const Address& node) const;

  /// Busy time a node spent executing items of job.
  Millis busy_time(const Address& node, JobId job) const;
  Millis max_busy_time(JobId job) const;

 private:
  class NodeContext;
  enum class EventKind { kStart, kDeliver, kTimer, kFault };
  struct Event {
    Millis time = 0;
    std::uint64_t seq = 0;
    EventKind kind = EventKind::kStart;
    Address target;
    Address from;
    std::shared_ptr<const std::vector<std::uint8_t>> frame;
    std::uint64_t tag = 0;
    TimerId timer = 0;
    std::size_t fault = 0;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const;
  };
  struct Slot;

  void push(Event e);
  void dispatch(const Event& e);
  void record(std::string line);
  bool send_from(const Address& from, const Address& to, const Message& m);

  SimConfig config_;
  Millis now_ = 0;
  std::uint64_t seq_ = 0;
  TimerId next_timer_ = 1;
  std::map<Address, std::unique_ptr<Slot>> nodes_;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  std::unordered_set<TimerId> cancelled_;
  std::vector<std::string> trace_;
  std::vector<SentRecord> sent_;
  std::vector<std::string> violations_;
  std::vector<std::function<std::optional<std::string>()>> invariants_;
  std::map<std::pair<Address, JobId>, Millis> busy_;
  std::map<Address, std::shared_ptr<double>> loads_;
  bool faults_scheduled_ = false;
};

}  // namespace tda
