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
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tda/config.hpp"
#include "tda/protocol.hpp"
#include "tda/registry.hpp"
#include "tda/runtime.hpp"

namespace tda {

/// Receives one JSON object per line, without the trailing newline.
using EventSink = std::function<void(const std::string&)>;

enum class SubJobPhase { kAssigned, kRunning, kCompleted, kOrphaned };

std::string_view to_string(SubJobPhase p);

struct SubJobState {
  JobId job_id = 0;
  SubId sub_id = 0;
  NodeId assigned_to;
  Range range;
  SubJobPhase phase = SubJobPhase::kAssigned;
  std::optional<ProgressMarker> progress;
};

struct JobState {
  JobId job_id = 0;
  Address client_address;  // where workers deliver fragments
  Address reply_to;        // where JobAccepted / JobFailed go
  JobSpec spec;
  Range total_range;
  std::vector<SubJobState> subjobs;  // indexed by sub_id
  std::vector<Range> covered;
  std::set<NodeId> rejected_by;
};

/// The server role. Owns the registry and every JobState; all mutation
/// happens on the thread that delivers events to it.
class Coordinator : public Node {
 public:
  static constexpr std::uint64_t kProbeTimer = 1;

  explicit Coordinator(TdaConfig config, EventSink log = {});

  /// Nodes whose ids appear here are marked lazy as they register.
  void set_lazy_ids(std::vector<NodeId> ids);

  void on_start(Context& ctx) override;
  void on_message(Context& ctx, const Address& from, const Message& m) override;
  void on_timer(Context& ctx, std::uint64_t tag) override;

  NodeId handle_register(Context& ctx, const Address& from, const msg::Register& m);

  /// Partitions the job from the registry snapshot alone, sends one
  /// SubJobAssign per chosen worker and answers the requester. Returns the
  /// reply that was sent (JobAccepted or JobFailed).
  Message handle_job_request(Context& ctx, const Address& from, const msg::JobRequest& m);

  /// Returns the reply sent (RefusalGrant or RefusalDeny), or nullopt for a
  /// stale request or a protocol violation (the peer is then disconnected).
  std::optional<Message> handle_refusal_request(Context& ctx, const Address& from,
                                                const msg::RefusalRequest& m);

  /// Orphans and reassigns every unfinished sub-job of a dead node. Returns
  /// the replacement sub-jobs. Jobs with no remaining eligible worker fail.
  std::vector<SubJobState> handle_death(Context& ctx, NodeId id);

  /// Sends a Probe with a fresh nonce to every non-Dead worker.
  std::vector<std::pair<NodeId, msg::Probe>> probe_tick(Context& ctx);

  const Registry& registry() const { return registry_; }
  Registry& registry() { return registry_; }
  const std::map<JobId, JobState>& jobs() const { return jobs_; }
  std::optional<NodeId> node_at(const Address& a) const;

  /// Checks that the completed and live sub-jobs of every open job tile its
  /// range exactly. Returns a description of the first violation.
  std::optional<std::string> check_coverage() const;

 private:
  struct PendingProbe {
    NodeId node;
    Millis sent_at = 0;
  };

  SubJobState& assign(Context& ctx, JobState& job, NodeId node, Range range, const char* cause);
  SubJobState* find_subjob(JobId job, SubId sub);
  void fail_job(Context& ctx, JobId job, const std::string& reason);
  bool reassign(Context& ctx, JobState& job, SubJobState& orphan, const char* cause);
  void on_subjob_complete(Context& ctx, const Address& from, const msg::SubJobComplete& m);
  void on_subjob_reject(Context& ctx, const Address& from, const msg::SubJobReject& m);
  void on_probe_echo(Context& ctx, const msg::ProbeEcho& m);
  void maybe_finish(Context& ctx, JobId job);

  TdaConfig config_;
  EventSink sink_;
  Registry registry_;
  std::map<JobId, JobState> jobs_;
  std::unordered_map<Address, NodeId> by_address_;
  std::set<NodeId> lazy_ids_;
  std::map<std::uint64_t, PendingProbe> probes_;
  JobId next_job_ = 1;
  std::uint64_t next_nonce_ = 1;
};

}  // namespace tda
