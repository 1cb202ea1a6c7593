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
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tda/protocol.hpp"
#include "tda/runtime.hpp"

namespace tda {

/// Collects fragments for one job. Completion is decided by range
/// coverage, never by fragment count.
class Assembly {
 public:
  enum class Outcome { kInserted, kDuplicate, kOverlap, kEmpty };

  Assembly(JobId job_id, Range total);

  /// An exact repeat of a received range is dropped (first arrival wins);
  /// any other overlap is rejected and counted as a violation.
  Outcome accept(Range range, Payload payload);

  JobId job_id() const { return job_id_; }
  Range total() const { return total_; }
  bool complete() const { return covered_ == total_.length(); }
  std::vector<Range> missing() const;
  std::vector<Range> received_ranges() const;

  /// Throws Error{kMergeError} unless complete().
  Payload merged() const;

  std::uint64_t duplicates() const { return duplicates_; }
  /// Duplicates whose payload differed from the first arrival.
  std::uint64_t duplicate_mismatches() const { return duplicate_mismatches_; }
  std::uint64_t overlap_violations() const { return overlap_violations_; }

 private:
  JobId job_id_;
  Range total_;
  std::map<std::uint64_t, std::pair<Range, Payload>> received_;  // by start
  std::uint64_t covered_ = 0;
  std::uint64_t duplicates_ = 0;
  std::uint64_t duplicate_mismatches_ = 0;
  std::uint64_t overlap_violations_ = 0;
};

enum class ClientState { kIdle, kSubmitted, kAccepted, kCompleted, kFailed, kTimedOut };

std::string_view to_string(ClientState s);

/// The requesting host: submits one job carrying its own address, then
/// assembles the fragments workers send it directly.
class Client : public Node {
 public:
  static constexpr std::uint64_t kSubmitTimer = 1;
  static constexpr std::uint64_t kTimeoutTimer = 2;

  /// submit_delay postpones the request; timeout 0 waits forever.
  Client(Address coordinator, JobSpec spec, Millis submit_delay = 0, Millis timeout = 0);

  void on_start(Context& ctx) override;
  void on_message(Context& ctx, const Address& from, const Message& m) override;
  void on_timer(Context& ctx, std::uint64_t tag) override;

  ClientState state() const { return state_; }
  bool done() const;
  std::optional<JobId> job_id() const;
  const std::optional<Payload>& result() const { return result_; }
  const std::string& failure_reason() const { return failure_; }
  std::vector<Range> missing() const;
  const std::optional<Assembly>& assembly() const { return assembly_; }
  Millis submitted_at() const { return submitted_at_; }
  Millis finished_at() const { return finished_at_; }
  std::uint64_t fragments_received() const { return fragments_; }
  std::uint64_t stale_fragments() const { return stale_; }

 private:
  void submit(Context& ctx);
  void take_fragment(Context& ctx, const msg::ResultFragment& f);
  void finish(Context& ctx, ClientState s);

  Address coordinator_;
  JobSpec spec_;
  Millis submit_delay_;
  Millis timeout_;
  ClientState state_ = ClientState::kIdle;
  std::optional<Assembly> assembly_;
  std::vector<msg::ResultFragment> early_;  // fragments that beat JobAccepted
  std::optional<Payload> result_;
  std::string failure_;
  Millis submitted_at_ = 0;
  Millis finished_at_ = 0;
  std::uint64_t fragments_ = 0;
  std::uint64_t stale_ = 0;
};

}  // namespace tda
