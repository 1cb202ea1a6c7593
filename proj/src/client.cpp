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

#include "tda/client.hpp"

#include <type_traits>

#include "tda/error.hpp"
#include "tda/workloads.hpp"

namespace tda {

Assembly::Assembly(JobId job_id, Range total) : job_id_(job_id), total_(total) {}

Assembly::Outcome Assembly::accept(Range range, Payload payload) {
  if (range.empty()) return Outcome::kEmpty;
  if (range.start < total_.start || range.end > total_.end) {
    ++overlap_violations_;
    return Outcome::kOverlap;
  }
  auto next = received_.lower_bound(range.start);
  if (next != received_.end() && next->second.first == range) {
    ++duplicates_;
    if (next->second.second != payload) ++duplicate_mismatches_;
    return Outcome::kDuplicate;
  }
  if (next != received_.end() && next->second.first.overlaps(range)) {
    ++overlap_violations_;
    return Outcome::kOverlap;
  }
  if (next != received_.begin() && std::prev(next)->second.first.overlaps(range)) {
    ++overlap_violations_;
    return Outcome::kOverlap;
  }
  received_.emplace(range.start, std::make_pair(range, std::move(payload)));
  covered_ += range.length();
  return Outcome::kInserted;
}

std::vector<Range> Assembly::missing() const {
  std::vector<Range> gaps;
  std::uint64_t at = total_.start;
  for (const auto& [start, entry] : received_) {
    if (start > at) gaps.push_back({at, start});
    at = entry.first.end;
  }
  if (at < total_.end) gaps.push_back({at, total_.end});
  return gaps;
}

std::vector<Range> Assembly::received_ranges() const {
  std::vector<Range> out;
  for (const auto& [start, entry] : received_) out.push_back(entry.first);
  return out;
}

Payload Assembly::merged() const {
  if (!complete()) throw Error(ErrorCode::kMergeError, "assembly incomplete");
  std::vector<std::pair<Range, Payload>> parts;
  parts.reserve(received_.size());
  for (const auto& [start, entry] : received_) parts.push_back(entry);
  return merge(std::move(parts), total_);
}

std::string_view to_string(ClientState s) {
  switch (s) {
    case ClientState::kIdle: return "idle";
    case ClientState::kSubmitted: return "submitted";
    case ClientState::kAccepted: return "accepted";
    case ClientState::kCompleted: return "completed";
    case ClientState::kFailed: return "failed";
    case ClientState::kTimedOut: return "timed_out";
  }
  return "?";
}

Client::Client(Address coordinator, JobSpec spec, Millis submit_delay, Millis timeout)
    : coordinator_(std::move(coordinator)), spec_(std::move(spec)), submit_delay_(submit_delay), timeout_(timeout) {}

bool Client::done() const {
  return state_ == ClientState::kCompleted || state_ == ClientState::kFailed || state_ == ClientState::kTimedOut;
}

std::optional<JobId> Client::job_id() const {
  if (!assembly_) return std::nullopt;
  return assembly_->job_id();
}

std::vector<Range> Client::missing() const {
  if (!assembly_) return {Range{0, spec_.size}};
  return assembly_->missing();
}

void Client::on_start(Context& ctx) {
  if (timeout_ > 0) ctx.set_timer(submit_delay_ + timeout_, kTimeoutTimer);
  if (submit_delay_ > 0) {
    ctx.set_timer(submit_delay_, kSubmitTimer);
  } else {
    submit(ctx);
  }
}

void Client::submit(Context& ctx) {
  submitted_at_ = ctx.now();
  state_ = ClientState::kSubmitted;
  if (!ctx.send(coordinator_, msg::JobRequest{spec_, ctx.self()})) {
    failure_ = "coordinator unreachable";
    finish(ctx, ClientState::kFailed);
  }
}

void Client::on_timer(Context& ctx, std::uint64_t tag) {
  if (tag == kSubmitTimer && state_ == ClientState::kIdle) {
    submit(ctx);
  } else if (tag == kTimeoutTimer && !done()) {
    failure_ = "timed out";
    finish(ctx, ClientState::kTimedOut);
  }
}

void Client::finish(Context& ctx, ClientState s) {
  state_ = s;
  finished_at_ = ctx.now();
  ctx.stop();
}

void Client::on_message(Context& ctx, const Address&, const Message& m) {
  if (done()) {
    if (std::holds_alternative<msg::ResultFragment>(m)) {
      ++fragments_;
      ++stale_;
    }
    return;
  }
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, msg::JobAccepted>) {
          if (state_ != ClientState::kSubmitted) return;
          state_ = ClientState::kAccepted;
          assembly_.emplace(v.job_id, Range{0, spec_.size});
          auto early = std::move(early_);
          early_.clear();
          for (const auto& f : early) {
            if (done()) break;
            if (f.job_id == v.job_id) take_fragment(ctx, f);
            else ++stale_;
          }
        } else if constexpr (std::is_same_v<T, msg::JobFailed>) {
          if (assembly_ && assembly_->job_id() != v.job_id) return;
          failure_ = v.reason;
          finish(ctx, ClientState::kFailed);
        } else if constexpr (std::is_same_v<T, msg::ResultFragment>) {
          ++fragments_;
          if (state_ == ClientState::kSubmitted) {
            early_.push_back(v);
          } else if (state_ == ClientState::kAccepted) {
            take_fragment(ctx, v);
          }
        }
      },
      m);
}

void Client::take_fragment(Context& ctx, const msg::ResultFragment& f) {
  if (f.job_id != assembly_->job_id()) {
    ++stale_;
    return;
  }
  assembly_->accept(f.range, f.payload);
  if (assembly_->complete()) {
    result_ = assembly_->merged();
    finish(ctx, ClientState::kCompleted);
  }
}

}  // namespace tda
