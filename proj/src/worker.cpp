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

#include "tda/worker.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <thread>
#include <type_traits>

#include "tda/error.hpp"

namespace tda {

LoadSource LoadSource::scripted(std::vector<double> values) {
  auto state = std::make_shared<std::pair<std::vector<double>, std::size_t>>(std::move(values), 0);
  return LoadSource([state]() -> std::optional<double> {
    auto& [vals, next] = *state;
    if (vals.empty()) return std::nullopt;
    double v = vals[std::min(next, vals.size() - 1)];
    if (next < vals.size()) ++next;
    return v;
  });
}

LoadSource LoadSource::script_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kConfigError, "cannot open load script " + path);
  std::vector<double> values;
  double v = 0;
  while (in >> v) values.push_back(v);
  if (!in.eof()) throw Error(ErrorCode::kConfigError, "bad value in load script " + path);
  return scripted(std::move(values));
}

LoadSource LoadSource::sampled() {
  return LoadSource([]() -> std::optional<double> {
    std::ifstream in("/proc/loadavg");
    double one_minute = 0;
    if (!(in >> one_minute)) return std::nullopt;
    unsigned cpus = std::max(1u, std::thread::hardware_concurrency());
    return one_minute / cpus;
  });
}

LoadSource LoadSource::from_sampler(Sampler sampler) { return LoadSource(std::move(sampler)); }

double LoadSource::measure() {
  std::optional<double> raw = sampler_ ? sampler_() : std::nullopt;
  if (raw && std::isfinite(*raw)) last_ = std::clamp(*raw, 0.0, 1.0);
  return last_;
}

Worker::Worker(Address coordinator, double perf_param, LoadSource load, WorkerConfig config,
               std::shared_ptr<const RecordTable> table)
    : coordinator_(std::move(coordinator)),
      perf_param_(perf_param),
      load_(std::move(load)),
      config_(config),
      table_(std::move(table)) {
  config_.validate();
}

void Worker::on_start(Context& ctx) { try_register(ctx); }

void Worker::try_register(Context& ctx) {
  ++stats_.register_attempts;
  ctx.send(coordinator_, msg::Register{perf_param_});
  // Re-sent after the backoff unless a RegisterAck cancels the timer first.
  register_timer_ = ctx.set_timer(backoff_, kRegisterTimer);
}

void Worker::on_peer_lost(Context& ctx, const Address& peer) {
  if (peer != coordinator_) return;
  node_id_.reset();
  if (heartbeat_timer_) ctx.cancel_timer(*heartbeat_timer_);
  if (chunk_timer_) ctx.cancel_timer(*chunk_timer_);
  heartbeat_timer_.reset();
  chunk_timer_.reset();
  queue_.clear();
  running_ = false;
  if (!register_timer_) {
    backoff_ = kBackoffBase;
    register_timer_ = ctx.set_timer(backoff_, kRegisterTimer);
  }
}

void Worker::on_timer(Context& ctx, std::uint64_t tag) {
  switch (tag) {
    case kRegisterTimer:
      register_timer_.reset();
      if (node_id_) return;
      backoff_ = std::min(backoff_ * 2, kBackoffCap);
      try_register(ctx);
      return;
    case kHeartbeatTimer: {
      heartbeat_timer_.reset();
      if (!node_id_) return;
      double load = load_.measure();
      ++stats_.heartbeats;
      ctx.send(coordinator_, msg::Heartbeat{*node_id_, load});
      if (load <= config_.busy_threshold && !queue_.empty()) queue_.front().refusal_suppressed = false;
      heartbeat_timer_ = ctx.set_timer(config_.heartbeat_period, kHeartbeatTimer);
      return;
    }
    case kChunkTimer:
      chunk_timer_.reset();
      run_chunk(ctx);
      return;
    default:
      return;
  }
}

void Worker::on_message(Context& ctx, const Address& from, const Message& m) {
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, msg::Probe>) {
          ++stats_.echoes;
          ctx.send(from, msg::ProbeEcho{v.nonce});
        } else if constexpr (std::is_same_v<T, msg::RegisterAck>) {
          if (node_id_) return;
          node_id_ = v.node_id;
          backoff_ = kBackoffBase;
          if (register_timer_) ctx.cancel_timer(*register_timer_);
          register_timer_.reset();
          ++stats_.heartbeats;
          ctx.send(coordinator_, msg::Heartbeat{*node_id_, load_.measure()});
          heartbeat_timer_ = ctx.set_timer(config_.heartbeat_period, kHeartbeatTimer);
        } else if constexpr (std::is_same_v<T, msg::SubJobAssign>) {
          on_assign(ctx, v);
        } else if constexpr (std::is_same_v<T, msg::RefusalGrant> || std::is_same_v<T, msg::RefusalDeny>) {
          if (queue_.empty()) return;
          Task& t = queue_.front();
          if (!t.refusal_pending || t.assign.job_id != v.job_id || t.assign.sub_id != v.sub_id) return;
          t.refusal_pending = false;
          if constexpr (std::is_same_v<T, msg::RefusalGrant>) {
            finish_front(ctx, Range{t.assign.range.start, t.position});
          } else {
            t.refusal_suppressed = true;
            schedule_chunk(ctx, 0);
          }
        }
      },
      m);
}

bool Worker::supports(const msg::SubJobAssign& m) const {
  if (const auto* mm = std::get_if<MatMulSpec>(&m.workload_spec)) {
    return mm->a.cols == mm->b.rows && m.range.end <= mm->a.rows &&
           mm->a.data.size() == mm->a.rows * mm->a.cols && mm->b.data.size() == mm->b.rows * mm->b.cols;
  }
  return table_ != nullptr && m.range.end <= table_->size();
}

void Worker::on_assign(Context& ctx, const msg::SubJobAssign& m) {
  if (!supports(m)) {
    ++stats_.rejects;
    ctx.send(coordinator_, msg::SubJobReject{m.job_id, m.sub_id, "unsupported workload"});
    return;
  }
  ctx.send(coordinator_, msg::SubJobAccept{m.job_id, m.sub_id});
  Task t;
  t.assign = m;
  t.position = m.range.start;
  t.partial = empty_payload(m.workload_spec);
  queue_.push_back(std::move(t));
  if (!running_) start_next(ctx);
}

void Worker::start_next(Context& ctx) {
  running_ = !queue_.empty();
  if (!running_) return;
  schedule_chunk(ctx, ctx.assignment_overhead());
}

void Worker::schedule_chunk(Context& ctx, Millis extra_delay) {
  const Task& t = queue_.front();
  std::uint64_t items = std::min(config_.chunk_size, t.assign.range.end - t.position);
  Millis delay = extra_delay + ctx.work_cost(t.assign.job_id, items);
  chunk_timer_ = ctx.set_timer(delay, kChunkTimer);
}

void Worker::run_chunk(Context& ctx) {
  if (queue_.empty()) return;
  Task& t = queue_.front();
  const Range chunk{t.position, std::min(t.position + config_.chunk_size, t.assign.range.end)};
  if (!chunk.empty()) append_payload(t.partial, execute_range(t.assign.workload_spec, table_.get(), chunk));
  t.position = chunk.end;
  if (t.position == t.assign.range.end) {
    finish_front(ctx, t.assign.range);
    return;
  }
  if (!t.refusal_suppressed && load_.measure() > config_.busy_threshold) {
    t.refusal_pending = true;
    ++stats_.refusals;
    ctx.send(coordinator_, msg::RefusalRequest{t.assign.job_id, t.assign.sub_id,
                                               ProgressMarker{t.position, payload_digest(t.partial)}});
    return;
  }
  schedule_chunk(ctx, 0);
}

void Worker::finish_front(Context& ctx, Range delivered) {
  Task t = std::move(queue_.front());
  queue_.pop_front();
  const msg::SubJobAssign& a = t.assign;
  bool ok = true;
  if (!delivered.empty()) {
    Message fragment = msg::ResultFragment{a.job_id, a.sub_id, delivered, std::move(t.partial)};
    ok = false;
    for (int attempt = 0; attempt <= kDeliveryRetries && !ok; ++attempt) ok = ctx.send(a.client_address, fragment);
    if (ok) ++stats_.fragments;
  }
  if (ok) {
    ctx.send(coordinator_, msg::SubJobComplete{a.job_id, a.sub_id, delivered});
  } else {
    ++stats_.rejects;
    ctx.send(coordinator_, msg::SubJobReject{a.job_id, a.sub_id, "client unreachable"});
  }
  start_next(ctx);
}

}  // namespace tda
