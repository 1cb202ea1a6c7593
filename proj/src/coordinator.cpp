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

#include "tda/coordinator.hpp"

#include <algorithm>
#include <type_traits>

#include "json.hpp"
#include "tda/error.hpp"

namespace tda {

using json = nlohmann::json;

namespace {

void emit(const EventSink& sink, Context& ctx, const char* event, json fields) {
  if (!sink) return;
  fields["t"] = ctx.now();
  fields["event"] = event;
  sink(fields.dump());
}

json range_json(const Range& r) { return json::array({r.start, r.end}); }

}  // namespace

std::string_view to_string(SubJobPhase p) {
  switch (p) {
    case SubJobPhase::kAssigned: return "assigned";
    case SubJobPhase::kRunning: return "running";
    case SubJobPhase::kCompleted: return "completed";
    case SubJobPhase::kOrphaned: return "orphaned";
  }
  return "?";
}

Coordinator::Coordinator(TdaConfig config, EventSink log)
    : config_(config), sink_(std::move(log)), registry_(config.scheduler) {}

void Coordinator::set_lazy_ids(std::vector<NodeId> ids) {
  lazy_ids_ = std::set<NodeId>(ids.begin(), ids.end());
  for (NodeId id : lazy_ids_) {
    if (registry_.find(id)) registry_.set_lazy(id, true);
  }
}

std::optional<NodeId> Coordinator::node_at(const Address& a) const {
  auto it = by_address_.find(a);
  if (it == by_address_.end()) return std::nullopt;
  return it->second;
}

void Coordinator::on_start(Context& ctx) {
  ctx.set_timer(config_.scheduler.probe_period, kProbeTimer);
}

void Coordinator::on_timer(Context& ctx, std::uint64_t tag) {
  if (tag != kProbeTimer) return;
  for (NodeId dead : registry_.sweep_dead(ctx.now())) {
    emit(sink_, ctx, "death", {{"node", dead.value}});
    handle_death(ctx, dead);
  }
  probe_tick(ctx);
  ctx.set_timer(config_.scheduler.probe_period, kProbeTimer);
}

void Coordinator::on_message(Context& ctx, const Address& from, const Message& m) {
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, msg::Register>) {
          try {
            handle_register(ctx, from, v);
          } catch (const Error& e) {
            emit(sink_, ctx, "register_rejected", {{"from", from}, {"reason", e.what()}});
          }
        } else if constexpr (std::is_same_v<T, msg::Heartbeat>) {
          if (!registry_.find(v.node_id)) return;
          auto before = registry_.find(v.node_id)->status;
          registry_.record_heartbeat(v.node_id, v.load, ctx.now());
          auto after = registry_.find(v.node_id)->status;
          if (before != after) {
            emit(sink_, ctx, "status", {{"node", v.node_id.value},
                                        {"from", to_string(before)},
                                        {"to", to_string(after)}});
          }
        } else if constexpr (std::is_same_v<T, msg::ProbeEcho>) {
          on_probe_echo(ctx, v);
        } else if constexpr (std::is_same_v<T, msg::JobRequest>) {
          handle_job_request(ctx, from, v);
        } else if constexpr (std::is_same_v<T, msg::SubJobAccept>) {
          if (SubJobState* s = find_subjob(v.job_id, v.sub_id); s && s->phase == SubJobPhase::kAssigned)
            s->phase = SubJobPhase::kRunning;
        } else if constexpr (std::is_same_v<T, msg::SubJobComplete>) {
          on_subjob_complete(ctx, from, v);
        } else if constexpr (std::is_same_v<T, msg::SubJobReject>) {
          on_subjob_reject(ctx, from, v);
        } else if constexpr (std::is_same_v<T, msg::RefusalRequest>) {
          handle_refusal_request(ctx, from, v);
        } else {
          emit(sink_, ctx, "unexpected", {{"from", from}, {"type", type_name(m)}});
        }
      },
      m);
}

NodeId Coordinator::handle_register(Context& ctx, const Address& from, const msg::Register& m) {
  NodeId id;
  if (auto known = node_at(from)) {
    id = *known;
    registry_.refresh(id, m.perf_param, ctx.now());
  } else {
    id = registry_.register_node(m.perf_param, from, ctx.now());
    by_address_[from] = id;
  }
  if (lazy_ids_.count(id)) registry_.set_lazy(id, true);
  emit(sink_, ctx, "register", {{"node", id.value}, {"perf", m.perf_param}, {"address", from}});
  ctx.send(from, msg::RegisterAck{id});
  // Measure the communication distance straight away.
  std::uint64_t nonce = next_nonce_++;
  probes_[nonce] = {id, ctx.now()};
  ctx.send(from, msg::Probe{nonce});
  return id;
}

SubJobState& Coordinator::assign(Context& ctx, JobState& job, NodeId node, Range range, const char* cause) {
  SubJobState s;
  s.job_id = job.job_id;
  s.sub_id = static_cast<SubId>(job.subjobs.size());
  s.assigned_to = node;
  s.range = range;
  job.subjobs.push_back(s);
  const CspRecord* rec = registry_.find(node);
  emit(sink_, ctx, cause, {{"job", job.job_id}, {"sub", s.sub_id}, {"node", node.value}, {"range", range_json(range)}});
  ctx.send(rec->address, msg::SubJobAssign{job.job_id, s.sub_id, job.spec.workload, range, job.client_address});
  return job.subjobs.back();
}

SubJobState* Coordinator::find_subjob(JobId job, SubId sub) {
  auto it = jobs_.find(job);
  if (it == jobs_.end() || sub >= it->second.subjobs.size()) return nullptr;
  return &it->second.subjobs[sub];
}

Message Coordinator::handle_job_request(Context& ctx, const Address& from, const msg::JobRequest& m) {
  JobId id = next_job_++;
  auto fail = [&](const std::string& reason) -> Message {
    emit(sink_, ctx, "job_failed", {{"job", id}, {"reason", reason}});
    msg::JobFailed reply{id, reason};
    ctx.send(from, reply);
    return reply;
  };
  const JobSpec& spec = m.job_spec;
  if (spec.size == 0) return fail("empty job");
  if (const auto* mm = std::get_if<MatMulSpec>(&spec.workload)) {
    if (mm->a.cols != mm->b.rows || mm->a.rows != spec.size) return fail("invalid matmul spec");
  }

  std::vector<Candidate> candidates = registry_.eligible_candidates(spec.size);
  if (candidates.empty()) return fail("no eligible workers");
  PartitionPlan plan = config_.scheduler.policy == PartitionPolicy::kEqual
                           ? partition_equal(spec.size, candidates, config_.scheduler)
                           : partition(spec.size, candidates, config_.scheduler);

  JobState& job = jobs_[id];
  job.job_id = id;
  job.client_address = m.client_address;
  job.reply_to = from;
  job.spec = spec;
  job.total_range = Range{0, spec.size};
  emit(sink_, ctx, "job_accepted", {{"job", id}, {"size", spec.size}, {"client", m.client_address}});
  msg::JobAccepted reply{id};
  ctx.send(from, reply);
  for (const Assignment& a : plan.assignments) assign(ctx, job, a.node_id, a.range, "assign");
  return reply;
}

std::optional<Message> Coordinator::handle_refusal_request(Context& ctx, const Address& from,
                                                           const msg::RefusalRequest& m) {
  auto refuser = node_at(from);
  SubJobState* sub = find_subjob(m.job_id, m.sub_id);
  if (!refuser || !sub || sub->assigned_to != *refuser ||
      (sub->phase != SubJobPhase::kAssigned && sub->phase != SubJobPhase::kRunning)) {
    emit(sink_, ctx, "refusal_stale", {{"job", m.job_id}, {"sub", m.sub_id}, {"from", from}});
    return std::nullopt;
  }
  const std::uint64_t pos = m.progress_marker.position;
  if (pos < sub->range.start || pos > sub->range.end) {
    emit(sink_, ctx, "protocol_violation", {{"job", m.job_id}, {"sub", m.sub_id}, {"from", from}, {"position", pos}});
    ctx.disconnect(from);
    return std::nullopt;
  }
  sub->progress = m.progress_marker;
  const Range remainder{pos, sub->range.end};

  if (remainder.empty()) {
    emit(sink_, ctx, "refusal_grant", {{"job", m.job_id}, {"sub", m.sub_id}, {"node", refuser->value}, {"position", pos}});
    msg::RefusalGrant grant{m.job_id, m.sub_id};
    ctx.send(from, grant);
    return grant;
  }

  // A refusal means the refuser's load is over the busy threshold, even if
  // its last heartbeat said otherwise. Only a strictly better peer helps.
  const CspRecord* rec = registry_.find(*refuser);
  const double refuser_h =
      rec ? std::min(rec->homogenized_perf, rec->perf_param * (1.0 - config_.worker.busy_threshold)) : 0.0;

  // Least busy peer: highest homogenized performance, lowest id on ties.
  std::optional<Candidate> target;
  for (const Candidate& c : registry_.eligible_candidates(remainder.length())) {
    if (c.node_id == *refuser || c.homogenized_perf <= refuser_h) continue;
    if (!target || c.homogenized_perf > target->homogenized_perf ||
        (c.homogenized_perf == target->homogenized_perf && c.node_id < target->node_id))
      target = c;
  }
  if (!target) {
    registry_.mark_busy(*refuser);
    emit(sink_, ctx, "refusal_deny", {{"job", m.job_id}, {"sub", m.sub_id}, {"node", refuser->value}, {"position", pos}});
    msg::RefusalDeny deny{m.job_id, m.sub_id};
    ctx.send(from, deny);
    return deny;
  }

  sub->range.end = pos;
  emit(sink_, ctx, "refusal_grant", {{"job", m.job_id}, {"sub", m.sub_id}, {"node", refuser->value},
                                     {"position", pos}, {"to", target->node_id.value}});
  msg::RefusalGrant grant{m.job_id, m.sub_id};
  ctx.send(from, grant);
  JobState& job = jobs_.at(m.job_id);  // `sub` may dangle after assign()
  assign(ctx, job, target->node_id, remainder, "handoff");
  return grant;
}

bool Coordinator::reassign(Context& ctx, JobState& job, SubJobState& orphan, const char* cause) {
  orphan.phase = SubJobPhase::kOrphaned;
  const Range range = orphan.range;
  const SubId old_sub = orphan.sub_id;
  for (const Candidate& c : registry_.eligible_candidates(range.length())) {
    if (job.rejected_by.count(c.node_id)) continue;
    SubJobState& fresh = assign(ctx, job, c.node_id, range, "reassign");
    emit(sink_, ctx, "reassign_cause", {{"job", job.job_id}, {"from_sub", old_sub}, {"sub", fresh.sub_id}, {"cause", cause}});
    return true;
  }
  return false;
}

std::vector<SubJobState> Coordinator::handle_death(Context& ctx, NodeId id) {
  std::vector<SubJobState> replaced;
  std::vector<JobId> failed;
  for (auto& [job_id, job] : jobs_) {
    // Index loop: assign() appends to job.subjobs.
    const std::size_t n = job.subjobs.size();
    for (std::size_t i = 0; i < n; ++i) {
      if (job.subjobs[i].assigned_to != id) continue;
      SubJobPhase phase = job.subjobs[i].phase;
      if (phase == SubJobPhase::kCompleted || phase == SubJobPhase::kOrphaned) continue;
      if (!reassign(ctx, job, job.subjobs[i], "death")) {
        failed.push_back(job_id);
        break;
      }
      replaced.push_back(job.subjobs.back());
    }
  }
  for (JobId j : failed) fail_job(ctx, j, "no eligible workers after worker death");
  return replaced;
}

void Coordinator::fail_job(Context& ctx, JobId job, const std::string& reason) {
  auto it = jobs_.find(job);
  if (it == jobs_.end()) return;
  emit(sink_, ctx, "job_failed", {{"job", job}, {"reason", reason}});
  ctx.send(it->second.reply_to, msg::JobFailed{job, reason});
  jobs_.erase(it);
}

void Coordinator::on_subjob_complete(Context& ctx, const Address& from, const msg::SubJobComplete& m) {
  SubJobState* sub = find_subjob(m.job_id, m.sub_id);
  auto node = node_at(from);
  if (!sub || !node || sub->assigned_to != *node ||
      sub->phase == SubJobPhase::kCompleted || sub->phase == SubJobPhase::kOrphaned) {
    emit(sink_, ctx, "complete_stale", {{"job", m.job_id}, {"sub", m.sub_id}});
    return;
  }
  if (m.range != sub->range) {
    emit(sink_, ctx, "protocol_violation", {{"job", m.job_id}, {"sub", m.sub_id}, {"from", from},
                                            {"range", range_json(m.range)}});
    return;
  }
  sub->phase = SubJobPhase::kCompleted;
  JobState& job = jobs_.at(m.job_id);
  if (!m.range.empty()) job.covered.push_back(m.range);
  emit(sink_, ctx, "subjob_complete", {{"job", m.job_id}, {"sub", m.sub_id}, {"node", node->value},
                                       {"range", range_json(m.range)}});
  maybe_finish(ctx, m.job_id);
}

void Coordinator::on_subjob_reject(Context& ctx, const Address& from, const msg::SubJobReject& m) {
  SubJobState* sub = find_subjob(m.job_id, m.sub_id);
  auto node = node_at(from);
  if (!sub || !node || sub->assigned_to != *node ||
      sub->phase == SubJobPhase::kCompleted || sub->phase == SubJobPhase::kOrphaned)
    return;
  JobState& job = jobs_.at(m.job_id);
  job.rejected_by.insert(*node);
  emit(sink_, ctx, "subjob_reject", {{"job", m.job_id}, {"sub", m.sub_id}, {"node", node->value}, {"reason", m.reason}});
  if (!reassign(ctx, job, *sub, "reject")) fail_job(ctx, m.job_id, "sub-job rejected: " + m.reason);
}

void Coordinator::maybe_finish(Context& ctx, JobId id) {
  JobState& job = jobs_.at(id);
  std::uint64_t covered = 0;
  for (const Range& r : job.covered) covered += r.length();
  if (covered != job.total_range.length()) return;
  emit(sink_, ctx, "job_complete", {{"job", id}});
  jobs_.erase(id);
}

std::vector<std::pair<NodeId, msg::Probe>> Coordinator::probe_tick(Context& ctx) {
  const Millis now = ctx.now();
  std::erase_if(probes_, [&](const auto& kv) {
    return now - kv.second.sent_at > config_.scheduler.heartbeat_timeout;
  });
  std::vector<std::pair<NodeId, msg::Probe>> sent;
  for (const CspRecord& r : registry_.snapshot()) {
    if (r.status == NodeStatus::kDead) continue;
    msg::Probe p{next_nonce_++};
    probes_[p.nonce] = {r.node_id, now};
    ctx.send(r.address, p);
    sent.emplace_back(r.node_id, p);
  }
  return sent;
}

void Coordinator::on_probe_echo(Context& ctx, const msg::ProbeEcho& m) {
  auto it = probes_.find(m.nonce);
  if (it == probes_.end()) return;
  PendingProbe p = it->second;
  probes_.erase(it);
  if (!registry_.find(p.node)) return;
  registry_.record_probe_echo(p.node, ctx.now() - p.sent_at, ctx.now());
}

std::optional<std::string> Coordinator::check_coverage() const {
  for (const auto& [id, job] : jobs_) {
    std::vector<Range> ranges;
    for (const SubJobState& s : job.subjobs) {
      if (s.phase != SubJobPhase::kOrphaned && !s.range.empty()) ranges.push_back(s.range);
    }
    std::sort(ranges.begin(), ranges.end());
    std::uint64_t at = job.total_range.start;
    for (const Range& r : ranges) {
      if (r.start != at) {
        return "job " + std::to_string(id) + ": " + (r.start < at ? "overlap" : "gap") + " at " + to_string(r);
      }
      at = r.end;
    }
    if (at != job.total_range.end) return "job " + std::to_string(id) + ": uncovered tail from " + std::to_string(at);
  }
  return std::nullopt;
}

}  // namespace tda
