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

#include "tda/registry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/multiprecision/cpp_int.hpp>

#include "tda/error.hpp"

namespace tda {

using boost::multiprecision::cpp_int;

std::string_view to_string(NodeStatus s) {
  switch (s) {
    case NodeStatus::kIdle: return "idle";
    case NodeStatus::kBusy: return "busy";
    case NodeStatus::kDead: return "dead";
  }
  return "?";
}

Registry::Registry(SchedulerConfig config) : config_(config) { config_.validate(); }

NodeId Registry::register_node(double perf_param, Address address, Millis now) {
  if (!(perf_param > 0) || !std::isfinite(perf_param))
    throw Error(ErrorCode::kInvalidRegistration, "perf_param must be positive");
  NodeId id{next_id_++};
  CspRecord r;
  r.node_id = id;
  r.address = std::move(address);
  r.perf_param = perf_param;
  r.homogenized_perf = perf_param;
  r.last_seen = now;
  records_.emplace(id, std::move(r));
  return id;
}

void Registry::refresh(NodeId id, double perf_param, Millis now) {
  if (!(perf_param > 0) || !std::isfinite(perf_param))
    throw Error(ErrorCode::kInvalidRegistration, "perf_param must be positive");
  CspRecord& r = get(id);
  r.perf_param = perf_param;
  r.last_load = 0;
  r.homogenized_perf = perf_param;
  r.status = NodeStatus::kIdle;
  r.last_seen = now;
}

CspRecord& Registry::get(NodeId id) {
  auto it = records_.find(id);
  if (it == records_.end()) throw Error(ErrorCode::kUnknownNode, "node " + std::to_string(id.value));
  return it->second;
}

const CspRecord* Registry::find(NodeId id) const {
  auto it = records_.find(id);
  return it == records_.end() ? nullptr : &it->second;
}

double Registry::record_heartbeat(NodeId id, double load, Millis now) {
  CspRecord& r = get(id);
  if (!(load >= 0.0 && load <= 1.0))
    throw Error(ErrorCode::kProtocolViolation, "load outside [0,1]");
  if (r.status == NodeStatus::kDead) {
    r.status = NodeStatus::kIdle;
  } else if (r.status == NodeStatus::kBusy && load < r.busy_mark_load) {
    r.status = NodeStatus::kIdle;
  }
  r.last_load = load;
  r.last_seen = now;
  r.homogenized_perf = r.perf_param * (1.0 - load);
  return r.homogenized_perf;
}

Millis Registry::record_probe_echo(NodeId id, Millis rtt, Millis now) {
  CspRecord& r = get(id);
  if (r.rtt_ewma) {
    r.rtt_ewma = (1.0 - config_.ewma_alpha) * *r.rtt_ewma + config_.ewma_alpha * rtt;
  } else {
    r.rtt_ewma = rtt;
  }
  r.last_seen = now;
  return *r.rtt_ewma;
}

std::vector<NodeId> Registry::sweep_dead(Millis now) {
  std::vector<NodeId> dead;
  for (auto& [id, r] : records_) {
    if (r.status != NodeStatus::kDead && now - r.last_seen > config_.heartbeat_timeout) {
      r.status = NodeStatus::kDead;
      dead.push_back(id);
    }
  }
  return dead;
}

std::vector<Candidate> Registry::eligible_candidates(std::uint64_t job_size) const {
  const bool small_job = job_size < config_.small_job_cutoff;
  std::vector<const CspRecord*> picked;
  for (const auto& [id, r] : records_) {
    if (r.status != NodeStatus::kIdle) continue;
    if (r.homogenized_perf < config_.perf_threshold) continue;
    if (small_job && r.rtt_ewma && *r.rtt_ewma > config_.rtt_cutoff) continue;
    picked.push_back(&r);
  }
  std::sort(picked.begin(), picked.end(), [](const CspRecord* a, const CspRecord* b) {
    if (a->lazy != b->lazy) return a->lazy;
    if (a->homogenized_perf != b->homogenized_perf) return a->homogenized_perf > b->homogenized_perf;
    return a->node_id < b->node_id;
  });
  std::vector<Candidate> out;
  out.reserve(picked.size());
  for (const CspRecord* r : picked) out.push_back({r->node_id, r->homogenized_perf});
  return out;
}

std::vector<NodeId> Registry::eligible(std::uint64_t job_size) const {
  std::vector<NodeId> ids;
  for (const Candidate& c : eligible_candidates(job_size)) ids.push_back(c.node_id);
  return ids;
}

void Registry::set_lazy(NodeId id, bool lazy) { get(id).lazy = lazy; }

void Registry::mark_busy(NodeId id) {
  CspRecord& r = get(id);
  if (r.status == NodeStatus::kDead) return;
  r.status = NodeStatus::kBusy;
  r.busy_mark_load = r.last_load;
}

std::vector<CspRecord> Registry::snapshot() const {
  std::vector<CspRecord> out;
  out.reserve(records_.size());
  for (const auto& [id, r] : records_) out.push_back(r);
  return out;
}

std::uint64_t granule_count(std::uint64_t n, std::size_t eligible, const SchedulerConfig& config) {
  std::uint64_t by_size = (n + config.min_granule - 1) / config.min_granule;
  return std::min({static_cast<std::uint64_t>(eligible), config.max_granules, by_size});
}

namespace {

// Every finite non-negative double is mantissa * 2^exponent exactly; scaling
// all weights to the smallest exponent gives integers with a common factor,
// so the proportional shares can be apportioned without rounding.
std::vector<cpp_int> exact_weights(std::span<const Candidate> chosen) {
  std::vector<std::pair<std::int64_t, int>> parts;
  int min_exp = 0;
  bool any = false;
  for (const Candidate& c : chosen) {
    if (!(c.homogenized_perf >= 0) || !std::isfinite(c.homogenized_perf))
      throw Error(ErrorCode::kProtocolViolation, "homogenized performance must be finite and >= 0");
    if (c.homogenized_perf == 0) {
      parts.emplace_back(0, 0);
      continue;
    }
    int exp = 0;
    double frac = std::frexp(c.homogenized_perf, &exp);
    auto mantissa = static_cast<std::int64_t>(std::ldexp(frac, 53));
    exp -= 53;
    parts.emplace_back(mantissa, exp);
    min_exp = any ? std::min(min_exp, exp) : exp;
    any = true;
  }
  std::vector<cpp_int> w;
  w.reserve(parts.size());
  for (auto [m, e] : parts) {
    cpp_int v = m;
    if (m != 0) v <<= (e - min_exp);
    w.push_back(std::move(v));
  }
  return w;
}

PartitionPlan contiguous(std::span<const Candidate> chosen, const std::vector<std::uint64_t>& sizes) {
  PartitionPlan plan;
  std::uint64_t at = 0;
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    if (sizes[i] == 0) continue;
    plan.assignments.push_back({chosen[i].node_id, Range{at, at + sizes[i]}});
    at += sizes[i];
  }
  return plan;
}

}  // namespace

std::vector<std::uint64_t> equal_sizes(std::uint64_t n, std::uint64_t k) {
  std::vector<std::uint64_t> sizes(k, k == 0 ? 0 : n / k);
  for (std::uint64_t i = 0; k != 0 && i < n % k; ++i) ++sizes[i];
  return sizes;
}

PartitionPlan partition(std::uint64_t n, std::span<const Candidate> candidates,
                        const SchedulerConfig& config) {
  if (candidates.empty()) throw Error(ErrorCode::kNoEligibleWorkers, "no eligible workers");
  if (n == 0) return {};
  auto chosen = candidates.first(granule_count(n, candidates.size(), config));

  std::vector<cpp_int> weight = exact_weights(chosen);
  cpp_int total = std::accumulate(weight.begin(), weight.end(), cpp_int(0));
  if (total == 0) return contiguous(chosen, equal_sizes(n, chosen.size()));

  std::vector<std::uint64_t> sizes(chosen.size());
  std::vector<cpp_int> remainder(chosen.size());
  std::uint64_t assigned = 0;
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    cpp_int q;
    divide_qr(cpp_int(n) * weight[i], total, q, remainder[i]);
    sizes[i] = static_cast<std::uint64_t>(q);
    assigned += sizes[i];
  }
  std::vector<std::size_t> order(chosen.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (remainder[a] != remainder[b]) return remainder[a] > remainder[b];
    return chosen[a].node_id < chosen[b].node_id;
  });
  for (std::uint64_t i = 0; i < n - assigned; ++i) ++sizes[order[i]];
  return contiguous(chosen, sizes);
}

PartitionPlan partition_equal(std::uint64_t n, std::span<const Candidate> candidates,
                              const SchedulerConfig& config) {
  if (candidates.empty()) throw Error(ErrorCode::kNoEligibleWorkers, "no eligible workers");
  auto chosen = candidates.first(granule_count(n, candidates.size(), config));
  return contiguous(chosen, equal_sizes(n, chosen.size()));
}

}  // namespace tda
