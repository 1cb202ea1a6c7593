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

#include "tda/sim.hpp"

#include <algorithm>

#include "json.hpp"
#include "tda/error.hpp"

namespace tda {

using json = nlohmann::json;

Millis SimConfig::latency_between(const Address& a, const Address& b) const {
  if (auto it = latency.find({a, b}); it != latency.end()) return it->second;
  if (auto it = latency.find({b, a}); it != latency.end()) return it->second;
  return default_latency;
}

double SimConfig::rate_of(const Address& node) const {
  auto it = service_rate.find(node);
  return it == service_rate.end() ? 1.0 : it->second;
}

void SimConfig::validate() const {
  if (!(default_latency >= 0)) throw Error(ErrorCode::kConfigError, "negative latency");
  for (const auto& [link, ms] : latency) {
    if (!(ms >= 0)) throw Error(ErrorCode::kConfigError, "negative latency on " + link.first + "-" + link.second);
  }
  for (const auto& [node, rate] : service_rate) {
    if (!(rate > 0)) throw Error(ErrorCode::kConfigError, "service rate of " + node + " must be positive");
  }
  if (!(per_subjob_overhead >= 0)) throw Error(ErrorCode::kConfigError, "negative per-subjob overhead");
  for (const Fault& f : faults) {
    if (!(f.time >= 0)) throw Error(ErrorCode::kConfigError, "fault before time zero");
    if (f.kind == FaultKind::kLoadSet && !(f.value >= 0 && f.value <= 1))
      throw Error(ErrorCode::kConfigError, "fault load outside [0,1]");
  }
}

struct Simulator::Slot {
  Node* node = nullptr;
  std::unique_ptr<NodeContext> ctx;
  bool crashed = false;
  bool crash_after_fragment = false;
  bool stopped = false;
};

class Simulator::NodeContext : public Context {
 public:
  NodeContext(Simulator& sim, Address self) : sim_(sim), self_(std::move(self)) {}

  Millis now() const override { return sim_.now_; }
  const Address& self() const override { return self_; }
  bool send(const Address& to, const Message& m) override { return sim_.send_from(self_, to, m); }

  TimerId set_timer(Millis delay, std::uint64_t tag) override {
    Event e;
    e.time = sim_.now_ + std::max<Millis>(delay, 0);
    e.kind = EventKind::kTimer;
    e.target = self_;
    e.tag = tag;
    e.timer = sim_.next_timer_++;
    sim_.push(e);
    return e.timer;
  }

  void cancel_timer(TimerId id) override { sim_.cancelled_.insert(id); }
  void disconnect(const Address& peer) override {
    sim_.record(json{{"t", sim_.now_}, {"ev", "disconnect"}, {"node", self_}, {"peer", peer}}.dump());
  }

  Millis work_cost(JobId job, std::uint64_t items) override {
    Millis ms = static_cast<double>(items) / sim_.config_.rate_of(self_);
    sim_.busy_[{self_, job}] += ms;
    return ms;
  }

  Millis assignment_overhead() override { return sim_.config_.per_subjob_overhead; }
  void stop() override { sim_.nodes_.at(self_)->stopped = true; }

 private:
  Simulator& sim_;
  Address self_;
};

bool Simulator::Later::operator()(const Event& a, const Event& b) const {
  if (a.time != b.time) return a.time > b.time;
  return a.seq > b.seq;
}

Simulator::Simulator(SimConfig config) : config_(std::move(config)) { config_.validate(); }

Simulator::~Simulator() = default;

void Simulator::add_node(const Address& name, Node& node, Millis start_at) {
  if (nodes_.count(name)) throw Error(ErrorCode::kConfigError, "duplicate node " + name);
  auto slot = std::make_unique<Slot>();
  slot->node = &node;
  slot->ctx = std::make_unique<NodeContext>(*this, name);
  nodes_.emplace(name, std::move(slot));
  Event e;
  e.time = std::max(start_at, now_);
  e.kind = EventKind::kStart;
  e.target = name;
  push(e);
}

std::shared_ptr<double> Simulator::load_cell(const Address& node) {
  auto& cell = loads_[node];
  if (!cell) cell = std::make_shared<double>(0.0);
  return cell;
}

void Simulator::add_invariant(std::function<std::optional<std::string>()> check) {
  invariants_.push_back(std::move(check));
}

bool Simulator::crashed(const Address& node) const {
  auto it = nodes_.find(node);
  return it != nodes_.end() && it->second->crashed;
}

bool Simulator::stopped(const Address& node) const {
  auto it = nodes_.find(node);
  return it != nodes_.end() && it->second->stopped;
}

Millis Simulator::busy_time(const Address& node, JobId job) const {
  auto it = busy_.find({node, job});
  return it == busy_.end() ? 0.0 : it->second;
}

Millis Simulator::max_busy_time(JobId job) const {
  Millis best = 0;
  for (const auto& [key, ms] : busy_) {
    if (key.second == job) best = std::max(best, ms);
  }
  return best;
}

void Simulator::push(Event e) {
  e.seq = seq_++;
  queue_.push(std::move(e));
}

void Simulator::record(std::string line) { trace_.push_back(std::move(line)); }

bool Simulator::send_from(const Address& from, const Address& to, const Message& m) {
  Slot& src = *nodes_.at(from);
  if (src.crashed) return true;
  auto dst = nodes_.find(to);
  if (dst == nodes_.end()) return false;
  auto frame = std::make_shared<const std::vector<std::uint8_t>>(encode_frame(m));
  sent_.push_back({now_, from, to, m});
  Event e;
  e.time = now_ + config_.latency_between(from, to);
  e.kind = EventKind::kDeliver;
  e.target = to;
  e.from = from;
  e.frame = std::move(frame);
  push(std::move(e));
  if (src.crash_after_fragment && std::holds_alternative<msg::ResultFragment>(m)) {
    src.crashed = true;
    record(json{{"t", now_}, {"ev", "fault"}, {"node", from}, {"kind", "crash"}}.dump());
  }
  return true;
}

void Simulator::dispatch(const Event& e) {
  Slot& slot = *nodes_.at(e.target);
  if (e.kind == EventKind::kFault) {
    const Fault& f = config_.faults[e.fault];
    switch (f.kind) {
      case FaultKind::kCrash:
        slot.crashed = true;
        record(json{{"t", now_}, {"ev", "fault"}, {"node", f.node}, {"kind", "crash"}}.dump());
        break;
      case FaultKind::kCrashAfterFragment:
        slot.crash_after_fragment = true;
        record(json{{"t", now_}, {"ev", "fault"}, {"node", f.node}, {"kind", "crash_after_fragment"}}.dump());
        break;
      case FaultKind::kLoadSet:
        *load_cell(f.node) = f.value;
        record(json{{"t", now_}, {"ev", "fault"}, {"node", f.node}, {"kind", "load"}, {"value", f.value}}.dump());
        break;
    }
    return;
  }
  if (slot.crashed) {
    if (e.kind == EventKind::kDeliver)
      record(json{{"t", now_}, {"ev", "drop"}, {"from", e.from}, {"to", e.target}}.dump());
    return;
  }
  switch (e.kind) {
    case EventKind::kStart:
      record(json{{"t", now_}, {"ev", "start"}, {"node", e.target}}.dump());
      slot.node->on_start(*slot.ctx);
      break;
    case EventKind::kDeliver: {
      auto decoded = decode_frame(*e.frame);
      const Message& m = decoded->message;
      record(json{{"t", now_}, {"ev", "deliver"}, {"from", e.from}, {"to", e.target},
                  {"type", type_name(m)}, {"bytes", e.frame->size()}}.dump());
      slot.node->on_message(*slot.ctx, e.from, m);
      break;
    }
    case EventKind::kTimer:
      if (cancelled_.erase(e.timer)) return;
      record(json{{"t", now_}, {"ev", "timer"}, {"node", e.target}, {"tag", e.tag}}.dump());
      slot.node->on_timer(*slot.ctx, e.tag);
      break;
    case EventKind::kFault:
      break;
  }
}

void Simulator::run(const std::function<bool()>& until, Millis horizon) {
  if (!faults_scheduled_) {
    for (std::size_t i = 0; i < config_.faults.size(); ++i) {
      const Fault& f = config_.faults[i];
      if (!nodes_.count(f.node)) throw Error(ErrorCode::kConfigError, "fault names unknown node " + f.node);
      Event e;
      e.time = f.time;
      e.kind = EventKind::kFault;
      e.target = f.node;
      e.fault = i;
      push(e);
    }
    faults_scheduled_ = true;
  }
  while (!queue_.empty()) {
    if (queue_.top().time > horizon) break;
    Event e = queue_.top();
    queue_.pop();
    now_ = e.time;
    dispatch(e);
    for (const auto& check : invariants_) {
      if (auto v = check()) violations_.push_back("t=" + std::to_string(now_) + " " + *v);
    }
    if (until && until()) break;
  }
}

}  // namespace tda
