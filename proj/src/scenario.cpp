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

#include "tda/scenario.hpp"

#include <charconv>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "tda/coordinator.hpp"
#include "tda/error.hpp"

namespace tda {

namespace {

[[noreturn]] void bad(std::size_t line, const std::string& why) {
  throw Error(ErrorCode::kConfigError, "scenario line " + std::to_string(line) + ": " + why);
}

std::vector<std::string> split_ws(std::string_view s) {
  std::vector<std::string> out;
  std::istringstream in{std::string(s)};
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

double num(std::size_t line, const std::string& v) {
  double out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad(line, "not a number: " + v);
  return out;
}

std::uint64_t u64(std::size_t line, const std::string& v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad(line, "not an unsigned integer: " + v);
  return out;
}

std::map<std::string, std::string> options(std::size_t line, const std::vector<std::string>& toks, std::size_t from) {
  std::map<std::string, std::string> out;
  for (std::size_t i = from; i < toks.size(); ++i) {
    auto eq = toks[i].find('=');
    if (eq == std::string::npos) bad(line, "expected key=value, got " + toks[i]);
    out[toks[i].substr(0, eq)] = toks[i].substr(eq + 1);
  }
  return out;
}

}  // namespace

void Scenario::validate() const {
  sim.validate();
  std::set<Address> names{kCoordinatorName, kClientName};
  for (const WorkerPlan& w : workers) {
    if (!names.insert(w.name).second) throw Error(ErrorCode::kConfigError, "duplicate node " + w.name);
    if (!(w.rate > 0)) throw Error(ErrorCode::kConfigError, "worker " + w.name + ": rate must be positive");
    if (!(w.perf > 0)) throw Error(ErrorCode::kConfigError, "worker " + w.name + ": perf must be positive");
  }
  for (const Fault& f : sim.faults) {
    if (!names.count(f.node)) throw Error(ErrorCode::kConfigError, "fault names unknown node " + f.node);
  }
  for (const auto& [link, ms] : sim.latency) {
    if (!names.count(link.first) || !names.count(link.second))
      throw Error(ErrorCode::kConfigError, "latency names unknown node");
  }
  for (const auto& [node, rate] : sim.service_rate) {
    if (!names.count(node)) throw Error(ErrorCode::kConfigError, "service rate for unknown node " + node);
  }
  if (job.kind == JobKind::kSearch && (job.records == 0 || job.pattern.empty()))
    throw Error(ErrorCode::kConfigError, "search job needs records > 0 and a pattern");
  if (job.kind == JobKind::kMatMul && (job.m == 0 || job.n == 0 || job.p == 0))
    throw Error(ErrorCode::kConfigError, "matmul dimensions must be positive");
}

Scenario parse_scenario(std::string_view text) {
  Scenario sc;
  KeyValues config_kv;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.resize(hash);
    auto toks = split_ws(raw);
    if (toks.empty()) continue;
    const std::string& d = toks[0];
    if (d == "worker") {
      if (toks.size() < 2) bad(line, "worker needs a name");
      WorkerPlan w;
      w.name = toks[1];
      for (const auto& [k, v] : options(line, toks, 2)) {
        if (k == "rate") w.rate = num(line, v);
        else if (k == "perf") w.perf = num(line, v);
        else if (k == "start") w.start_at = num(line, v);
        else if (k == "load") w.initial_load = num(line, v);
        else if (k == "load_script") {
          std::vector<double> vals;
          std::istringstream parts(v);
          std::string part;
          while (std::getline(parts, part, ',')) vals.push_back(num(line, part));
          w.load_script = std::move(vals);
        } else bad(line, "unknown worker option " + k);
      }
      sc.sim.service_rate[w.name] = w.rate;
      sc.workers.push_back(std::move(w));
    } else if (d == "job") {
      if (toks.size() < 2) bad(line, "job needs a kind");
      auto opts = options(line, toks, 2);
      if (toks[1] == "search") sc.job.kind = JobKind::kSearch;
      else if (toks[1] == "matmul") sc.job.kind = JobKind::kMatMul;
      else bad(line, "unknown job kind " + toks[1]);
      for (const auto& [k, v] : opts) {
        if (k == "records") sc.job.records = u64(line, v);
        else if (k == "pattern") sc.job.pattern = v;
        else if (k == "m") sc.job.m = u64(line, v);
        else if (k == "n") sc.job.n = u64(line, v);
        else if (k == "p") sc.job.p = u64(line, v);
        else if (k == "data_seed") sc.job.data_seed = u64(line, v);
        else bad(line, "unknown job option " + k);
      }
    } else if (d == "latency") {
      if (toks.size() == 3 && toks[1] == "default") sc.sim.default_latency = num(line, toks[2]);
      else if (toks.size() == 4) sc.sim.latency[{toks[1], toks[2]}] = num(line, toks[3]);
      else bad(line, "latency default <ms> | latency <a> <b> <ms>");
    } else if (d == "overhead" && toks.size() == 2) {
      sc.sim.per_subjob_overhead = num(line, toks[1]);
    } else if (d == "seed" && toks.size() == 2) {
      sc.sim.seed = u64(line, toks[1]);
    } else if (d == "submit_at" && toks.size() == 2) {
      sc.submit_at = num(line, toks[1]);
    } else if (d == "horizon" && toks.size() == 2) {
      sc.horizon = num(line, toks[1]);
    } else if (d == "linger" && toks.size() == 2) {
      sc.linger = num(line, toks[1]);
    } else if (d == "lazy" && toks.size() == 2) {
      sc.lazy.push_back(NodeId{u64(line, toks[1])});
    } else if (d == "config" && toks.size() == 2) {
      auto eq = toks[1].find('=');
      if (eq == std::string::npos) bad(line, "config <key>=<value>");
      config_kv.entries[toks[1].substr(0, eq)] = toks[1].substr(eq + 1);
    } else if (d == "fault" && toks.size() >= 4) {
      Fault f;
      f.time = num(line, toks[1]);
      f.node = toks[2];
      if (toks[3] == "crash" && toks.size() == 4) f.kind = FaultKind::kCrash;
      else if (toks[3] == "crash_after_fragment" && toks.size() == 4) f.kind = FaultKind::kCrashAfterFragment;
      else if (toks[3] == "load" && toks.size() == 5) {
        f.kind = FaultKind::kLoadSet;
        f.value = num(line, toks[4]);
      } else bad(line, "fault <ms> <node> crash | crash_after_fragment | load <x>");
      sc.sim.faults.push_back(f);
    } else {
      bad(line, "unknown directive '" + d + "'");
    }
  }
  sc.config = TdaConfig::from(config_kv);
  sc.validate();
  return sc;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kConfigError, "cannot open scenario " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

Matrix random_matrix(std::uint64_t rows, std::uint64_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Matrix m(rows, cols);
  for (double& v : m.data) v = static_cast<double>(rng() >> 11) * 0x1.0p-52 - 1.0;
  return m;
}

MaterializedJob materialize(const JobPlan& plan) {
  MaterializedJob job;
  if (plan.kind == JobKind::kSearch) {
    job.table = std::make_shared<const RecordTable>(RecordTable::generate(plan.data_seed, plan.records));
    job.spec = JobSpec{SearchSpec{plan.pattern}, plan.records};
  } else {
    MatMulSpec mm{random_matrix(plan.m, plan.n, plan.data_seed), random_matrix(plan.n, plan.p, plan.data_seed + 1)};
    job.spec = JobSpec{std::move(mm), plan.m};
  }
  return job;
}

std::string SimReport::trace_text() const {
  std::string out;
  for (const auto& line : trace) {
    out += line;
    out += '\n';
  }
  return out;
}

SimReport sim_run(const Scenario& sc) {
  sc.validate();
  MaterializedJob job = materialize(sc.job);

  SimReport report;
  report.expected = oracle(job.spec.workload, job.table.get());

  Simulator sim(sc.sim);
  Coordinator coordinator(sc.config, [&](const std::string& line) { report.event_log.push_back(line); });
  coordinator.set_lazy_ids(sc.lazy);
  sim.add_node(kCoordinatorName, coordinator, 0);

  std::vector<std::unique_ptr<Worker>> workers;
  for (const WorkerPlan& w : sc.workers) {
    std::shared_ptr<double> cell = sim.load_cell(w.name);
    *cell = w.initial_load;
    LoadSource load = w.load_script ? LoadSource::scripted(*w.load_script)
                                    : LoadSource::from_sampler([cell] { return std::optional<double>(*cell); });
    workers.push_back(std::make_unique<Worker>(kCoordinatorName, w.perf, std::move(load), sc.config.worker, job.table));
    sim.add_node(w.name, *workers.back(), w.start_at);
  }

  Client client(kCoordinatorName, job.spec, sc.submit_at, 0);
  sim.add_node(kClientName, client, 0);
  sim.add_invariant([&] { return coordinator.check_coverage(); });

  sim.run([&] { return client.done(); }, sc.horizon);
  if (client.done() && sc.linger > 0) sim.run(nullptr, std::min(sc.horizon, sim.now() + sc.linger));

  report.outcome = client.state();
  report.failure = client.failure_reason();
  report.result = client.result();
  report.job_id = client.job_id();
  if (client.state() == ClientState::kCompleted && report.job_id) {
    report.timing.total = client.finished_at() - client.submitted_at();
    report.timing.actual = sim.max_busy_time(*report.job_id);
    report.timing.overhead = report.timing.total - report.timing.actual;
  }
  report.trace = sim.trace();
  report.sent = sim.sent();
  report.violations = sim.violations();
  for (std::size_t i = 0; i < workers.size(); ++i) report.worker_stats[sc.workers[i].name] = workers[i]->stats();
  if (const auto& a = client.assembly()) {
    report.client_ranges = a->received_ranges();
    report.client_duplicates = a->duplicates();
    report.client_duplicate_mismatches = a->duplicate_mismatches();
    report.client_overlaps = a->overlap_violations();
  }
  report.client_stale = client.stale_fragments();
  report.end_time = sim.now();
  return report;
}

}  // namespace tda
