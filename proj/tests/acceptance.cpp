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

// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria (capped at 1).

#include <fcntl.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "support.hpp"
#include "tda/bench.hpp"
#include "tda/registry.hpp"
#include "tda/scenario.hpp"

extern char** environ;

using namespace tda;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;

  void expect(bool cond, const std::string& what) {
    if (!cond) {
      if (ok) detail.clear();
      ok = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

int failures = 0;

void criterion(const std::string& name, const std::function<Outcome()>& body, double limit_s = 0) {
  auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o.ok = false;
    o.detail = std::string("exception: ") + e.what();
  }
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (limit_s > 0 && secs >= limit_s) o.expect(false, "took " + std::to_string(secs) + " s, limit " + std::to_string(limit_s));
  if (!o.ok) ++failures;
  std::printf("%s  %-28s %6.2f s  %s\n", o.ok ? "PASS" : "FAIL", name.c_str(), secs, o.detail.c_str());
  std::fflush(stdout);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

/// Every ResultFragment seen in any simulator run, as (from, to).
std::vector<std::pair<Address, Address>> fragment_links;
std::size_t runs_checked = 0;

SimReport observed_run(const Scenario& sc) {
  SimReport r = sim_run(sc);
  ++runs_checked;
  for (const SentRecord& s : r.sent)
    if (std::holds_alternative<msg::ResultFragment>(s.message)) fragment_links.emplace_back(s.from, s.to);
  return r;
}

std::size_t count_events(const std::vector<std::string>& log, const std::string& name) {
  std::size_t n = 0;
  for (const auto& line : log) n += nlohmann::json::parse(line).at("event") == name;
  return n;
}

template <class T>
std::vector<T> sent_of(const SimReport& r) {
  std::vector<T> out;
  for (const SentRecord& s : r.sent)
    if (auto* p = std::get_if<T>(&s.message)) out.push_back(*p);
  return out;
}

SearchPayload naive_payload(const Scenario& sc) {
  auto table = RecordTable::generate(sc.job.data_seed, sc.job.records);
  return SearchPayload{test::naive_search(table.records(), sc.job.pattern)};
}

// --- criteria ----------------------------------------------------------------

Outcome protocol_roundtrip() {
  Outcome o;
  std::mt19937_64 rng(20261016);
  std::vector<Message> msgs;
  std::vector<std::uint8_t> stream;
  std::size_t identical = 0;
  for (int i = 0; i < 1000; ++i) {
    msgs.push_back(test::random_message(rng));
    auto frame = encode_frame(msgs.back());
    auto d = decode_frame(frame);
    if (d && d->message == msgs.back() && d->consumed == frame.size() && encode_frame(d->message) == frame) ++identical;
    stream.insert(stream.end(), frame.begin(), frame.end());
  }
  o.expect(identical == 1000, std::to_string(1000 - identical) + " messages changed in a round trip");
  // concatenated stream, fed in random pieces
  FrameReader reader;
  std::vector<Message> got;
  for (std::size_t at = 0; at < stream.size();) {
    std::size_t n = std::min<std::size_t>(1 + rng() % 4096, stream.size() - at);
    reader.append(std::span(stream.data() + at, n));
    at += n;
    while (auto m = reader.next()) got.push_back(std::move(*m));
  }
  o.expect(got == msgs, "stream decoding produced a different sequence");
  o.expect(reader.buffered() == 0, "bytes left over after the stream");
  o.detail = o.ok ? "1000 messages, " + std::to_string(stream.size()) + " stream bytes" : o.detail;
  return o;
}

Outcome partition_properties() {
  Outcome o;
  std::mt19937_64 rng(7);
  SchedulerConfig cfg;
  cfg.min_granule = 1;
  cfg.max_granules = 64;
  using test::Rational;
  std::size_t bad_cover = 0, bad_dev = 0, bad_mono = 0, bad_det = 0;
  for (int iter = 0; iter < 10000; ++iter) {
    const std::uint64_t n = 1 + rng() % 1000000;
    const std::size_t k = 1 + rng() % 64;
    std::vector<Candidate> cands;
    for (std::size_t i = 0; i < k; ++i) {
      double h;
      switch (rng() % 3) {
        case 0: h = std::uniform_real_distribution<double>(1e-3, 100.0)(rng); break;
        case 1: h = static_cast<double>(1 + rng() % 8); break;  // many ties
        default: h = std::ldexp(static_cast<double>(1 + rng() % 1000), -static_cast<int>(rng() % 30)); break;
      }
      cands.push_back({NodeId{i + 1}, h});
    }
    // eligibility order: descending H, ascending id
    std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
      return a.homogenized_perf != b.homogenized_perf ? a.homogenized_perf > b.homogenized_perf : a.node_id < b.node_id;
    });
    PartitionPlan plan = partition(n, cands, cfg);
    if (!(partition(n, cands, cfg) == plan)) ++bad_det;

    std::uint64_t at = 0;
    bool cover = !plan.assignments.empty();
    std::map<NodeId, std::uint64_t> size;
    for (const Assignment& a : plan.assignments) {
      cover = cover && a.range.start == at && a.range.end > a.range.start && !size.count(a.node_id);
      at = a.range.end;
      size[a.node_id] = a.range.length();
    }
    if (!cover || at != n) ++bad_cover;

    const std::size_t used = std::min<std::size_t>(k, std::min<std::uint64_t>(64, n));
    Rational total = 0;
    for (std::size_t i = 0; i < used; ++i) total += Rational(cands[i].homogenized_perf);
    for (std::size_t i = 0; i < used; ++i) {
      Rational share = Rational(n) * Rational(cands[i].homogenized_perf) / total;
      Rational dev = Rational(size.count(cands[i].node_id) ? size[cands[i].node_id] : 0) - share;
      if (dev <= -1 || dev >= 1) ++bad_dev;
    }
    for (std::size_t i = 0; i + 1 < used; ++i) {
      auto si = size.count(cands[i].node_id) ? size[cands[i].node_id] : 0;
      auto sj = size.count(cands[i + 1].node_id) ? size[cands[i + 1].node_id] : 0;
      if (cands[i].homogenized_perf >= cands[i + 1].homogenized_perf && si < sj) ++bad_mono;
    }
  }
  o.expect(bad_cover == 0, std::to_string(bad_cover) + " plans not an exact disjoint cover");
  o.expect(bad_dev == 0, std::to_string(bad_dev) + " sizes off by 1 or more from the exact share");
  o.expect(bad_mono == 0, std::to_string(bad_mono) + " monotonicity violations");
  o.expect(bad_det == 0, std::to_string(bad_det) + " non-deterministic plans");
  if (o.ok) o.detail = "10000 instances";
  return o;
}

Outcome oracle_equivalence() {
  Outcome o;
  Scenario search = parse_scenario("worker w1\nworker w2\nworker w3\njob search records=100000 pattern=ab data_seed=42\n");
  SimReport r = observed_run(search);
  o.expect(r.outcome == ClientState::kCompleted, "search did not complete: " + r.failure);
  o.expect(count_events(r.event_log, "assign") == 3, "search was not split over 3 workers");
  SearchPayload want = naive_payload(search);
  o.expect(r.result && std::get<SearchPayload>(*r.result) == want, "search result differs from the oracle");

  Scenario mm = parse_scenario("worker w1\nworker w2\njob matmul m=8 n=8 p=8 data_seed=5\nconfig min_granule=1\n");
  SimReport m = observed_run(mm);
  o.expect(m.outcome == ClientState::kCompleted, "matmul did not complete: " + m.failure);
  o.expect(count_events(m.event_log, "assign") == 2, "matmul was not split over 2 workers");
  auto job = materialize(mm.job);
  const auto& spec = std::get<MatMulSpec>(job.spec.workload);
  double diff = m.result ? test::max_abs_diff(std::get<MatMulPayload>(*m.result).rows, test::triple_loop(spec.a, spec.b))
                         : 1e300;
  o.expect(diff <= 1e-12, "matmul max error " + std::to_string(diff));
  if (o.ok)
    o.detail = std::to_string(want.matches.size()) + " matches of 100000; matmul max error " + fmt(diff);
  return o;
}

Outcome homogeneous_speedup() {
  Outcome o;
  BenchOptions zero;
  zero.overhead = 0;
  zero.latency = 0;
  auto flat = run_scenario("homogeneous", 8, zero);
  const double t1 = flat.rows[0].total_ms;
  o.expect(std::abs(t1 - 30000) <= 1, "single worker took " + fmt(t1));
  for (const BenchRow& r : flat.rows) {
    double ideal = t1 / static_cast<double>(r.n_csps);
    o.expect(std::abs(r.total_ms - ideal) <= 1.0,
             "n=" + std::to_string(r.n_csps) + " total " + fmt(r.total_ms) + " vs " + fmt(ideal));
  }
  BenchOptions loaded;
  loaded.overhead = 50;
  loaded.latency = 2;
  auto slow = run_scenario("homogeneous", 8, loaded);
  for (const BenchRow& r : slow.rows) {
    if (r.n_csps >= 2)
      o.expect(r.speedup < static_cast<double>(r.n_csps),
               "with overhead, speedup(" + std::to_string(r.n_csps) + ") = " + fmt(r.speedup));
  }
  if (o.ok) o.detail = "speedup(8) " + fmt(flat.rows[7].speedup) + " flat, " + fmt(slow.rows[7].speedup) + " with overhead";
  return o;
}

Outcome heterogeneous_dip() {
  Outcome o;
  auto equal = run_scenario("heterogeneous-equal", 9);
  auto homog = run_scenario("homogenized", 9);
  auto t = [](const BenchReport& r, std::size_t n) { return r.rows.at(n - 1).total_ms; };
  o.expect(t(equal, 6) > t(equal, 5), "no dip at 6 under equal split");
  o.expect(t(equal, 9) > t(equal, 8), "no dip at 9 under equal split");
  for (std::size_t n = 2; n <= 9; ++n)
    o.expect(t(homog, n) <= t(homog, n - 1), "homogenized total rose at n=" + std::to_string(n));
  auto max_speedup = [](const BenchReport& r) {
    double m = 0;
    for (const auto& row : r.rows) m = std::max(m, row.speedup);
    return m;
  };
  o.expect(max_speedup(homog) > max_speedup(equal), "homogenized max speedup not above equal split");
  if (o.ok)
    o.detail = "equal t5/t6 " + fmt(t(equal, 5)) + "/" + fmt(t(equal, 6)) + ", t8/t9 " + fmt(t(equal, 8)) + "/" +
               fmt(t(equal, 9)) + "; max speedup " + fmt(max_speedup(homog)) + " vs " + fmt(max_speedup(equal));
  return o;
}

Outcome refusal_handoff() {
  Outcome o;
  const std::string common = "job search records=1000 pattern=a data_seed=3\nconfig chunk_size=100\n";
  // w1 holds the whole job (min_granule keeps it in one piece) and becomes
  // loaded part way through; w2 is idle.
  Scenario grant = parse_scenario("worker w1 perf=2\nworker w2\n" + common + "fault 450 w1 load 0.9\n");
  SimReport g = observed_run(grant);
  o.expect(g.outcome == ClientState::kCompleted, "grant run did not complete");
  auto reqs = sent_of<msg::RefusalRequest>(g);
  o.expect(reqs.size() == 1, std::to_string(reqs.size()) + " refusal requests");
  const std::uint64_t p = reqs.empty() ? 0 : reqs[0].progress_marker.position;
  o.expect(p > 0 && p < 1000, "checkpoint " + std::to_string(p) + " not inside the range");
  auto frags = sent_of<msg::ResultFragment>(g);
  std::vector<Range> ranges;
  for (const auto& f : frags) ranges.push_back(f.range);
  std::sort(ranges.begin(), ranges.end());
  o.expect(ranges == std::vector<Range>{{0, p}, {p, 1000}}, "fragments are not [0,p) and [p,1000)");
  o.expect(g.result && std::get<SearchPayload>(*g.result) == naive_payload(grant), "grant result differs from oracle");

  Scenario deny = parse_scenario("worker w1\n" + common + "fault 450 w1 load 0.9\n");
  Scenario plain = parse_scenario("worker w1\n" + common);
  SimReport d = observed_run(deny);
  SimReport u = observed_run(plain);
  auto dfr = sent_of<msg::ResultFragment>(d);
  auto ufr = sent_of<msg::ResultFragment>(u);
  o.expect(sent_of<msg::RefusalDeny>(d).size() == 1, "refusal was not denied");
  o.expect(dfr.size() == 1 && dfr[0].range == Range{0, 1000}, "denied run did not send one full fragment");
  o.expect(dfr.size() == 1 && ufr.size() == 1 && encode_frame(dfr[0]) == encode_frame(ufr[0]),
           "denied fragment bytes differ from the unloaded run");
  if (o.ok) o.detail = "handoff at p=" + std::to_string(p) + "; deny fragment byte-identical";
  return o;
}

Outcome death_reassignment() {
  Outcome o;
  Scenario crash = parse_scenario(
      "worker w1\nworker w2\njob search records=20000 pattern=ab\nfault 5000 w1 crash\n");
  SimReport c = observed_run(crash);
  o.expect(c.outcome == ClientState::kCompleted, "job did not complete after the crash");
  o.expect(c.result && std::get<SearchPayload>(*c.result) == naive_payload(crash), "result differs from oracle");
  o.expect(count_events(c.event_log, "death") == 1, "death not logged once");
  o.expect(count_events(c.event_log, "reassign") == 1,
           std::to_string(count_events(c.event_log, "reassign")) + " reassignments logged");

  // w1 sends its fragment and dies before reporting; the reassigned copy
  // reaches the client while w2 is still working.
  Scenario race = parse_scenario(R"(worker w1 rate=10
worker w2 rate=0.005
worker w3 perf=5 start=50000
job search records=2000 pattern=ab
fault 0 w1 crash_after_fragment
)");
  SimReport r = observed_run(race);
  o.expect(r.outcome == ClientState::kCompleted, "race run did not complete");
  o.expect(r.client_duplicates >= 1, "no duplicate fragment reached the client");
  o.expect(r.client_duplicate_mismatches == 0, "duplicate fragment bytes differed");
  o.expect(r.client_overlaps == 0, "overlapping fragments");
  o.expect(r.result && std::get<SearchPayload>(*r.result) == naive_payload(race), "race result differs from oracle");
  if (o.ok) o.detail = "one reassignment; " + std::to_string(r.client_duplicates) + " duplicate dropped";
  return o;
}

Outcome ctr_property(const std::vector<std::string>& bench_traces) {
  Outcome o;
  std::size_t n = fragment_links.size();
  for (const auto& [from, to] : fragment_links)
    o.expect(from != kCoordinatorName && to != kCoordinatorName, "fragment " + from + " -> " + to);
  for (const std::string& trace : bench_traces) {
    std::istringstream in(trace);
    std::string line;
    while (std::getline(in, line)) {
      auto j = nlohmann::json::parse(line);
      if (j.value("type", "") != "ResultFragment") continue;
      ++n;
      o.expect(j.at("from") != kCoordinatorName && j.at("to") != kCoordinatorName, "bench fragment via coordinator");
    }
  }
  o.expect(n > 0, "no fragments observed");
  if (o.ok)
    o.detail = std::to_string(n) + " fragments over " + std::to_string(runs_checked + bench_traces.size()) + " runs";
  return o;
}

Outcome determinism(std::vector<std::string>& traces_out) {
  Outcome o;
  for (const std::string& name : builtin_scenario_names()) {
    auto a = run_scenario(name, 9);
    auto b = run_scenario(name, 9);
    o.expect(a.to_csv() == b.to_csv(), name + " CSV differs");
    o.expect(a.traces == b.traces, name + " traces differ");
    o.expect(a.event_logs == b.event_logs, name + " event logs differ");
    traces_out.insert(traces_out.end(), a.traces.begin(), a.traces.end());
  }
  Scenario crash = parse_scenario("worker w1\nworker w2\nworker w3\njob search records=30000 pattern=ab\n"
                                  "latency default 3\noverhead 5\nfault 4000 w2 crash\nfault 100 w3 load 0.95\n");
  o.expect(sim_run(crash).trace_text() == sim_run(crash).trace_text(), "fault scenario trace differs");
  if (o.ok) o.detail = "3 bench scenarios x 9 runs, plus a fault scenario";
  return o;
}

// --- TCP ----------------------------------------------------------------------

struct Proc {
  pid_t pid = -1;
};

Proc spawn(const std::vector<std::string>& args, const std::string& out_path = "", const std::string& err_path = "") {
  posix_spawn_file_actions_t fa;
  posix_spawn_file_actions_init(&fa);
  if (!out_path.empty())
    posix_spawn_file_actions_addopen(&fa, STDOUT_FILENO, out_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  if (!err_path.empty())
    posix_spawn_file_actions_addopen(&fa, STDERR_FILENO, err_path.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
  std::vector<char*> argv;
  for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
  argv.push_back(nullptr);
  Proc p;
  if (posix_spawn(&p.pid, argv[0], &fa, nullptr, argv.data(), environ) != 0) p.pid = -1;
  posix_spawn_file_actions_destroy(&fa);
  return p;
}

/// Exit status, or -1 if it had to be killed at the deadline.
int wait_for(Proc p, std::chrono::steady_clock::time_point deadline) {
  while (true) {
    int status = 0;
    pid_t r = waitpid(p.pid, &status, WNOHANG);
    if (r == p.pid) return WIFEXITED(status) ? WEXITSTATUS(status) : 128;
    if (std::chrono::steady_clock::now() > deadline) {
      kill(p.pid, SIGKILL);
      waitpid(p.pid, &status, 0);
      return -1;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome tcp_end_to_end() {
  Outcome o;
  const std::string cli = TDA_CLI_PATH;
  fs::path dir = fs::temp_directory_path() / ("tda_accept_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const auto start = std::chrono::steady_clock::now();
  const auto deadline = start + std::chrono::seconds(60);

  auto data = (dir / "records.txt").string();
  o.expect(wait_for(spawn({cli, "gen-data", "--seed", "2026", "--count", "100000", "--out", data}), deadline) == 0,
           "gen-data failed");
  {
    std::ofstream(dir / "tda.conf") << "heartbeat_period=1\nprobe_period=1\n";
    std::ofstream(dir / "load.txt") << "0\n";
  }
  auto conf = (dir / "tda.conf").string();
  auto events = (dir / "events.log").string();
  auto ready = (dir / "ready").string();
  auto errlog = (dir / "stderr.log").string();
  Proc coord = spawn({cli, "coordinator", "--listen", "127.0.0.1:0", "--config", conf, "--event-log", events,
                      "--ready-file", ready},
                     "", errlog);
  std::vector<Proc> workers;
  std::string addr;
  while (addr.empty() && std::chrono::steady_clock::now() < deadline) {
    std::string text = slurp(ready);
    if (!text.empty() && text.back() == '\n') addr = text.substr(0, text.size() - 1);
    else std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  o.expect(!addr.empty(), "coordinator never reported its address");
  if (!addr.empty()) {
    for (int i = 1; i <= 3; ++i)
      workers.push_back(spawn({cli, "worker", "--coordinator", addr, "--perf", std::to_string(i), "--load-script",
                               (dir / "load.txt").string(), "--data", data, "--config", conf},
                              "", errlog));
    std::size_t registered = 0;
    while (registered < 3 && std::chrono::steady_clock::now() < deadline) {
      std::istringstream in(slurp(events));
      std::string line;
      registered = 0;
      while (std::getline(in, line)) registered += line.find("\"event\":\"register\"") != std::string::npos;
      if (registered < 3) std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    o.expect(registered == 3, std::to_string(registered) + " workers registered");

    auto out = (dir / "result.txt").string();
    int rc = wait_for(spawn({cli, "client", "--coordinator", addr, "--listen", "127.0.0.1:0", "--job", "search",
                             "--pattern", "ab", "--data", data, "--timeout", "55"},
                            out, errlog),
                      deadline);
    o.expect(rc == 0, "client exit status " + std::to_string(rc));
    auto table = RecordTable::generate(2026, 100000);
    std::string want = render_result(SearchPayload{test::naive_search(table.records(), "ab")});
    o.expect(slurp(out) == want, "client output differs from the oracle");
    std::size_t assigns = 0;
    {
      std::istringstream in(slurp(events));
      std::string line;
      while (std::getline(in, line)) assigns += line.find("\"event\":\"assign\"") != std::string::npos;
    }
    o.expect(assigns == 3, std::to_string(assigns) + " sub-jobs assigned");
  }
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  for (Proc w : workers) kill(w.pid, SIGTERM);
  kill(coord.pid, SIGTERM);
  for (Proc w : workers) wait_for(w, std::chrono::steady_clock::now() + std::chrono::seconds(5));
  wait_for(coord, std::chrono::steady_clock::now() + std::chrono::seconds(5));
  o.expect(secs < 60, "took " + fmt(secs) + " s");
  if (o.ok) {
    o.detail = "5 processes, " + fmt(secs) + " s wall";
    fs::remove_all(dir);
  } else {
    o.detail += " (logs in " + dir.string() + ")";
  }
  return o;
}

}  // namespace

int main() {
  std::vector<std::string> bench_traces;
  criterion("protocol-roundtrip", protocol_roundtrip, 5);
  criterion("partition-properties", partition_properties, 10);
  criterion("oracle-equivalence", oracle_equivalence);
  criterion("homogeneous-speedup", homogeneous_speedup);
  criterion("heterogeneous-dip", heterogeneous_dip);
  criterion("refusal-handoff", refusal_handoff);
  criterion("death-reassignment", death_reassignment);
  criterion("determinism", [&] { return determinism(bench_traces); });
  criterion("ctr-property", [&] { return ctr_property(bench_traces); });
  criterion("tcp-end-to-end", tcp_end_to_end, 60);
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
