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

#include <csignal>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tda/bench.hpp"
#include "tda/client.hpp"
#include "tda/config.hpp"
#include "tda/coordinator.hpp"
#include "tda/error.hpp"
#include "tda/scenario.hpp"
#include "tda/tcp.hpp"
#include "tda/worker.hpp"
#include "tda/workloads.hpp"

namespace {

tda::TcpRuntime* g_runtime = nullptr;

void on_signal(int) {
  if (g_runtime) g_runtime->request_stop();
}

void run_until_signalled(tda::TcpRuntime& rt) {
  g_runtime = &rt;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  rt.run();
  g_runtime = nullptr;
}

tda::TdaConfig config_or_default(const std::string& path) {
  return path.empty() ? tda::TdaConfig{} : tda::TdaConfig::load(path);
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw tda::Error(tda::ErrorCode::kConfigError, "cannot write " + path);
  out << text;
}

struct CoordinatorArgs {
  std::string listen;
  std::string config;
  std::vector<std::uint64_t> lazy;
  std::string event_log;
  std::string ready_file;
};

int run_coordinator(const CoordinatorArgs& a) {
  std::ofstream log_file;
  std::ostream* log = &std::cout;
  if (!a.event_log.empty()) {
    log_file.open(a.event_log, std::ios::app);
    if (!log_file) throw tda::Error(tda::ErrorCode::kConfigError, "cannot open " + a.event_log);
    log = &log_file;
  }
  tda::Coordinator coord(config_or_default(a.config), [log](const std::string& line) { *log << line << std::endl; });
  std::vector<tda::NodeId> lazy;
  for (std::uint64_t id : a.lazy) lazy.push_back(tda::NodeId{id});
  coord.set_lazy_ids(std::move(lazy));
  tda::TcpRuntime rt(coord, a.listen);
  std::cerr << "coordinator listening on " << rt.self() << "\n";
  if (!a.ready_file.empty()) write_file(a.ready_file, rt.self() + "\n");
  run_until_signalled(rt);
  return 0;
}

struct WorkerArgs {
  std::string coordinator;
  double perf = 1.0;
  std::string load_script;
  std::string data;
  std::string config;
};

int run_worker(const WorkerArgs& a) {
  tda::TdaConfig cfg = config_or_default(a.config);
  std::shared_ptr<const tda::RecordTable> table;
  if (!a.data.empty()) table = std::make_shared<const tda::RecordTable>(tda::RecordTable::load(a.data));
  tda::LoadSource load = a.load_script.empty() ? tda::LoadSource::sampled() : tda::LoadSource::script_file(a.load_script);
  tda::Worker worker(a.coordinator, a.perf, std::move(load), cfg.worker, table);
  tda::TcpRuntime rt(worker);
  run_until_signalled(rt);
  return 0;
}

struct ClientArgs {
  std::string coordinator;
  std::string listen = "127.0.0.1:0";
  std::string job;
  std::string pattern;
  std::string data;
  std::string a;
  std::string b;
  double timeout_s = 600;
};

int run_client(const ClientArgs& a) {
  tda::JobSpec spec;
  if (a.job == "search") {
    if (a.pattern.empty() || a.data.empty())
      throw tda::Error(tda::ErrorCode::kConfigError, "search needs --pattern and --data");
    spec.workload = tda::SearchSpec{a.pattern};
    spec.size = tda::RecordTable::load(a.data).size();
  } else {
    if (a.a.empty() || a.b.empty()) throw tda::Error(tda::ErrorCode::kConfigError, "matmul needs --a and --b");
    tda::MatMulSpec mm{tda::load_matrix(a.a), tda::load_matrix(a.b)};
    spec.size = mm.a.rows;
    spec.workload = std::move(mm);
  }
  tda::Client client(a.coordinator, std::move(spec), 0, a.timeout_s * 1000.0);
  tda::TcpRuntime rt(client, a.listen);
  run_until_signalled(rt);
  switch (client.state()) {
    case tda::ClientState::kCompleted:
      std::cout << tda::render_result(*client.result());
      return 0;
    case tda::ClientState::kFailed:
      std::cerr << "job failed: " << client.failure_reason() << "\n";
      return 2;
    case tda::ClientState::kTimedOut:
      std::cerr << "timed out; missing";
      for (const tda::Range& r : client.missing()) std::cerr << " " << tda::to_string(r);
      std::cerr << "\n";
      return 3;
    default:
      std::cerr << "interrupted\n";
      return 1;
  }
}

struct BenchArgs {
  std::string scenario;
  std::size_t max_csps = 9;
  std::string out;
  std::string svg;
  std::string trace;
  std::optional<double> overhead;
  std::optional<double> latency;
};

int run_bench(const BenchArgs& a) {
  tda::BenchOptions opts{a.overhead, a.latency};
  tda::BenchReport report = tda::run_scenario(a.scenario, a.max_csps, opts);
  write_file(a.out, report.to_csv());
  if (!a.svg.empty()) write_file(a.svg, tda::render_svg(report.rows, a.scenario));
  if (!a.trace.empty()) {
    std::string all;
    for (std::size_t i = 0; i < report.traces.size(); ++i)
      all += "# n_csps=" + std::to_string(i + 1) + "\n" + report.traces[i];
    write_file(a.trace, all);
  }
  std::cout << report.to_csv();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tda: master/worker task distribution"};
  app.require_subcommand(1);

  CoordinatorArgs ca;
  auto* coord = app.add_subcommand("coordinator", "Run the coordinator");
  coord->add_option("--listen", ca.listen, "host:port to accept connections on")->required();
  coord->add_option("--config", ca.config, "key=value config file");
  coord->add_option("--lazy", ca.lazy, "node ids to prefer (repeatable)");
  coord->add_option("--event-log", ca.event_log, "append JSON-lines events here instead of stdout");
  coord->add_option("--ready-file", ca.ready_file, "write the bound address here once listening");

  WorkerArgs wa;
  auto* worker = app.add_subcommand("worker", "Run a worker");
  worker->add_option("--coordinator", wa.coordinator, "coordinator host:port")->required();
  worker->add_option("--perf", wa.perf, "static performance parameter")->required()->check(CLI::PositiveNumber);
  worker->add_option("--load-script", wa.load_script, "file of load values to report in turn");
  worker->add_option("--data", wa.data, "record table (id,key lines) for search jobs");
  worker->add_option("--config", wa.config, "key=value config file");

  ClientArgs cl;
  auto* client = app.add_subcommand("client", "Submit one job and print its result");
  client->add_option("--coordinator", cl.coordinator, "coordinator host:port")->required();
  client->add_option("--listen", cl.listen, "host:port workers deliver fragments to");
  client->add_option("--job", cl.job, "search | matmul")->required()->check(CLI::IsMember({"search", "matmul"}));
  client->add_option("--pattern", cl.pattern, "substring to search for");
  client->add_option("--data", cl.data, "record table the workers hold");
  client->add_option("--a", cl.a, "left matrix file");
  client->add_option("--b", cl.b, "right matrix file");
  client->add_option("--timeout", cl.timeout_s, "seconds to wait for the result (0 waits forever)");

  std::uint64_t seed = 0, count = 0;
  std::string data_out;
  auto* gen = app.add_subcommand("gen-data", "Write a deterministic record table");
  gen->add_option("--seed", seed)->required();
  gen->add_option("--count", count)->required();
  gen->add_option("--out", data_out)->required();

  BenchArgs ba;
  auto* bench = app.add_subcommand("bench", "Sweep a simulated scenario over 1..n workers");
  bench->add_option("--scenario", ba.scenario, "homogeneous | heterogeneous-equal | homogenized | file")->required();
  bench->add_option("--max-csps", ba.max_csps)->required()->check(CLI::PositiveNumber);
  bench->add_option("--out", ba.out, "CSV output path")->required();
  bench->add_option("--svg", ba.svg, "SVG chart output path");
  bench->add_option("--trace", ba.trace, "write every run's simulator trace here");
  bench->add_option("--overhead", ba.overhead, "per-subjob overhead in ms");
  bench->add_option("--latency", ba.latency, "default link latency in ms");

  std::string csv_in, svg_out, title = "tda bench";
  auto* plot = app.add_subcommand("plot", "Render a bench CSV as SVG line charts");
  plot->add_option("--csv", csv_in)->required();
  plot->add_option("--svg", svg_out)->required();
  plot->add_option("--title", title);

  std::string scenario_file, trace_out, events_out;
  auto* sim = app.add_subcommand("sim", "Run one scenario file in the simulator");
  sim->add_option("--scenario", scenario_file)->required();
  sim->add_option("--trace", trace_out, "write the event trace here");
  sim->add_option("--events", events_out, "write the coordinator event log here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*coord) return run_coordinator(ca);
    if (*worker) return run_worker(wa);
    if (*client) return run_client(cl);
    if (*gen) {
      tda::RecordTable::generate(seed, count).save(data_out);
      return 0;
    }
    if (*bench) return run_bench(ba);
    if (*plot) {
      std::ifstream in(csv_in);
      if (!in) throw tda::Error(tda::ErrorCode::kConfigError, "cannot read " + csv_in);
      std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
      write_file(svg_out, tda::render_svg(tda::parse_csv(text), title));
      return 0;
    }
    if (*sim) {
      tda::SimReport r = tda::sim_run(tda::load_scenario(scenario_file));
      if (!trace_out.empty()) write_file(trace_out, r.trace_text());
      if (!events_out.empty()) {
        std::string log;
        for (const auto& line : r.event_log) log += line + "\n";
        write_file(events_out, log);
      }
      std::cout << "outcome " << tda::to_string(r.outcome) << "\n"
                << "matches_oracle " << (r.matches_oracle() ? "yes" : "no") << "\n"
                << "total_ms " << r.timing.total << "\n"
                << "actual_ms " << r.timing.actual << "\n"
                << "overhead_ms " << r.timing.overhead << "\n";
      if (!r.failure.empty()) std::cout << "failure " << r.failure << "\n";
      for (const auto& v : r.violations) std::cout << "violation " << v << "\n";
      return r.matches_oracle() && r.violations.empty() ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "tda: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
