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

#include "tda/bench.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>
#include <sstream>

#include "tda/error.hpp"

namespace tda {

namespace {

constexpr double kSlowRates[] = {10, 10, 10, 10, 10, 3, 10, 10, 2};

Scenario pool(const double* rates, std::size_t n, std::uint64_t records, PartitionPolicy policy) {
  Scenario sc;
  for (std::size_t i = 0; i < n; ++i) {
    WorkerPlan w;
    w.name = "w" + std::to_string(i + 1);
    w.rate = rates[i];
    w.perf = rates[i];
    sc.sim.service_rate[w.name] = w.rate;
    sc.workers.push_back(w);
  }
  sc.job.kind = JobKind::kSearch;
  sc.job.records = records;
  sc.job.pattern = "ab";
  sc.config.scheduler.policy = policy;
  return sc;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

}  // namespace

std::string BenchReport::to_csv() const {
  std::string out = "n_csps,policy,total_ms,actual_ms,overhead_ms,speedup\n";
  for (const BenchRow& r : rows) {
    out += std::to_string(r.n_csps) + "," + r.policy + "," + fmt(r.total_ms) + "," + fmt(r.actual_ms) + "," +
           fmt(r.overhead_ms) + "," + fmt(r.speedup) + "\n";
  }
  return out;
}

std::vector<std::string> builtin_scenario_names() { return {"homogeneous", "heterogeneous-equal", "homogenized"}; }

Scenario builtin_scenario(const std::string& name) {
  if (name == "homogeneous") {
    const double ones[9] = {1, 1, 1, 1, 1, 1, 1, 1, 1};
    return pool(ones, 9, 30000, PartitionPolicy::kHomogenized);
  }
  if (name == "heterogeneous-equal") return pool(kSlowRates, 9, 100000, PartitionPolicy::kEqual);
  if (name == "homogenized") return pool(kSlowRates, 9, 100000, PartitionPolicy::kHomogenized);
  throw Error(ErrorCode::kConfigError, "unknown bench scenario '" + name + "'");
}

Scenario with_first_workers(const Scenario& base, std::size_t n) {
  Scenario sc = base;
  sc.workers.resize(std::min(n, sc.workers.size()));
  std::set<Address> keep{kCoordinatorName, kClientName};
  for (const WorkerPlan& w : sc.workers) keep.insert(w.name);
  std::erase_if(sc.sim.service_rate, [&](const auto& kv) { return !keep.count(kv.first); });
  std::erase_if(sc.sim.latency,
                [&](const auto& kv) { return !keep.count(kv.first.first) || !keep.count(kv.first.second); });
  std::erase_if(sc.sim.faults, [&](const Fault& f) { return !keep.count(f.node); });
  return sc;
}

BenchReport run_scenario(const std::string& name, const Scenario& base, std::size_t max_csps,
                         const BenchOptions& options) {
  if (max_csps == 0) throw Error(ErrorCode::kConfigError, "max_csps must be at least 1");
  if (max_csps > base.workers.size())
    throw Error(ErrorCode::kConfigError, "scenario declares " + std::to_string(base.workers.size()) +
                                             " workers, sweep wants " + std::to_string(max_csps));
  BenchReport report;
  report.scenario = name;
  for (std::size_t n = 1; n <= max_csps; ++n) {
    Scenario sc = with_first_workers(base, n);
    if (options.overhead) sc.sim.per_subjob_overhead = *options.overhead;
    if (options.latency) sc.sim.default_latency = *options.latency;
    SimReport run = sim_run(sc);
    if (run.outcome != ClientState::kCompleted || !run.matches_oracle())
      throw Error(ErrorCode::kConfigError, name + " with " + std::to_string(n) +
                                               " workers did not reproduce the single-node result" +
                                               (run.failure.empty() ? "" : ": " + run.failure));
    BenchRow row;
    row.n_csps = n;
    row.policy = std::string(to_string(sc.config.scheduler.policy));
    row.total_ms = run.timing.total;
    row.actual_ms = run.timing.actual;
    row.overhead_ms = run.timing.overhead;
    report.rows.push_back(row);
    report.traces.push_back(run.trace_text());
    std::string log;
    for (const std::string& line : run.event_log) log += line + "\n";
    report.event_logs.push_back(std::move(log));
  }
  const double base_total = report.rows.front().total_ms;
  for (BenchRow& r : report.rows) r.speedup = r.total_ms > 0 ? base_total / r.total_ms : 0;
  return report;
}

BenchReport run_scenario(const std::string& name_or_path, std::size_t max_csps, const BenchOptions& options) {
  auto names = builtin_scenario_names();
  if (std::find(names.begin(), names.end(), name_or_path) != names.end())
    return run_scenario(name_or_path, builtin_scenario(name_or_path), max_csps, options);
  if (!std::filesystem::exists(name_or_path))
    throw Error(ErrorCode::kConfigError, "no built-in scenario or file named '" + name_or_path + "'");
  return run_scenario(name_or_path, load_scenario(name_or_path), max_csps, options);
}

PartitionPlan equal_partition_override(std::uint64_t n, std::uint64_t k) {
  if (k == 0) throw Error(ErrorCode::kConfigError, "k must be at least 1");
  PartitionPlan plan;
  std::uint64_t at = 0;
  std::uint64_t id = 1;
  for (std::uint64_t size : equal_sizes(n, std::min(n, k))) {
    plan.assignments.push_back({NodeId{id++}, Range{at, at + size}});
    at += size;
  }
  return plan;
}

std::vector<BenchRow> parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<BenchRow> rows;
  bool header = true;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (header) {
      header = false;
      if (line.rfind("n_csps,", 0) == 0) continue;
    }
    std::vector<std::string> f;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (f.size() != 6) throw Error(ErrorCode::kConfigError, "csv line " + std::to_string(lineno) + ": expected 6 fields");
    try {
      rows.push_back({std::stoull(f[0]), f[1], std::stod(f[2]), std::stod(f[3]), std::stod(f[4]), std::stod(f[5])});
    } catch (const std::exception&) {
      throw Error(ErrorCode::kConfigError, "csv line " + std::to_string(lineno) + ": bad number");
    }
  }
  return rows;
}

namespace {

struct Series {
  std::string label;
  std::string color;
  std::vector<double> ys;
};

void chart(std::ostringstream& svg, double top, const std::vector<double>& xs, const std::vector<Series>& series,
           const std::string& ylabel) {
  const double left = 70, width = 520, height = 220;
  double ymax = 0;
  for (const Series& s : series)
    for (double y : s.ys) ymax = std::max(ymax, y);
  if (ymax <= 0) ymax = 1;
  double xmin = xs.front(), xmax = xs.back();
  if (xmax == xmin) xmax = xmin + 1;
  auto px = [&](double x) { return left + (x - xmin) / (xmax - xmin) * width; };
  auto py = [&](double y) { return top + height - y / ymax * height; };

  svg << "<rect x='" << left << "' y='" << top << "' width='" << width << "' height='" << height
      << "' fill='none' stroke='#888'/>\n";
  svg << "<text x='" << left - 60 << "' y='" << top + height / 2 << "' font-size='12'>" << ylabel << "</text>\n";
  svg << "<text x='" << left - 8 << "' y='" << top + 4 << "' font-size='10' text-anchor='end'>" << fmt(ymax)
      << "</text>\n";
  for (double x : xs) {
    svg << "<text x='" << px(x) << "' y='" << top + height + 14 << "' font-size='10' text-anchor='middle'>" << x
        << "</text>\n";
  }
  double legend_y = top + 14;
  for (const Series& s : series) {
    svg << "<polyline fill='none' stroke='" << s.color << "' stroke-width='2' points='";
    for (std::size_t i = 0; i < xs.size(); ++i) svg << px(xs[i]) << "," << py(s.ys[i]) << " ";
    svg << "'/>\n";
    svg << "<text x='" << left + width + 8 << "' y='" << legend_y << "' font-size='11' fill='" << s.color << "'>"
        << s.label << "</text>\n";
    legend_y += 14;
  }
}

}  // namespace

std::string render_svg(const std::vector<BenchRow>& rows, const std::string& title) {
  if (rows.empty()) throw Error(ErrorCode::kConfigError, "no rows to plot");
  std::vector<double> xs;
  Series total{"total_ms", "#1f77b4", {}}, actual{"actual_ms", "#2ca02c", {}}, over{"overhead_ms", "#d62728", {}},
      speed{"speedup", "#9467bd", {}};
  for (const BenchRow& r : rows) {
    xs.push_back(static_cast<double>(r.n_csps));
    total.ys.push_back(r.total_ms);
    actual.ys.push_back(r.actual_ms);
    over.ys.push_back(r.overhead_ms);
    speed.ys.push_back(r.speedup);
  }
  std::ostringstream svg;
  svg << "<svg xmlns='http://www.w3.org/2000/svg' width='700' height='560'>\n";
  svg << "<text x='350' y='20' font-size='14' text-anchor='middle'>" << title << " (" << rows.front().policy
      << ")</text>\n";
  chart(svg, 40, xs, {total, actual, over}, "ms");
  chart(svg, 310, xs, {speed}, "speedup");
  svg << "<text x='330' y='550' font-size='12' text-anchor='middle'>n_csps</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace tda
