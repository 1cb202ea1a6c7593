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

// Speedup sweeps over the simulator.
//
// CSV columns, in order:
//   n_csps       number of workers taking part
//   policy       equal | homogenized
//   total_ms     client submit to assembled result (simulated ms)
//   actual_ms    busiest worker's computation time for the job
//   overhead_ms  total_ms - actual_ms
//   speedup      total_ms at n_csps=1 divided by total_ms

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tda/registry.hpp"
#include "tda/scenario.hpp"

namespace tda {

struct BenchRow {
  std::uint64_t n_csps = 0;
  std::string policy;
  double total_ms = 0;
  double actual_ms = 0;
  double overhead_ms = 0;
  double speedup = 0;
};

struct BenchReport {
  std::string scenario;
  std::vector<BenchRow> rows;
  std::vector<std::string> traces;      // one joined trace per row
  std::vector<std::string> event_logs;  // one joined coordinator log per row

  std::string to_csv() const;
};

struct BenchOptions {
  std::optional<Millis> overhead;  // overrides the scenario's per-subjob overhead
  std::optional<Millis> latency;   // overrides the default link latency
};

/// Names accepted by builtin_scenario().
std::vector<std::string> builtin_scenario_names();

/// homogeneous: nine equal-rate workers, 30000-record search.
/// heterogeneous-equal: nine workers, 6th and 9th slow, equal split, 100000 records.
/// homogenized: same workers as heterogeneous-equal with the proportional split.
/// Throws Error{kConfigError} for other names.
Scenario builtin_scenario(const std::string& name);

/// The scenario restricted to its first n workers.
Scenario with_first_workers(const Scenario& base, std::size_t n);

/// Runs the scenario once per worker count 1..max_csps. Throws
/// Error{kConfigError} if max_csps exceeds the declared workers or a run
/// fails to reproduce the single-node result.
BenchReport run_scenario(const std::string& name, const Scenario& base, std::size_t max_csps,
                         const BenchOptions& options = {});

/// Built-in name or scenario file path.
BenchReport run_scenario(const std::string& name_or_path, std::size_t max_csps, const BenchOptions& options = {});

/// k near-equal contiguous ranges over [0, n), larger first, assigned to
/// NodeIds 1..k. Only min(n, k) ranges are produced.
PartitionPlan equal_partition_override(std::uint64_t n, std::uint64_t k);

std::vector<BenchRow> parse_csv(const std::string& text);

/// Two stacked line charts: times against n_csps, and speedup against n_csps.
std::string render_svg(const std::vector<BenchRow>& rows, const std::string& title);

}  // namespace tda
