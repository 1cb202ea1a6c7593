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

// A complete simulated experiment: one coordinator, a set of workers and a
// single client job, plus network and fault settings.
//
// Scenario file grammar (one directive per line, '#' starts a comment):
//
//   worker <name> [rate=<items/ms>] [perf=<units>] [start=<ms>]
//                 [load=<x>] [load_script=<x>,<x>,...]
//   job search records=<n> pattern=<text> [data_seed=<u64>]
//   job matmul m=<rows> n=<inner> p=<cols> [data_seed=<u64>]
//   latency default <ms>
//   latency <node> <node> <ms>
//   overhead <ms>                 per-subjob fixed cost
//   seed <u64>
//   submit_at <ms>
//   horizon <ms>
//   linger <ms>                   keep running this long after the client finishes
//   lazy <node_id>
//   config <key>=<value>          any coordinator/worker config key
//   fault <ms> <node> crash | crash_after_fragment | load <x>
//
// The coordinator is named "coordinator" and the client "client".

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tda/client.hpp"
#include "tda/config.hpp"
#include "tda/sim.hpp"
#include "tda/worker.hpp"
#include "tda/workloads.hpp"

namespace tda {

inline constexpr const char* kCoordinatorName = "coordinator";
inline constexpr const char* kClientName = "client";

struct WorkerPlan {
  Address name;
  double rate = 1.0;
  double perf = 1.0;
  Millis start_at = 0;
  double initial_load = 0;
  std::optional<std::vector<double>> load_script;
};

enum class JobKind { kSearch, kMatMul };

struct JobPlan {
  JobKind kind = JobKind::kSearch;
  std::uint64_t records = 1000;  // search
  std::string pattern = "ab";    // search
  std::uint64_t m = 8, n = 8, p = 8;  // matmul
  std::uint64_t data_seed = 42;
};

struct Scenario {
  SimConfig sim;
  TdaConfig config;
  std::vector<WorkerPlan> workers;
  std::vector<NodeId> lazy;
  JobPlan job;
  Millis submit_at = 100;
  Millis horizon = 1e9;
  Millis linger = 0;

  /// Throws Error{kConfigError} for references to undeclared nodes and
  /// other inconsistencies.
  void validate() const;
};

Scenario parse_scenario(std::string_view text);
Scenario load_scenario(const std::string& path);

/// Random matrix with entries in [-1, 1) from the raw output of a seeded
/// std::mt19937_64.
Matrix random_matrix(std::uint64_t rows, std::uint64_t cols, std::uint64_t seed);

/// The job a scenario's client submits, plus the data it needs.
struct MaterializedJob {
  JobSpec spec;
  std::shared_ptr<const RecordTable> table;  // search only
};

MaterializedJob materialize(const JobPlan& plan);

struct JobTiming {
  Millis total = 0;     // client submit to assembled result
  Millis actual = 0;    // max over workers of busy time for the job
  Millis overhead = 0;  // total - actual
};

struct SimReport {
  ClientState outcome = ClientState::kIdle;
  std::string failure;
  std::optional<Payload> result;
  Payload expected;  // single-node oracle
  std::optional<JobId> job_id;
  JobTiming timing;
  std::vector<std::string> trace;
  std::vector<std::string> event_log;  // coordinator events
  std::vector<SentRecord> sent;
  std::vector<std::string> violations;
  std::map<Address, Worker::Stats> worker_stats;
  std::vector<Range> client_ranges;
  std::uint64_t client_duplicates = 0;
  std::uint64_t client_duplicate_mismatches = 0;
  std::uint64_t client_overlaps = 0;
  std::uint64_t client_stale = 0;
  Millis end_time = 0;

  bool matches_oracle() const { return result && *result == expected; }
  /// Lines of trace joined with newlines.
  std::string trace_text() const;
};

/// Runs the scenario to completion (client done, then `linger`) or to the
/// horizon. The coverage invariant is checked after every event.
SimReport sim_run(const Scenario& scenario);

}  // namespace tda
