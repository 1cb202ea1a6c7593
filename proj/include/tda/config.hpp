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

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>

#include "tda/types.hpp"

namespace tda {

/// Plain-text `key = value` file. Blank lines and lines starting with '#'
/// are ignored.
struct KeyValues {
  std::map<std::string, std::string> entries;

  static KeyValues parse(std::string_view text);
  static KeyValues load(const std::string& path);
};

enum class PartitionPolicy { kHomogenized, kEqual };

std::string_view to_string(PartitionPolicy p);

struct SchedulerConfig {
  double perf_threshold = 0.0;
  std::uint64_t small_job_cutoff = 10000;  // items
  Millis rtt_cutoff = 100.0;
  std::uint64_t min_granule = 1000;  // items
  std::uint64_t max_granules = 64;
  Millis heartbeat_period = 30000.0;
  Millis heartbeat_timeout = 90000.0;
  Millis probe_period = 10000.0;
  double ewma_alpha = 0.3;
  PartitionPolicy policy = PartitionPolicy::kHomogenized;

  /// Throws Error{kConfigError} on any violated bound.
  void validate() const;
};

struct WorkerConfig {
  std::uint64_t chunk_size = 1000;  // items per checkpoint
  double busy_threshold = 0.8;
  Millis heartbeat_period = 30000.0;

  void validate() const;
};

/// Scheduler and worker settings read from one config file. Durations are
/// given in seconds except rtt_cutoff, which is in milliseconds.
/// heartbeat_timeout defaults to three heartbeat periods.
struct TdaConfig {
  SchedulerConfig scheduler;
  WorkerConfig worker;

  static TdaConfig from(const KeyValues& kv);
  static TdaConfig load(const std::string& path);
};

}  // namespace tda
