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

#include "tda/config.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "tda/error.hpp"

namespace tda {

namespace {

std::string_view trim(std::string_view s) {
  const char* ws = " \t\r\n";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

[[noreturn]] void config_error(const std::string& why) { throw Error(ErrorCode::kConfigError, why); }

double to_double(const std::string& key, const std::string& v) {
  double out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) config_error("key '" + key + "': not a number: " + v);
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) config_error("key '" + key + "': not an unsigned integer: " + v);
  return out;
}

}  // namespace

KeyValues KeyValues::parse(std::string_view text) {
  KeyValues kv;
  std::size_t lineno = 0;
  while (!text.empty()) {
    auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++lineno;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos) config_error("line " + std::to_string(lineno) + ": expected key=value");
    std::string key(trim(line.substr(0, eq)));
    std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) config_error("line " + std::to_string(lineno) + ": empty key");
    kv.entries[key] = value;
  }
  return kv;
}

KeyValues KeyValues::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) config_error("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string_view to_string(PartitionPolicy p) {
  return p == PartitionPolicy::kEqual ? "equal" : "homogenized";
}

void SchedulerConfig::validate() const {
  if (perf_threshold < 0) config_error("perf_threshold must be >= 0");
  if (min_granule < 1) config_error("min_granule must be >= 1");
  if (max_granules < 1) config_error("max_granules must be >= 1");
  if (small_job_cutoff < 1) config_error("small_job_cutoff must be >= 1");
  if (!(rtt_cutoff > 0)) config_error("rtt_cutoff must be positive");
  if (!(heartbeat_period > 0)) config_error("heartbeat_period must be positive");
  if (!(probe_period > 0)) config_error("probe_period must be positive");
  if (!(heartbeat_timeout > heartbeat_period)) config_error("heartbeat_timeout must exceed heartbeat_period");
  if (!(ewma_alpha > 0 && ewma_alpha <= 1)) config_error("ewma_alpha must be in (0,1]");
}

void WorkerConfig::validate() const {
  if (chunk_size < 1) config_error("chunk_size must be >= 1");
  if (!(busy_threshold >= 0 && busy_threshold <= 1)) config_error("busy_threshold must be in [0,1]");
  if (!(heartbeat_period > 0)) config_error("heartbeat_period must be positive");
}

TdaConfig TdaConfig::from(const KeyValues& kv) {
  TdaConfig c;
  SchedulerConfig& s = c.scheduler;
  bool timeout_set = false;
  for (const auto& [key, value] : kv.entries) {
    if (key == "perf_threshold") s.perf_threshold = to_double(key, value);
    else if (key == "small_job_cutoff") s.small_job_cutoff = to_u64(key, value);
    else if (key == "rtt_cutoff") s.rtt_cutoff = to_double(key, value);
    else if (key == "min_granule") s.min_granule = to_u64(key, value);
    else if (key == "max_granules") s.max_granules = to_u64(key, value);
    else if (key == "heartbeat_period") s.heartbeat_period = to_double(key, value) * 1000.0;
    else if (key == "heartbeat_timeout") {
      s.heartbeat_timeout = to_double(key, value) * 1000.0;
      timeout_set = true;
    } else if (key == "probe_period") s.probe_period = to_double(key, value) * 1000.0;
    else if (key == "ewma_alpha") s.ewma_alpha = to_double(key, value);
    else if (key == "partition_policy") {
      if (value == "homogenized") s.policy = PartitionPolicy::kHomogenized;
      else if (value == "equal") s.policy = PartitionPolicy::kEqual;
      else config_error("partition_policy must be 'homogenized' or 'equal'");
    } else if (key == "chunk_size") c.worker.chunk_size = to_u64(key, value);
    else if (key == "busy_threshold") c.worker.busy_threshold = to_double(key, value);
    else config_error("unknown config key '" + key + "'");
  }
  if (!timeout_set) s.heartbeat_timeout = 3.0 * s.heartbeat_period;
  c.worker.heartbeat_period = s.heartbeat_period;
  s.validate();
  c.worker.validate();
  return c;
}

TdaConfig TdaConfig::load(const std::string& path) { return from(KeyValues::load(path)); }

}  // namespace tda
