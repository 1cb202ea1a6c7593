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

// The two partitionable jobs: linear record search and row-partitioned
// matrix multiplication. Range executors use OpenMP over the items of their
// range; the oracle_* functions are plain serial references kept as ground
// truth for tests and benchmarks.

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tda/types.hpp"
#include "tda/workload_types.hpp"

namespace tda {

struct Record {
  std::uint64_t id = 0;
  std::string key;

  friend bool operator==(const Record&, const Record&) = default;
};

/// Records with ids 0..count-1. Keys are 12 lowercase letters.
class RecordTable {
 public:
  RecordTable() = default;
  explicit RecordTable(std::vector<Record> records);

  static RecordTable generate(std::uint64_t seed, std::uint64_t count);

  /// Newline-delimited `id,key`.
  static RecordTable load(const std::string& path);
  void save(const std::string& path) const;
  std::string to_text() const;

  std::uint64_t size() const { return records_.size(); }
  const Record& operator[](std::uint64_t i) const { return records_[i]; }
  const std::vector<Record>& records() const { return records_; }

 private:
  std::vector<Record> records_;
};

inline constexpr std::size_t kRecordKeyLength = 12;

/// Matches of spec in table with id in r, ascending by id.
SearchPayload search_range(const RecordTable& table, const SearchSpec& spec, Range r);

/// Rows r of A * B.
MatMulPayload matmul_range(const MatMulSpec& spec, Range r);

/// Dispatches to the executor for spec. table may be null for matmul.
Payload execute_range(const WorkloadSpec& spec, const RecordTable* table, Range r);

/// Item count N of a workload (table size for search, rows of A for matmul).
std::uint64_t item_count(const WorkloadSpec& spec, const RecordTable* table);

/// Appends the items of `more` (which must directly follow `into`) to `into`.
void append_payload(Payload& into, Payload&& more);

/// An empty payload of the right kind for spec.
Payload empty_payload(const WorkloadSpec& spec);

/// Stitches disjoint fragments covering `total` into the full result, in
/// range order regardless of input order. Throws Error{kMergeError} on a
/// gap, an overlap, or mixed payload kinds.
Payload merge(std::vector<std::pair<Range, Payload>> fragments, Range total);

SearchPayload oracle_search(const RecordTable& table, const SearchSpec& spec);
Matrix oracle_matmul(const Matrix& a, const Matrix& b);
Payload oracle(const WorkloadSpec& spec, const RecordTable* table);

/// Plain-text matrix: one row per line, entries separated by spaces.
Matrix load_matrix(const std::string& path);
std::string matrix_to_text(const Matrix& m);

/// Human-readable rendering used by the client CLI.
std::string render_result(const Payload& p);

}  // namespace tda
