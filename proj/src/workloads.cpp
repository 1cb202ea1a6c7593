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

#include "tda/workloads.hpp"

#include <omp.h>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <type_traits>

#include "tda/error.hpp"

namespace tda {

namespace {

[[noreturn]] void workload_error(const std::string& why) { throw Error(ErrorCode::kWorkloadError, why); }

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

Matrix Matrix::identity(std::uint64_t n) {
  Matrix m(n, n);
  for (std::uint64_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
  return m;
}

RecordTable::RecordTable(std::vector<Record> records) : records_(std::move(records)) {
  for (std::uint64_t i = 0; i < records_.size(); ++i) {
    if (records_[i].id != i) workload_error("record ids must be 0..count-1 in order");
  }
}

RecordTable RecordTable::generate(std::uint64_t seed, std::uint64_t count) {
  // Raw engine output only: std::mt19937_64 is bit-specified, distributions are not.
  std::mt19937_64 rng(seed);
  std::vector<Record> records(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    records[i].id = i;
    records[i].key.resize(kRecordKeyLength);
    for (char& c : records[i].key) c = static_cast<char>('a' + rng() % 26);
  }
  return RecordTable(std::move(records));
}

RecordTable RecordTable::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) workload_error("cannot open data file " + path);
  std::vector<Record> records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto comma = line.find(',');
    if (comma == std::string::npos) workload_error("bad record line: " + line);
    Record r;
    auto [p, ec] = std::from_chars(line.data(), line.data() + comma, r.id);
    if (ec != std::errc() || p != line.data() + comma) workload_error("bad record id: " + line);
    r.key = line.substr(comma + 1);
    records.push_back(std::move(r));
  }
  return RecordTable(std::move(records));
}

std::string RecordTable::to_text() const {
  std::string out;
  out.reserve(records_.size() * (kRecordKeyLength + 8));
  for (const Record& r : records_) {
    out += std::to_string(r.id);
    out += ',';
    out += r.key;
    out += '\n';
  }
  return out;
}

void RecordTable::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) workload_error("cannot write " + path);
  out << to_text();
}

SearchPayload search_range(const RecordTable& table, const SearchSpec& spec, Range r) {
  if (r.start > r.end || r.end > table.size()) workload_error("search range " + to_string(r) + " out of bounds");
  if (spec.pattern.empty()) workload_error("empty search pattern");

  // Each thread scans a contiguous slice; concatenating slices in thread
  // order keeps ids ascending.
  std::vector<std::vector<SearchMatch>> per_thread;
#pragma omp parallel
  {
#pragma omp single
    per_thread.resize(static_cast<std::size_t>(omp_get_num_threads()));
    auto& local = per_thread[static_cast<std::size_t>(omp_get_thread_num())];
#pragma omp for schedule(static)
    for (std::uint64_t i = r.start; i < r.end; ++i) {
      const Record& rec = table[i];
      if (rec.key.find(spec.pattern) != std::string::npos) local.push_back({rec.id, rec.key});
    }
  }
  SearchPayload out;
  for (auto& v : per_thread) {
    out.matches.insert(out.matches.end(), std::make_move_iterator(v.begin()), std::make_move_iterator(v.end()));
  }
  return out;
}

MatMulPayload matmul_range(const MatMulSpec& spec, Range r) {
  const Matrix& a = spec.a;
  const Matrix& b = spec.b;
  if (a.cols != b.rows) workload_error("inner dimensions disagree");
  if (a.data.size() != a.rows * a.cols || b.data.size() != b.rows * b.cols) workload_error("matrix storage size mismatch");
  if (r.start > r.end || r.end > a.rows) workload_error("row range " + to_string(r) + " out of bounds");

  Matrix c(r.length(), b.cols);
  const auto rows = static_cast<std::int64_t>(r.length());
#pragma omp parallel for schedule(static)
  for (std::int64_t li = 0; li < rows; ++li) {
    const std::uint64_t i = r.start + static_cast<std::uint64_t>(li);
    double* crow = &c.data[static_cast<std::uint64_t>(li) * b.cols];
    for (std::uint64_t j = 0; j < b.cols; ++j) {
      double sum = 0.0;
      for (std::uint64_t k = 0; k < a.cols; ++k) sum += a.at(i, k) * b.at(k, j);
      crow[j] = sum;
    }
  }
  return MatMulPayload{std::move(c)};
}

Payload execute_range(const WorkloadSpec& spec, const RecordTable* table, Range r) {
  if (const auto* s = std::get_if<SearchSpec>(&spec)) {
    if (table == nullptr) workload_error("search workload needs a record table");
    return search_range(*table, *s, r);
  }
  return matmul_range(std::get<MatMulSpec>(spec), r);
}

std::uint64_t item_count(const WorkloadSpec& spec, const RecordTable* table) {
  if (std::holds_alternative<SearchSpec>(spec)) {
    if (table == nullptr) workload_error("search workload needs a record table");
    return table->size();
  }
  return std::get<MatMulSpec>(spec).a.rows;
}

Payload empty_payload(const WorkloadSpec& spec) {
  if (std::holds_alternative<SearchSpec>(spec)) return SearchPayload{};
  return MatMulPayload{Matrix(0, std::get<MatMulSpec>(spec).b.cols)};
}

void append_payload(Payload& into, Payload&& more) {
  if (into.index() != more.index()) throw Error(ErrorCode::kMergeError, "mixed payload kinds");
  if (auto* s = std::get_if<SearchPayload>(&into)) {
    auto& src = std::get<SearchPayload>(more).matches;
    s->matches.insert(s->matches.end(), std::make_move_iterator(src.begin()), std::make_move_iterator(src.end()));
    return;
  }
  Matrix& dst = std::get<MatMulPayload>(into).rows;
  Matrix& src = std::get<MatMulPayload>(more).rows;
  if (dst.rows == 0 && dst.data.empty()) dst.cols = src.cols;
  if (src.rows != 0 && dst.cols != src.cols) throw Error(ErrorCode::kMergeError, "row width mismatch");
  dst.data.insert(dst.data.end(), src.data.begin(), src.data.end());
  dst.rows += src.rows;
}

Payload merge(std::vector<std::pair<Range, Payload>> fragments, Range total) {
  if (fragments.empty()) throw Error(ErrorCode::kMergeError, "no fragments");
  std::sort(fragments.begin(), fragments.end(),
            [](const auto& x, const auto& y) { return x.first < y.first; });
  std::uint64_t at = total.start;
  Payload out = std::holds_alternative<SearchPayload>(fragments.front().second)
                    ? Payload{SearchPayload{}}
                    : Payload{MatMulPayload{}};
  for (auto& [range, payload] : fragments) {
    if (range.start > at) throw Error(ErrorCode::kMergeError, "gap before " + to_string(range));
    if (range.start < at) throw Error(ErrorCode::kMergeError, "overlap at " + to_string(range));
    append_payload(out, std::move(payload));
    at = range.end;
  }
  if (at != total.end) throw Error(ErrorCode::kMergeError, "fragments end at " + std::to_string(at));
  return out;
}

SearchPayload oracle_search(const RecordTable& table, const SearchSpec& spec) {
  SearchPayload out;
  for (const Record& rec : table.records()) {
    if (rec.key.find(spec.pattern) != std::string::npos) out.matches.push_back({rec.id, rec.key});
  }
  return out;
}

Matrix oracle_matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) workload_error("inner dimensions disagree");
  Matrix c(a.rows, b.cols);
  for (std::uint64_t i = 0; i < a.rows; ++i)
    for (std::uint64_t j = 0; j < b.cols; ++j) {
      double sum = 0.0;
      for (std::uint64_t k = 0; k < a.cols; ++k) sum += a.at(i, k) * b.at(k, j);
      c.at(i, j) = sum;
    }
  return c;
}

Payload oracle(const WorkloadSpec& spec, const RecordTable* table) {
  if (const auto* s = std::get_if<SearchSpec>(&spec)) {
    if (table == nullptr) workload_error("search workload needs a record table");
    return oracle_search(*table, *s);
  }
  const auto& m = std::get<MatMulSpec>(spec);
  return MatMulPayload{oracle_matmul(m.a, m.b)};
}

Matrix load_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) workload_error("cannot open matrix file " + path);
  Matrix m;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream row(line);
    std::vector<double> values;
    double v = 0;
    while (row >> v) values.push_back(v);
    if (!row.eof()) workload_error("bad matrix entry in " + path);
    if (values.empty()) continue;
    if (m.rows == 0) m.cols = values.size();
    else if (values.size() != m.cols) workload_error("ragged matrix in " + path);
    m.data.insert(m.data.end(), values.begin(), values.end());
    ++m.rows;
  }
  return m;
}

std::string matrix_to_text(const Matrix& m) {
  std::string out;
  for (std::uint64_t i = 0; i < m.rows; ++i) {
    for (std::uint64_t j = 0; j < m.cols; ++j) {
      if (j) out += ' ';
      out += format_double(m.at(i, j));
    }
    out += '\n';
  }
  return out;
}

std::string render_result(const Payload& p) {
  if (const auto* s = std::get_if<SearchPayload>(&p)) {
    std::string out;
    for (const auto& m : s->matches) {
      out += std::to_string(m.id);
      out += ',';
      out += m.key;
      out += '\n';
    }
    return out;
  }
  return matrix_to_text(std::get<MatMulPayload>(p).rows);
}

}  // namespace tda
