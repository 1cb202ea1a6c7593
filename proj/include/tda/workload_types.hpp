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
#include <string>
#include <variant>
#include <vector>

namespace tda {

/// Dense row-major matrix of doubles.
struct Matrix {
  std::uint64_t rows = 0;
  std::uint64_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::uint64_t r, std::uint64_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& at(std::uint64_t i, std::uint64_t j) { return data[i * cols + j]; }
  double at(std::uint64_t i, std::uint64_t j) const { return data[i * cols + j]; }

  static Matrix identity(std::uint64_t n);

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

/// Linear search: a record matches when its key contains the pattern.
struct SearchSpec {
  std::string pattern;

  friend bool operator==(const SearchSpec&, const SearchSpec&) = default;
};

/// C = A * B partitioned over the rows of A.
struct MatMulSpec {
  Matrix a;
  Matrix b;

  friend bool operator==(const MatMulSpec&, const MatMulSpec&) = default;
};

using WorkloadSpec = std::variant<SearchSpec, MatMulSpec>;

/// A workload together with its item count N. Items are record ids for
/// search and row indices of A for matmul.
struct JobSpec {
  WorkloadSpec workload;
  std::uint64_t size = 0;

  friend bool operator==(const JobSpec&, const JobSpec&) = default;
};

struct SearchMatch {
  std::uint64_t id = 0;
  std::string key;

  friend bool operator==(const SearchMatch&, const SearchMatch&) = default;
};

struct SearchPayload {
  std::vector<SearchMatch> matches;

  friend bool operator==(const SearchPayload&, const SearchPayload&) = default;
};

/// Rows of C covering some row range of A.
struct MatMulPayload {
  Matrix rows;

  friend bool operator==(const MatMulPayload&, const MatMulPayload&) = default;
};

using Payload = std::variant<SearchPayload, MatMulPayload>;

}  // namespace tda
