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

#include <compare>
#include <cstdint>
#include <functional>
#include <string>

namespace tda {

/// Opaque, comparable network address ("host:port" over TCP, node name in
/// the simulator).
using Address = std::string;

/// Milliseconds. Logical time in the simulator, steady-clock time over TCP.
using Millis = double;

using JobId = std::uint64_t;
using SubId = std::uint32_t;

/// Worker identity assigned by the coordinator at registration.
struct NodeId {
  std::uint64_t value = 0;

  friend auto operator<=>(const NodeId&, const NodeId&) = default;
};

/// Half-open item range [start, end).
struct Range {
  std::uint64_t start = 0;
  std::uint64_t end = 0;

  std::uint64_t length() const { return end - start; }
  bool empty() const { return start == end; }
  bool contains(std::uint64_t i) const { return i >= start && i < end; }
  bool overlaps(const Range& o) const { return start < o.end && o.start < end; }

  friend auto operator<=>(const Range&, const Range&) = default;
};

std::string to_string(const Range& r);

}  // namespace tda

template <>
struct std::hash<tda::NodeId> {
  std::size_t operator()(const tda::NodeId& id) const noexcept {
    return std::hash<std::uint64_t>{}(id.value);
  }
};
