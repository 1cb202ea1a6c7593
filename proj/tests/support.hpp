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

// Shared test helpers. The reference computations here are written
// independently of the library so they can serve as oracles.

#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "tda/protocol.hpp"
#include "tda/runtime.hpp"
#include "tda/workloads.hpp"

namespace tda::test {

/// Records everything a node does; time only moves when a test says so.
class FakeContext : public Context {
 public:
  struct Sent {
    Address to;
    Message message;
  };
  struct Timer {
    TimerId id;
    Millis at;
    std::uint64_t tag;
  };

  explicit FakeContext(Address self = "self") : self_(std::move(self)) {}

  Millis now() const override { return now_; }
  const Address& self() const override { return self_; }
  bool send(const Address& to, const Message& m) override {
    if (unreachable.count(to)) return false;
    sent.push_back({to, m});
    return true;
  }
  TimerId set_timer(Millis delay, std::uint64_t tag) override {
    timers.push_back({next_++, now_ + delay, tag});
    return timers.back().id;
  }
  void cancel_timer(TimerId id) override {
    std::erase_if(timers, [&](const Timer& t) { return t.id == id; });
  }
  void disconnect(const Address& peer) override { disconnected.push_back(peer); }
  Millis work_cost(JobId, std::uint64_t items) override { return static_cast<Millis>(items) * cost_per_item; }
  Millis assignment_overhead() override { return overhead; }
  void stop() override { stopped = true; }

  /// Pops and returns the earliest pending timer tag with the given value,
  /// advancing the clock to its deadline.
  bool fire(Node& node, std::uint64_t tag) {
    auto it = std::min_element(timers.begin(), timers.end(), [&](const Timer& a, const Timer& b) {
      if ((a.tag == tag) != (b.tag == tag)) return a.tag == tag;
      return a.at < b.at;
    });
    if (it == timers.end() || it->tag != tag) return false;
    Timer t = *it;
    timers.erase(it);
    now_ = std::max(now_, t.at);
    node.on_timer(*this, t.tag);
    return true;
  }

  bool has_timer(std::uint64_t tag) const {
    return std::any_of(timers.begin(), timers.end(), [&](const Timer& t) { return t.tag == tag; });
  }

  template <class T>
  std::vector<std::pair<Address, T>> sent_of() const {
    std::vector<std::pair<Address, T>> out;
    for (const Sent& s : sent) {
      if (auto* p = std::get_if<T>(&s.message)) out.emplace_back(s.to, *p);
    }
    return out;
  }

  Millis now_ = 0;
  Millis cost_per_item = 0;
  Millis overhead = 0;
  std::vector<Sent> sent;
  std::vector<Timer> timers;
  std::vector<Address> disconnected;
  std::set<Address> unreachable;
  bool stopped = false;

 private:
  Address self_;
  TimerId next_ = 1;
};

// --- random messages --------------------------------------------------------

inline std::string random_text(std::mt19937_64& rng, std::size_t max_len, bool nonempty = false) {
  static const std::string alphabet = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJ0123456789 _-:./\"\\\t\n\xc3\xa9";
  std::size_t len = rng() % (max_len + 1);
  if (nonempty && len == 0) len = 1;
  std::string s;
  for (std::size_t i = 0; i < len; ++i) {
    char c = alphabet[rng() % alphabet.size()];
    if (static_cast<unsigned char>(c) >= 0x80) {
      s += "\xc3\xa9";  // keep UTF-8 well formed
    } else {
      s += c;
    }
  }
  return s;
}

inline double random_double(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(-1e6, 1e6);
  return d(rng);
}

inline Matrix random_test_matrix(std::mt19937_64& rng, std::uint64_t r, std::uint64_t c) {
  Matrix m(r, c);
  for (double& x : m.data) x = random_double(rng);
  return m;
}

inline WorkloadSpec random_workload(std::mt19937_64& rng) {
  if (rng() % 2) return SearchSpec{random_text(rng, 10, true)};
  std::uint64_t m = 1 + rng() % 4, n = 1 + rng() % 4, p = 1 + rng() % 4;
  return MatMulSpec{random_test_matrix(rng, m, n), random_test_matrix(rng, n, p)};
}

inline Range random_range(std::mt19937_64& rng) {
  std::uint64_t a = rng() % 1000000, b = rng() % 1000000;
  return a <= b ? Range{a, b} : Range{b, a};
}

inline Payload random_payload(std::mt19937_64& rng) {
  if (rng() % 2) {
    SearchPayload p;
    for (std::uint64_t i = 0, n = rng() % 5; i < n; ++i) p.matches.push_back({rng() % 100000, random_text(rng, 12)});
    return p;
  }
  return MatMulPayload{random_test_matrix(rng, rng() % 3, 1 + rng() % 3)};
}

/// Uniform over the variant index, with random field values.
inline Message random_message(std::mt19937_64& rng) {
  auto u32 = [&] { return static_cast<SubId>(rng()); };
  auto load = [&] { return std::uniform_real_distribution<double>(0, 1)(rng); };
  switch (rng() % std::variant_size_v<Message>) {
    case 0: return msg::Register{0.001 + std::uniform_real_distribution<double>(0, 100)(rng)};
    case 1: return msg::RegisterAck{NodeId{rng()}};
    case 2: return msg::Heartbeat{NodeId{rng()}, load()};
    case 3: return msg::Probe{rng()};
    case 4: return msg::ProbeEcho{rng()};
    case 5: {
      WorkloadSpec w = random_workload(rng);
      return msg::JobRequest{JobSpec{std::move(w), 1 + rng() % 1000000}, random_text(rng, 20)};
    }
    case 6: return msg::SubJobAssign{rng(), u32(), random_workload(rng), random_range(rng), random_text(rng, 20)};
    case 7: return msg::SubJobAccept{rng(), u32()};
    case 8: return msg::SubJobComplete{rng(), u32(), random_range(rng)};
    case 9: return msg::SubJobReject{rng(), u32(), random_text(rng, 30)};
    case 10: return msg::RefusalRequest{rng(), u32(), ProgressMarker{rng(), rng()}};
    case 11: return msg::RefusalGrant{rng(), u32()};
    case 12: return msg::RefusalDeny{rng(), u32()};
    case 13: return msg::ResultFragment{rng(), u32(), random_range(rng), random_payload(rng)};
    case 14: return msg::JobAccepted{rng()};
    default: return msg::JobFailed{rng(), random_text(rng, 30)};
  }
}

// --- oracles ----------------------------------------------------------------

/// Straight scan over the record list.
inline std::vector<SearchMatch> naive_search(const std::vector<Record>& records, const std::string& pattern) {
  std::vector<SearchMatch> out;
  for (const Record& r : records) {
    if (r.key.find(pattern) != std::string::npos) out.push_back({r.id, r.key});
  }
  return out;
}

inline std::vector<std::vector<double>> triple_loop(const Matrix& a, const Matrix& b) {
  std::vector<std::vector<double>> c(a.rows, std::vector<double>(b.cols, 0.0));
  for (std::uint64_t i = 0; i < a.rows; ++i)
    for (std::uint64_t j = 0; j < b.cols; ++j)
      for (std::uint64_t k = 0; k < a.cols; ++k) c[i][j] += a.data[i * a.cols + k] * b.data[k * b.cols + j];
  return c;
}

inline double max_abs_diff(const Matrix& got, const std::vector<std::vector<double>>& want) {
  if (got.rows != want.size()) return 1e300;
  double worst = 0;
  for (std::uint64_t i = 0; i < got.rows; ++i) {
    if (got.cols != want[i].size()) return 1e300;
    for (std::uint64_t j = 0; j < got.cols; ++j) worst = std::max(worst, std::abs(got.at(i, j) - want[i][j]));
  }
  return worst;
}

using Rational = boost::multiprecision::cpp_rational;

/// Largest-remainder apportionment of n over weights, computed with exact
/// rationals. Ties on the remainder go to the lower id (index when ids is
/// empty).
inline std::vector<std::uint64_t> rational_apportion(std::uint64_t n, const std::vector<double>& weights,
                                                     std::vector<std::uint64_t> ids = {}) {
  if (ids.empty())
    for (std::size_t i = 0; i < weights.size(); ++i) ids.push_back(i);
  Rational total = 0;
  for (double w : weights) total += Rational(w);
  std::vector<std::uint64_t> sizes(weights.size());
  std::vector<std::tuple<Rational, std::uint64_t, std::size_t>> rem;
  std::uint64_t given = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    Rational share = Rational(n) * Rational(weights[i]) / total;
    boost::multiprecision::cpp_int fl = numerator(share) / denominator(share);
    sizes[i] = static_cast<std::uint64_t>(fl);
    given += sizes[i];
    rem.emplace_back(share - Rational(fl), ids[i], i);
  }
  std::sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) {
    if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
    return std::get<1>(a) < std::get<1>(b);
  });
  for (std::uint64_t i = 0; given < n; ++i, ++given) ++sizes[std::get<2>(rem[i])];
  return sizes;
}

/// rtt_ewma recurrence: first sample initialises, later ones blend.
inline double ewma(const std::vector<double>& samples, double alpha) {
  double v = samples.at(0);
  for (std::size_t i = 1; i < samples.size(); ++i) v = (1 - alpha) * v + alpha * samples[i];
  return v;
}

}  // namespace tda::test
