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

// The seam between role state machines (coordinator, worker, client) and
// the transports that drive them. A node only ever sees a Context; the TCP
// runtime and the simulator each provide one, so the same node code runs
// under both.

#pragma once

#include <cstdint>

#include "tda/protocol.hpp"
#include "tda/types.hpp"

namespace tda {

using TimerId = std::uint64_t;

class Context {
 public:
  virtual ~Context() = default;

  virtual Millis now() const = 0;
  virtual const Address& self() const = 0;

  /// Queues m for delivery. Returns false when the peer cannot be reached
  /// at all (unknown address, refused connection). Delivery to a peer that
  /// silently died is not reported.
  virtual bool send(const Address& to, const Message& m) = 0;

  /// Calls Node::on_timer(tag) after delay.
  virtual TimerId set_timer(Millis delay, std::uint64_t tag) = 0;
  virtual void cancel_timer(TimerId id) = 0;

  /// Drops the link to a misbehaving peer.
  virtual void disconnect(const Address& peer) = 0;

  /// Modelled execution time of `items` workload items for `job`, also
  /// accounted as busy time. Zero where execution is real.
  virtual Millis work_cost(JobId job, std::uint64_t items) = 0;

  /// Modelled fixed cost of taking on one sub-job.
  virtual Millis assignment_overhead() = 0;

  /// Ends the node's service loop (TCP) or marks it finished (simulator).
  virtual void stop() = 0;
};

class Node {
 public:
  virtual ~Node() = default;
  virtual void on_start(Context& ctx) = 0;
  virtual void on_message(Context& ctx, const Address& from, const Message& m) = 0;
  virtual void on_timer(Context& ctx, std::uint64_t tag) = 0;
  virtual void on_peer_lost(Context&, const Address&) {}
};

}  // namespace tda
