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

#include <memory>

#include "doctest.h"
#include "support.hpp"
#include "tda/worker.hpp"

using namespace tda;
using test::FakeContext;

namespace {

struct Fixture {
  explicit Fixture(std::uint64_t records = 1000, std::uint64_t chunk = 100) {
    WorkerConfig c;
    c.chunk_size = chunk;
    table = std::make_shared<const RecordTable>(RecordTable::generate(4, records));
    worker = std::make_unique<Worker>("coord", 1.0, LoadSource::from_sampler([this] { return std::optional(load); }),
                                      c, table);
    worker->on_start(ctx);
    worker->on_message(ctx, "coord", msg::RegisterAck{NodeId{1}});
    ctx.sent.clear();
  }

  msg::SubJobAssign assign(Range r, SubId sub = 0) {
    msg::SubJobAssign a{1, sub, SearchSpec{"a"}, r, "client"};
    worker->on_message(ctx, "coord", a);
    return a;
  }

  void run_chunks(int max = 1000) {
    for (int i = 0; i < max && ctx.fire(*worker, Worker::kChunkTimer); ++i) {
    }
  }

  FakeContext ctx{"w"};
  double load = 0;
  std::shared_ptr<const RecordTable> table;
  std::unique_ptr<Worker> worker;
};

}  // namespace

TEST_SUITE("worker") {
  TEST_CASE("registers, heartbeats at once and then periodically") {
    FakeContext ctx{"w"};
    Worker w("coord", 2.5, LoadSource::scripted({0.25}), WorkerConfig{}, nullptr);
    w.on_start(ctx);
    auto regs = ctx.sent_of<msg::Register>();
    REQUIRE(regs.size() == 1);
    CHECK(regs[0].second.perf_param == 2.5);
    w.on_message(ctx, "coord", msg::RegisterAck{NodeId{4}});
    auto hbs = ctx.sent_of<msg::Heartbeat>();
    REQUIRE(hbs.size() == 1);
    CHECK(hbs[0].second.node_id == NodeId{4});
    CHECK(hbs[0].second.load == 0.25);
    CHECK_FALSE(ctx.has_timer(Worker::kRegisterTimer));
    REQUIRE(ctx.fire(w, Worker::kHeartbeatTimer));
    CHECK(ctx.now_ == 30000);
    CHECK(ctx.sent_of<msg::Heartbeat>().size() == 2);
  }

  TEST_CASE("retries registration with capped exponential backoff") {
    FakeContext ctx{"w"};
    ctx.unreachable.insert("coord");
    Worker w("coord", 1.0, LoadSource::scripted({0}), WorkerConfig{}, nullptr);
    w.on_start(ctx);
    std::vector<Millis> gaps;
    Millis last = 0;
    for (int i = 0; i < 9; ++i) {
      REQUIRE(ctx.fire(w, Worker::kRegisterTimer));
      gaps.push_back(ctx.now_ - last);
      last = ctx.now_;
    }
    CHECK(gaps == std::vector<Millis>{1000, 2000, 4000, 8000, 16000, 32000, 60000, 60000, 60000});
    ctx.unreachable.clear();
    REQUIRE(ctx.fire(w, Worker::kRegisterTimer));
    CHECK_FALSE(ctx.sent_of<msg::Register>().empty());
    w.on_message(ctx, "coord", msg::RegisterAck{NodeId{1}});
    CHECK(w.node_id() == NodeId{1});
  }

  TEST_CASE("unloaded run sends one full fragment") {
    Fixture f;
    auto a = f.assign({0, 1000});
    CHECK(f.ctx.sent_of<msg::SubJobAccept>().size() == 1);
    f.run_chunks();
    auto frags = f.ctx.sent_of<msg::ResultFragment>();
    REQUIRE(frags.size() == 1);
    CHECK(frags[0].first == "client");
    CHECK(frags[0].second.range == Range{0, 1000});
    CHECK(frags[0].second.payload == Payload{search_range(*f.table, SearchSpec{"a"}, {0, 1000})});
    CHECK(f.ctx.sent_of<msg::SubJobComplete>().size() == 1);
    CHECK(f.ctx.sent_of<msg::RefusalRequest>().empty());
  }

  TEST_CASE("overload then grant delivers the prefix") {
    Fixture f;
    auto a = f.assign({0, 1000});
    for (int i = 0; i < 6; ++i) REQUIRE(f.ctx.fire(*f.worker, Worker::kChunkTimer));
    f.load = 0.9;
    f.ctx.sent.clear();
    REQUIRE(f.ctx.fire(*f.worker, Worker::kChunkTimer));
    auto reqs = f.ctx.sent_of<msg::RefusalRequest>();
    REQUIRE(reqs.size() == 1);
    CHECK(reqs[0].second.progress_marker.position == 700);
    CHECK_FALSE(f.ctx.has_timer(Worker::kChunkTimer));  // paused
    f.worker->on_message(f.ctx, "coord", msg::RefusalGrant{a.job_id, a.sub_id});
    auto frags = f.ctx.sent_of<msg::ResultFragment>();
    REQUIRE(frags.size() == 1);
    CHECK(frags[0].second.range == Range{0, 700});
    CHECK(frags[0].second.payload == Payload{search_range(*f.table, SearchSpec{"a"}, {0, 700})});
    CHECK(f.ctx.sent_of<msg::SubJobComplete>().at(0).second.range == Range{0, 700});
    CHECK(f.worker->queued() == 0);
  }

  TEST_CASE("deny completes the range with the same bytes as an unloaded run") {
    Fixture plain;
    plain.assign({0, 1000});
    plain.run_chunks();
    auto want = encode_frame(plain.ctx.sent_of<msg::ResultFragment>().at(0).second);

    Fixture f;
    auto a = f.assign({0, 1000});
    f.load = 0.95;
    REQUIRE(f.ctx.fire(*f.worker, Worker::kChunkTimer));
    REQUIRE(f.ctx.sent_of<msg::RefusalRequest>().size() == 1);
    f.worker->on_message(f.ctx, "coord", msg::RefusalDeny{a.job_id, a.sub_id});
    f.run_chunks();
    // suppressed until a heartbeat reports a lower load: one refusal only
    CHECK(f.ctx.sent_of<msg::RefusalRequest>().size() == 1);
    auto frags = f.ctx.sent_of<msg::ResultFragment>();
    REQUIRE(frags.size() == 1);
    CHECK(encode_frame(frags[0].second) == want);
  }

  TEST_CASE("a heartbeat at low load lifts the suppression") {
    Fixture f(5000);
    auto a = f.assign({0, 5000});
    f.load = 0.95;
    REQUIRE(f.ctx.fire(*f.worker, Worker::kChunkTimer));
    f.worker->on_message(f.ctx, "coord", msg::RefusalDeny{a.job_id, a.sub_id});
    REQUIRE(f.ctx.fire(*f.worker, Worker::kChunkTimer));
    CHECK(f.ctx.sent_of<msg::RefusalRequest>().size() == 1);
    f.load = 0.1;
    f.ctx.fire(*f.worker, Worker::kHeartbeatTimer);
    f.load = 0.95;
    REQUIRE(f.ctx.fire(*f.worker, Worker::kChunkTimer));
    CHECK(f.ctx.sent_of<msg::RefusalRequest>().size() == 2);
  }

  TEST_CASE("probes are echoed mid-execution") {
    Fixture f;
    f.ctx.cost_per_item = 1;
    f.assign({0, 1000});
    f.worker->on_message(f.ctx, "coord", msg::Probe{42});
    auto echoes = f.ctx.sent_of<msg::ProbeEcho>();
    REQUIRE(echoes.size() == 1);
    CHECK(echoes[0].second.nonce == 42);
    CHECK(f.ctx.sent_of<msg::ResultFragment>().empty());
  }

  TEST_CASE("unsupported work is rejected") {
    FakeContext ctx{"w"};
    Worker w("coord", 1.0, LoadSource::scripted({0}), WorkerConfig{}, nullptr);
    w.on_start(ctx);
    w.on_message(ctx, "coord", msg::RegisterAck{NodeId{1}});
    w.on_message(ctx, "coord", msg::SubJobAssign{1, 0, SearchSpec{"a"}, {0, 10}, "client"});
    CHECK(ctx.sent_of<msg::SubJobReject>().size() == 1);
    CHECK(ctx.sent_of<msg::SubJobAccept>().empty());
  }

  TEST_CASE("an unreachable client is tried four times then reported") {
    Fixture f;
    f.ctx.unreachable.insert("client");
    f.assign({0, 1000});
    f.run_chunks();
    CHECK(f.ctx.sent_of<msg::ResultFragment>().empty());
    auto rej = f.ctx.sent_of<msg::SubJobReject>();
    REQUIRE(rej.size() == 1);
    CHECK(rej[0].second.reason == "client unreachable");
  }

  TEST_CASE("queued sub-jobs run in order") {
    Fixture f;
    f.assign({0, 300}, 0);
    f.assign({300, 1000}, 1);
    f.run_chunks();
    auto frags = f.ctx.sent_of<msg::ResultFragment>();
    REQUIRE(frags.size() == 2);
    CHECK(frags[0].second.range == Range{0, 300});
    CHECK(frags[1].second.range == Range{300, 1000});
  }

  TEST_CASE("losing the coordinator triggers re-registration") {
    Fixture f;
    f.worker->on_peer_lost(f.ctx, "coord");
    CHECK_FALSE(f.worker->node_id());
    REQUIRE(f.ctx.fire(*f.worker, Worker::kRegisterTimer));
    CHECK(f.ctx.sent_of<msg::Register>().size() == 1);
  }

  TEST_CASE("load sources") {
    auto s = LoadSource::scripted({0.1, 0.9});
    CHECK(s.measure() == 0.1);
    CHECK(s.measure() == 0.9);
    CHECK(s.measure() == 0.9);
    auto failing = LoadSource::from_sampler([] { return std::optional<double>(); });
    CHECK(failing.measure() == 0.0);
    auto hot = LoadSource::from_sampler([] { return std::optional<double>(1.7); });
    CHECK(hot.measure() == 1.0);
    double v = 0.4;
    bool fail = false;
    auto flaky = LoadSource::from_sampler([&]() -> std::optional<double> {
      if (fail) return std::nullopt;
      return v;
    });
    CHECK(flaky.measure() == 0.4);
    fail = true;
    CHECK(flaky.measure() == 0.4);
    auto host = LoadSource::sampled();
    double h = host.measure();
    CHECK(h >= 0.0);
    CHECK(h <= 1.0);
  }
}
