// Copyright 2026 The ecstore Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <map>
#include <set>

#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace ecstore;
using fixture::Grid;
using fixture::GridOptions;
using fixture::TempDir;

namespace {

std::uint64_t distinct_chunk_bytes(const Bytes& data) {
  std::set<ChunkId> seen;
  std::uint64_t total = 0;
  for (const auto& c : chunk_stream(data))
    if (seen.insert(c.id).second) total += c.length();
  return total;
}

std::size_t distinct_chunks(const Bytes& data) {
  std::set<ChunkId> seen;
  for (const auto& c : chunk_stream(data)) seen.insert(c.id);
  return seen.size();
}

/// The only chunk of a file no longer than the minimum chunk size.
ChunkRef first_ref(Client& c, const std::string& name) {
  auto meta = c.cache().find_meta(name);
  REQUIRE(meta.has_value());
  REQUIRE(meta->chunks.size() == 1);
  return meta->chunks.at(0);
}

}  // namespace

TEST_SUITE("client") {
  TEST_CASE("uploads send only new chunk bytes") {
    Grid g({.clusters = 2, .params = {10, 5}});
    auto c = g.make_client("alice");
    const auto data = oracle::random_bytes(1, 1 << 20);
    auto first = c.upload("big", data);
    CHECK(first.chunk_bytes_sent == data.size());
    CHECK(first.chunks_missing == first.chunks_total);
    CHECK(first.bytes_sent >= data.size());
    CHECK(first.bytes_sent < data.size() + data.size() / 50);
    auto second = c.upload("big-copy", data);
    CHECK(second.chunk_bytes_sent == 0);
    CHECK(second.chunks_missing == 0);
  }

  TEST_CASE("upload bytes are chunk payloads plus framing") {
    Grid g({.clusters = 2, .params = {4, 2}});
    auto c = g.make_client("alice");
    Bytes data = oracle::random_bytes(2, 200'000);
    auto report = c.upload("f", data);
    // StoreChunk framing: header, id, cluster, blob length.
    const std::uint64_t per_chunk = wire::kHeaderSize + 20 + 2 + 4;
    const std::uint64_t meta_frame = wire::kHeaderSize + 2 + 5 + encoded_size(report.meta) + 4 + 4 * report.chunks_total;
    // The closing GetMeta that confirms the placed copy.
    const std::uint64_t confirm_frame = wire::kHeaderSize + 2 + 5 + 2 + 1;
    CHECK(report.bytes_sent ==
          meta_frame + confirm_frame + report.chunk_bytes_sent + per_chunk * report.chunks_missing);
  }

  TEST_CASE("internal repetition is sent once") {
    Grid g({.clusters = 2, .params = {4, 2}});
    auto c = g.make_client("alice");
    const auto head = oracle::random_bytes(3, 50'000), block = oracle::random_bytes(4, 100 << 10),
               tail = oracle::random_bytes(5, 50'000);
    Bytes data = head;
    data.insert(data.end(), block.begin(), block.end());
    data.insert(data.end(), block.begin(), block.end());
    data.insert(data.end(), tail.begin(), tail.end());
    auto report = c.upload("rep", data);
    CHECK(report.chunk_bytes_sent == distinct_chunk_bytes(data));
    CHECK(report.chunk_bytes_sent <= data.size() - block.size() + 3 * 8192);
    CHECK(report.chunk_bytes_sent >= data.size() - block.size());
  }

  TEST_CASE("empty file") {
    Grid g({});
    auto c = g.make_client("alice");
    auto report = c.upload("empty", {});
    CHECK(report.chunks_total == 0);
    CHECK(report.chunk_bytes_sent == 0);
    CHECK(report.meta.total_len == 0);
    auto other = g.make_client("alice");
    auto back = other.retrieve("empty");
    CHECK(back.data.empty());
    CHECK(back.chunks_fetched == 0);
  }

  TEST_CASE("same device reads from its cache") {
    Grid g({.clusters = 2, .params = {4, 2}});
    auto c = g.make_client("alice");
    const auto data = oracle::random_bytes(6, 300'000);
    c.upload("f", data);
    const auto sent = c.transport().stats().messages_sent;
    auto back = c.retrieve("f");
    CHECK(back.data == data);
    CHECK(back.chunks_fetched == 0);
    CHECK(back.chunks_cached == distinct_chunks(data));
    CHECK(c.transport().stats().messages_sent == sent);
  }

  TEST_CASE("a second device fetches everything") {
    for (auto mode : {BindingMode::clb, BindingMode::ulb})
      for (CodingParams p : {CodingParams{1, 1}, CodingParams{4, 2}, CodingParams{10, 5}}) {
        Grid g({.clusters = 3, .params = p, .mode = mode});
        auto a = g.make_client("alice", 0);
        const auto data = oracle::random_bytes(7 + p.n, 250'000);
        a.upload("f", data);
        auto b = g.make_client("alice", 0);
        auto back = b.retrieve("f");
        CHECK(back.data == data);
        CHECK(back.chunks_fetched == distinct_chunks(data));
        CHECK(back.chunks_cached == 0);
      }
  }

  TEST_CASE("shared content reads back the same whoever stored it") {
    Grid g({.clusters = 3, .params = {4, 2}});
    auto alice = g.make_client("alice", 0);
    auto bob = g.make_client("bob", 4);
    const auto common = oracle::random_bytes(8, 120'000);
    Bytes bob_file = oracle::random_bytes(9, 30'000);
    bob_file.insert(bob_file.end(), common.begin(), common.end());
    alice.upload("a", common);
    auto up = bob.upload("b", bob_file);
    CHECK(up.chunk_bytes_sent < bob_file.size() - common.size() + 2 * 8192);

    auto bob2 = g.make_client("bob", 4);
    CHECK(bob2.retrieve("b").data == bob_file);
    alice.remove("a");
    g.net().run();
    auto bob3 = g.make_client("bob", 4);
    CHECK(bob3.retrieve("b").data == bob_file);
    CHECK(check_consistency(g.nodes()).ok());
  }

  TEST_CASE("identity coding sends one request per chunk") {
    SimOptions so;
    so.model_handshake = false;
    Grid g({.clusters = 1, .params = {1, 1}, .sim = so});
    auto a = g.make_client("alice");
    const auto data = oracle::random_bytes(10, 1000);
    a.upload("f", data);
    auto b = g.make_client("alice");
    const auto ref = first_ref(a, "f");
    const auto before = b.transport().stats().messages_sent;
    CHECK(b.fetch_chunk(ref) == data);
    CHECK(b.transport().stats().messages_sent - before == 1);
  }

  TEST_CASE("too many missing pieces is unrecoverable") {
    Grid g({.clusters = 1, .params = {10, 5}});
    auto a = g.make_client("alice");
    const auto data = oracle::random_bytes(11, 1000);
    a.upload("f", data);
    const auto ref = first_ref(a, "f");
    auto b = g.make_client("alice");
    for (std::size_t i = 0; i < 5; ++i) g.node(i).pieces().erase(ref.chunk_id, static_cast<std::uint8_t>(i));
    CHECK(b.fetch_chunk(ref) == data);
    g.node(9).pieces().erase(ref.chunk_id, 9);
    try {
      b.fetch_chunk(ref);
      FAIL("expected unrecoverable_chunk");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::unrecoverable_chunk);
    }
  }

  TEST_CASE("a corrupted piece is outvoted by the digest") {
    Grid g({.clusters = 1, .params = {6, 3}});
    auto a = g.make_client("alice");
    const auto data = oracle::random_bytes(12, 1000);
    a.upload("f", data);
    const auto ref = first_ref(a, "f");
    auto bad = *g.node(1).pieces().get(ref.chunk_id, 1);
    bad.payload[10] ^= 0xFF;
    g.node(1).pieces().put(bad);
    auto b = g.make_client("alice");
    CHECK(b.fetch_chunk(ref) == data);
  }

  TEST_CASE("completion is the k-th fastest reply plus decode") {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 10; ++trial) {
      SimOptions so;
      so.latency = {2, 0, 0, 1};
      so.model_handshake = false;
      Grid g({.clusters = 1, .params = {10, 5}, .sim = so});
      auto a = g.make_client("alice");
      const auto data = oracle::random_bytes(14 + trial, 1024);
      a.upload("f", data);
      const auto ref = first_ref(a, "f");
      std::vector<double> rtt;
      for (std::size_t i = 0; i < 10; ++i) {
        const double d = 1 + static_cast<double>(rng() % 5000) / 10.0;
        g.net().set_latency_override(g.topology().clusters[0].members[i], {d, 0, 0, 1});
        rtt.push_back(2 + d);
      }
      std::sort(rtt.begin(), rtt.end());
      ClientOptions co;
      co.user = "alice";
      co.switching_node = "c0n0";
      co.decode_ms_per_byte = 0.001;
      Client b(g.raw_transport("reader" + std::to_string(trial)), g.topology(), co);
      const double start = g.net().now();
      CHECK(b.fetch_chunk(ref) == data);
      CHECK(g.net().now() - start == doctest::Approx(rtt[4] + 0.001 * 1024));
    }
  }

  TEST_CASE("slow half of the cluster does not delay a read") {
    SimOptions so;
    so.latency = {10, 0, 0, 1};
    Grid g({.clusters = 1, .params = {10, 5}, .sim = so});
    auto a = g.make_client("alice");
    const auto data = oracle::random_bytes(30, 1024);
    a.upload("f", data);
    const auto ref = first_ref(a, "f");
    for (std::size_t i = 5; i < 10; ++i) g.net().set_latency_override(g.topology().clusters[0].members[i], {500, 0, 0, 1});
    auto b = g.make_client("alice");
    const double start = g.net().now();
    CHECK(b.fetch_chunk(ref) == data);
    const double took = g.net().now() - start;
    CHECK(took >= 10);
    CHECK(took <= 50);
  }

  TEST_CASE("late replies in adversarial orders never corrupt a read") {
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
      SimOptions so;
      so.latency = {5, 0.0005, 20, seed};
      Grid g({.clusters = 2, .params = {6, 3}, .sim = so});
      std::mt19937_64 rng(seed);
      for (const auto& addr : g.topology().all_nodes())
        g.net().set_latency_override(addr, {static_cast<double>(rng() % 100), 0.0005, static_cast<double>(rng() % 40), seed});
      auto a = g.make_client("alice", 0, 2 + seed % 4);
      const auto data = oracle::random_bytes(100 + seed, 60'000);
      a.upload("f", data);
      auto b = g.make_client("alice", 0, 1 + seed % 5);
      CHECK(b.retrieve("f").data == data);
      auto c = g.make_client("alice", 0, 8);
      CHECK(c.retrieve("f").data == data);
      g.net().run();
    }
  }

  TEST_CASE("retrieve of an unknown file is not-found") {
    Grid g({});
    auto c = g.make_client("alice");
    try {
      c.retrieve("nope");
      FAIL("expected not_found");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::not_found);
    }
    CHECK_THROWS_AS(c.remove("nope"), Error);
  }

  TEST_CASE("two devices converge after sync") {
    Grid g({.clusters = 2, .params = {4, 2}});
    auto d1 = g.make_client("alice", 0);
    auto d2 = g.make_client("alice", 0);
    std::mt19937_64 rng(21);
    struct Version {
      std::uint64_t ts;
      Bytes data;
    };
    std::map<std::string, std::vector<Version>> versions;
    for (int i = 0; i < 100; ++i) {
      const auto name = "f" + std::to_string(i);
      const bool on1 = i < 70, on2 = i >= 30;
      if (on1) {
        Version v{1000 + rng() % 100, oracle::random_bytes(rng(), 2000 + rng() % 3000)};
        d1.upload(name, v.data, v.ts);
        versions[name].push_back(v);
      }
      if (on2) {
        Version v{1000 + rng() % 100, oracle::random_bytes(rng(), 2000 + rng() % 3000)};
        d2.upload(name, v.data, v.ts);
        versions[name].push_back(v);
      }
    }
    d1.sync();
    d2.sync();
    d1.sync();

    // Oracle: the server holds, per file, the latest copy it was offered,
    // and each device ends up with whatever sync_meta picks against it.
    std::map<std::string, FileMeta> server;
    for (const auto& m : d1.cache().metas()) server[m.file_name] = m;
    REQUIRE(server.size() == 100);
    auto d2_metas = d2.cache().metas();
    REQUIRE(d2_metas.size() == 100);
    for (const auto& m : d2_metas) CHECK(server.at(m.file_name) == m);
    for (const auto& [name, vs] : versions) {
      std::uint64_t best = 0;
      for (const auto& v : vs) best = std::max(best, v.ts);
      CHECK(server.at(name).timestamp == best);
    }
    auto reader = g.make_client("alice", 0);
    for (const auto& [name, meta] : server) {
      const auto data = reader.retrieve(name).data;
      bool matches = false;
      for (const auto& v : versions.at(name)) matches |= v.ts == meta.timestamp && v.data == data;
      CHECK(matches);
    }
    CHECK(check_consistency(g.nodes()).ok());
  }

  TEST_CASE("disk cache survives and verifies") {
    TempDir dir;
    const auto data = oracle::random_bytes(40, 20'000);
    const auto id = chunk_id(data);
    {
      LocalCache cache(1 << 20, dir.path());
      cache.put_chunk(id, data);
      FileMeta m;
      m.user_id = "u";
      m.file_name = "f";
      cache.put_meta(m);
      CHECK_THROWS_AS(cache.put_chunk(chunk_id(oracle::random_bytes(41, 10)), data), Error);
    }
    LocalCache again(1 << 20, dir.path());
    CHECK(again.get_chunk(id) == data);
    CHECK(again.find_meta("f").has_value());

    LocalCache small(30'000);
    small.put_chunk(id, data);
    const auto other = oracle::random_bytes(42, 20'000);
    small.put_chunk(chunk_id(other), other);
    CHECK_FALSE(small.has_chunk(id));
    CHECK(small.has_chunk(chunk_id(other)));
    CHECK(small.chunk_bytes() <= 30'000);
  }
}
