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

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any fails. Arguments, if given, select criteria by number.

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "ecstore/harness.hpp"
#include "ecstore/socket_transport.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "wire_fuzz.hpp"

using namespace ecstore;
using fixture::Grid;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream out;
  out.precision(digits);
  out << std::fixed << v;
  return out.str();
}

// ------------------------------------------------------------------ 1

Outcome erasure_round_trip() {
  const std::vector<std::size_t> sizes{1, 1024, 4096, 8192, 8193};
  std::uint64_t decodes = 0;
  std::mt19937_64 rng(1);
  for (std::uint8_t n = 1; n <= 10; ++n)
    for (std::uint8_t k = 1; k <= n; ++k) {
      const CodingParams p{n, k};
      for (auto size : sizes) {
        const auto data = oracle::random_bytes(rng(), size);
        const auto pieces = encode_chunk(data, p);
        auto try_subset = [&](const std::vector<std::size_t>& subset) {
          std::vector<CodedPiece> chosen;
          for (auto i : subset) chosen.push_back(pieces[i]);
          std::shuffle(chosen.begin(), chosen.end(), rng);
          ++decodes;
          return decode_chunk(chosen, p, size) == data;
        };
        if (oracle::binomial(n, k) <= 252) {
          bool ok = true;
          oracle::for_each_subset(n, k, [&](const std::vector<unsigned>& s) { ok = ok && try_subset({s.begin(), s.end()}); });
          if (!ok) return {false, "(" + std::to_string(n) + "," + std::to_string(k) + ") size " + std::to_string(size)};
        } else {
          std::vector<std::size_t> all(n);
          std::iota(all.begin(), all.end(), 0);
          for (int t = 0; t < 252; ++t) {
            std::shuffle(all.begin(), all.end(), rng);
            if (!try_subset({all.begin(), all.begin() + k}))
              return {false, "(" + std::to_string(n) + "," + std::to_string(k) + ") size " + std::to_string(size)};
          }
        }
      }
    }
  return {true, std::to_string(decodes) + " subset decodes bit-exact"};
}

// ------------------------------------------------------------------ 2

Outcome chunking_contract() {
  const ChunkParams params;
  std::mt19937_64 rng(2);
  double worst = 1;
  for (int i = 0; i < 100; ++i) {
    auto data = oracle::random_bytes(rng(), 1 << 20);
    const auto chunks = chunk_stream(data, params);
    Bytes joined;
    for (std::size_t c = 0; c < chunks.size(); ++c) {
      const auto len = chunks[c].length();
      if (c + 1 < chunks.size() && (len < params.min_size || len > params.max_size))
        return {false, "input " + std::to_string(i) + ": chunk of " + std::to_string(len) + " bytes"};
      joined.insert(joined.end(), chunks[c].payload.begin(), chunks[c].payload.end());
    }
    if (joined != data) return {false, "input " + std::to_string(i) + ": reassembly differs"};

    std::set<ChunkId> before;
    for (const auto& c : chunks) before.insert(c.id);
    data[rng() % data.size()] ^= static_cast<std::uint8_t>(1 + rng() % 255);
    std::set<ChunkId> after;
    for (const auto& c : chunk_stream(data, params)) after.insert(c.id);
    std::size_t kept = 0;
    for (const auto& id : before) kept += after.count(id);
    worst = std::min(worst, static_cast<double>(kept) / static_cast<double>(before.size()));
  }
  return {worst >= 0.9, "bounds and reassembly hold; worst id retention after an edit " + fmt(worst)};
}

// ------------------------------------------------------------------ 3

Outcome dedup_idempotence() {
  Grid g({.clusters = 2, .params = {10, 5}});
  auto c = g.make_client("alice");
  const auto data = oracle::random_bytes(3, 1 << 20);
  c.upload("f", data);
  g.net().run();
  const auto before = scan_store(g.nodes()).piece_bytes;
  const auto second = c.upload("f", data);
  g.net().run();
  const auto after = scan_store(g.nodes()).piece_bytes;
  return {after == before && second.chunks_missing == 0,
          "piece bytes " + std::to_string(before) + " -> " + std::to_string(after) + ", second missing list " +
              std::to_string(second.chunks_missing)};
}

// ------------------------------------------------------------------ 4

Outcome expansion_cost() {
  Grid g({.clusters = 2, .params = {10, 5}});
  auto c = g.make_client("alice");
  const auto data = oracle::random_bytes(4, 1 << 20);
  c.upload("f", data);
  g.net().run();
  const double ratio = static_cast<double>(scan_store(g.nodes()).piece_bytes) / static_cast<double>(data.size());
  return {ratio >= 2.0 && ratio <= 2.05, "piece bytes / original = " + fmt(ratio)};
}

// ------------------------------------------------------------------ 5

WorkloadSpec sweep_spec() {
  WorkloadSpec s;
  s.users = 4;
  s.files_per_user = 6;
  s.min_file = 64 << 10;
  s.max_file = 512 << 10;
  s.gets = 40;
  s.seed = 5;
  return s;
}

ExperimentConfig sweep_config() {
  ExperimentConfig c;
  c.params = {10, 5};
  c.clusters = 4;
  c.sim.latency = {5, 0.002, 1, 5};
  return c;
}

Outcome k_sweep_ratio() {
  const auto rows = sweep_k(sweep_config(), generate_workload(sweep_spec()), {2, 5, 8, 10});
  std::string detail;
  bool ok = true;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    detail += (i ? ", k=" : "k=") + std::to_string(rows[i].k) + ":" + fmt(rows[i].report.dedup_ratio);
    if (i > 0 && !(rows[i].report.dedup_ratio > rows[i - 1].report.dedup_ratio)) ok = false;
  }
  return {ok, detail};
}

// ------------------------------------------------------------------ 6

Outcome k_sweep_time() {
  std::vector<std::uint8_t> ks;
  for (std::uint8_t k = 1; k <= 10; ++k) ks.push_back(k);
  const auto rows = sweep_k(sweep_config(), generate_workload(sweep_spec()), ks);
  std::size_t best = 0;
  std::string detail;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].report.avg_retrieval_ms < rows[best].report.avg_retrieval_ms) best = i;
    detail += (i ? " " : "") + fmt(rows[i].report.avg_retrieval_ms, 1);
  }
  const int k = rows[best].k;
  return {k >= 2 && k <= 9, "argmin k=" + std::to_string(k) + "; avg ms for k=1..10: " + detail};
}

// ------------------------------------------------------------------ 7

Outcome binding_order() {
  const auto w = generate_workload(WorkloadSpec{});
  ExperimentConfig c;
  c.sim.latency = {5, 0.002, 1, 1};
  c.sim.contention = true;
  c.window = 1;
  c.mode = BindingMode::clb;
  const auto clb = run_experiment(c, w);
  c.mode = BindingMode::ulb;
  const auto ulb = run_experiment(c, w);
  const bool ok = clb.dedup_ratio > ulb.dedup_ratio && ulb.avg_retrieval_ms < clb.avg_retrieval_ms &&
                  clb.failures == 0 && ulb.failures == 0;
  return {ok, "dedup clb " + fmt(clb.dedup_ratio) + " ulb " + fmt(ulb.dedup_ratio) + "; avg ms clb " +
                  fmt(clb.avg_retrieval_ms, 1) + " ulb " + fmt(ulb.avg_retrieval_ms, 1)};
}

// ------------------------------------------------------------------ 8

Outcome first_k() {
  SimOptions so;
  so.latency = {10, 0, 0, 1};
  Grid g({.clusters = 1, .params = {10, 5}, .sim = so});
  auto writer = g.make_client("alice");
  const auto data = oracle::random_bytes(8, 1024);
  writer.upload("f", data);
  const auto ref = writer.cache().find_meta("f")->chunks.at(0);
  for (std::size_t i = 5; i < 10; ++i) g.net().set_latency_override(g.topology().clusters[0].members[i], {500, 0, 0, 1});
  auto reader = g.make_client("alice");
  const double start = g.net().now();
  const bool same = reader.fetch_chunk(ref) == data;
  const double took = g.net().now() - start;
  return {same && took >= 10 && took <= 50, "single-chunk read took " + fmt(took, 3) + " ms virtual"};
}

// ------------------------------------------------------------------ 9

Outcome lifecycles() {
  std::size_t done = 0;
  for (auto mode : {BindingMode::clb, BindingMode::ulb}) {
    SimOptions so;
    so.latency = {3, 0.0005, 2, 9};
    Grid g({.clusters = 3, .params = {6, 3}, .mode = mode, .sim = so});
    std::mt19937_64 rng(mode == BindingMode::clb ? 90 : 91);
    const std::vector<std::string> users{"ann", "bob", "cy"};
    std::vector<Client> writers, readers;
    for (std::size_t u = 0; u < users.size(); ++u) {
      writers.push_back(g.make_client(users[u], u * 6));
      readers.push_back(g.make_client(users[u], u * 6));
    }
    // A small pool of shared payloads makes chunks recur across files and users.
    std::vector<Bytes> pool;
    for (int i = 0; i < 8; ++i) pool.push_back(oracle::random_bytes(rng(), 20'000 + rng() % 40'000));
    std::map<std::pair<std::size_t, std::string>, Bytes> live;
    for (int i = 0; i < 100; ++i) {
      const auto u = rng() % users.size();
      const auto name = "f" + std::to_string(i);
      Bytes data = rng() % 2 ? pool[rng() % pool.size()] : oracle::random_bytes(rng(), rng() % 80'000);
      if (!data.empty() && rng() % 2) data[rng() % data.size()] ^= 1;
      writers[u].upload(name, data);
      const auto back = readers[u].retrieve(name).data;
      if (back != data) return {false, "retrieved bytes differ for " + users[u] + "/" + name};
      if (chunk_id(back) != chunk_id(data)) return {false, "digest mismatch"};
      if (rng() % 2) {
        writers[u].remove(name);
      } else {
        live[{u, name}] = std::move(data);
      }
      ++done;
    }
    g.net().run();
    auto report = check_consistency(g.nodes());
    if (!report.ok()) return {false, std::string(binding_mode_name(mode)) + " mid-run: " + report.summary()};
    for (const auto& [key, data] : live) {
      if (readers[key.first].retrieve(key.second).data != data) return {false, "late read differs"};
      writers[key.first].remove(key.second);
    }
    g.net().run();
    report = check_consistency(g.nodes());
    if (!report.ok()) return {false, std::string(binding_mode_name(mode)) + " final: " + report.summary()};
    if (g.piece_count() != 0) return {false, std::to_string(g.piece_count()) + " pieces left after deleting all"};
  }
  return {true, std::to_string(done) + " lifecycles, consistency scans clean, stores empty at the end"};
}

// ----------------------------------------------------------------- 10

std::uint16_t kernel_port() {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  ::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr);
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  ::close(fd);
  return ntohs(addr.sin_port);
}

void send_raw(const Address& to, const Bytes& bytes) {
  const auto [host, port] = split_address(to);
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  ::inet_pton(AF_INET, host.c_str(), &addr.sin_addr);
  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0) {
    timeval tv{2, 0};
    ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
    ::send(fd, bytes.data(), bytes.size(), MSG_NOSIGNAL);
    ::shutdown(fd, SHUT_WR);
    std::uint8_t buf[4096];
    while (::recv(fd, buf, sizeof buf, 0) > 0) {
    }
  }
  ::close(fd);
}

Outcome wire_fuzz_check() {
  std::mt19937_64 rng(10);
  for (std::size_t type = 0; type < wire::kMessageTypeCount; ++type)
    for (int i = 0; i < 10000; ++i) {
      const wire::Message m{rng(), wire_fuzz::random_body(rng, type)};
      const auto bytes = wire::encode_message(m);
      const auto back = wire::decode_message(bytes);
      if (!back || back->consumed != bytes.size() || !(back->message == m))
        return {false, "round trip failed for type " + std::string(wire::type_name(m.type()))};
    }

  // A live node on a socket receives garbage and must keep answering.
  Topology topo;
  topo.params = {1, 1};
  const Address self = "127.0.0.1:" + std::to_string(kernel_port());
  topo.clusters.push_back({0, {self}, 0, 0});
  NodeConfig nc;
  nc.address = self;
  nc.params = topo.params;
  nc.capacity = 1ull << 30;
  SocketTransport server(self);
  Node node(nc, topo, server);
  server.listen(&node);
  std::size_t frames = 0;
  for (int i = 0; i < 200; ++i) {
    Bytes frame{wire::kProtocolVersion};
    if (i % 2) {
      auto valid = wire::encode_message({rng(), wire_fuzz::random_body(rng, rng() % wire::kMessageTypeCount)});
      for (int flips = 0; flips < 4; ++flips) valid[rng() % valid.size()] ^= static_cast<std::uint8_t>(rng());
      frame.insert(frame.end(), valid.begin(), valid.end());
    } else {
      for (std::size_t b = rng() % 300; b > 0; --b) frame.push_back(static_cast<std::uint8_t>(rng()));
    }
    send_raw(self, frame);
    ++frames;
  }
  SocketTransport client("probe");
  std::optional<Result<wire::MetaReply>> reply;
  client.run([&] {
        client.request(self, wire::GetMeta{"u", "f"},
                       [&](Result<wire::Message> r) { reply.emplace(expect_reply<wire::MetaReply>(std::move(r))); });
      },
      [&] { return reply.has_value(); });
  client.stop();
  server.stop();
  const bool alive = reply && reply->ok();
  return {alive, std::to_string(wire::kMessageTypeCount) + " types x 10000 round trips; node " +
                     (alive ? "still answers" : "stopped answering") + " after " + std::to_string(frames) +
                     " malformed connections"};
}

// ----------------------------------------------------------------- 11

Outcome metadata_sync() {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 100'000; ++i) {
    FileMeta a, b;
    a.user_id = b.user_id = "u";
    a.file_name = b.file_name = "f";
    a.total_len = 1;
    b.total_len = 2;
    a.timestamp = rng() % 64;
    b.timestamp = rng() % 64;
    const FileMeta& got = sync_meta(&a, &b);
    const FileMeta& want = a.timestamp > b.timestamp ? a : b;
    if (&got != &want) return {false, "wrong winner at timestamps " + std::to_string(a.timestamp) + "/" +
                                          std::to_string(b.timestamp)};
  }

  Grid g({.clusters = 2, .params = {4, 2}});
  auto d1 = g.make_client("alice");
  auto d2 = g.make_client("alice");
  std::map<std::string, std::uint64_t> newest;
  for (int i = 0; i < 60; ++i) {
    const auto name = "f" + std::to_string(i);
    const auto t1 = 1000 + rng() % 50, t2 = 1000 + rng() % 50;
    if (i < 40) d1.upload(name, oracle::random_bytes(rng(), 1 + rng() % 5000), t1);
    if (i >= 20) d2.upload(name, oracle::random_bytes(rng(), 1 + rng() % 5000), t2);
    newest[name] = i < 20 ? t1 : i >= 40 ? t2 : std::max(t1, t2);
  }
  d1.sync();
  d2.sync();
  d1.sync();
  auto m1 = d1.cache().metas(), m2 = d2.cache().metas();
  if (m1.size() != newest.size() || m2.size() != newest.size()) return {false, "devices hold different file sets"};
  std::map<std::string, FileMeta> by_name;
  for (const auto& m : m1) by_name[m.file_name] = m;
  for (const auto& m : m2) {
    if (!(by_name.at(m.file_name) == m)) return {false, "devices disagree on " + m.file_name};
    if (m.timestamp != newest.at(m.file_name)) return {false, "stale winner for " + m.file_name};
  }
  return {true, "100000 timestamp pairs; two devices converge on " + std::to_string(newest.size()) + " files"};
}

struct Criterion {
  int number;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "erasure-mds-round-trip", erasure_round_trip},
      {2, "chunking-contract", chunking_contract},
      {3, "dedup-idempotence", dedup_idempotence},
      {4, "n-over-k-expansion", expansion_cost},
      {5, "k-sweep-dedup-monotone", k_sweep_ratio},
      {6, "k-sweep-retrieval-interior-minimum", k_sweep_time},
      {7, "binding-ordering", binding_order},
      {8, "first-k-early-termination", first_k},
      {9, "end-to-end-fidelity", lifecycles},
      {10, "wire-fuzz", wire_fuzz_check},
      {11, "metadata-sync", metadata_sync},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : all) {
    if (!selected.empty() && !selected.count(c.number)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << (out.pass ? "PASS " : "FAIL ") << c.number << ' ' << c.name << ": " << out.detail << " ("
              << fmt(secs, 1) << " s)" << std::endl;
    failed += !out.pass;
  }
  return failed == 0 ? 0 : 1;
}
