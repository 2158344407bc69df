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

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <random>
#include <thread>

#include "doctest.h"
#include "ecstore/client.hpp"
#include "ecstore/node.hpp"
#include "ecstore/socket_transport.hpp"
#include "oracles.hpp"

using namespace ecstore;

namespace {

/// A port the kernel just handed out, released again for our use.
std::uint16_t free_port() {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = 0;
  REQUIRE(::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0);
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  ::close(fd);
  return ntohs(addr.sin_port);
}

class SocketGrid {
 public:
  SocketGrid(std::size_t clusters, CodingParams params) {
    topology_.params = params;
    for (std::size_t c = 0; c < clusters; ++c) {
      ClusterState cs;
      cs.cluster_id = static_cast<ClusterId>(c);
      for (std::size_t i = 0; i < params.n; ++i) cs.members.push_back("127.0.0.1:" + std::to_string(free_port()));
      topology_.clusters.push_back(cs);
    }
    for (const auto& c : topology_.clusters)
      for (std::size_t i = 0; i < c.members.size(); ++i) {
        NodeConfig nc;
        nc.address = c.members[i];
        nc.cluster_id = c.cluster_id;
        nc.position = static_cast<std::uint8_t>(i);
        nc.params = params;
        nc.capacity = 1ull << 30;
        transports_.push_back(std::make_unique<SocketTransport>(nc.address));
        nodes_.push_back(std::make_unique<Node>(nc, topology_, *transports_.back()));
        transports_.back()->listen(nodes_.back().get());
      }
  }
  ~SocketGrid() {
    for (auto& t : transports_) t->stop();
  }

  const Topology& topology() const { return topology_; }
  Node& node(std::size_t i) { return *nodes_.at(i); }

 private:
  Topology topology_;
  std::vector<std::unique_ptr<SocketTransport>> transports_;
  std::vector<std::unique_ptr<Node>> nodes_;
};

template <typename Reply>
Result<Reply> ask(Transport& t, const Address& to, wire::Body body) {
  std::optional<Result<Reply>> out;
  t.run([&] { t.request(to, std::move(body), [&](Result<wire::Message> r) { out.emplace(expect_reply<Reply>(std::move(r))); }); },
        [&] { return out.has_value(); });
  return std::move(*out);
}

int raw_connect(const Address& address) {
  const auto [host, port] = split_address(address);
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  ::inet_pton(AF_INET, host.c_str(), &addr.sin_addr);
  REQUIRE(::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0);
  timeval tv{5, 0};
  ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
  return fd;
}

Bytes read_some(int fd, std::size_t want) {
  Bytes out;
  std::uint8_t buf[4096];
  while (out.size() < want) {
    const auto n = ::recv(fd, buf, sizeof buf, 0);
    if (n <= 0) break;
    out.insert(out.end(), buf, buf + n);
  }
  return out;
}

std::optional<wire::Message> read_message(int fd) {
  Bytes got = read_some(fd, 4);
  if (got.size() < 4) return std::nullopt;
  const auto total = *wire::peek_frame_length(got);
  auto rest = read_some(fd, total - got.size());
  got.insert(got.end(), rest.begin(), rest.end());
  auto decoded = wire::decode_message(got);
  if (!decoded) return std::nullopt;
  return decoded->message;
}

}  // namespace

TEST_SUITE("socket") {
  TEST_CASE("nodes answer probes") {
    SocketGrid grid(1, {3, 2});
    SocketTransport client("probe");
    for (const auto& addr : grid.topology().all_nodes()) {
      auto reply = ask<wire::MetaReply>(client, addr, wire::GetMeta{"nobody", "nothing"});
      REQUIRE(reply.ok());
      CHECK_FALSE(reply.value().meta.has_value());
    }
    client.stop();
  }

  TEST_CASE("unreachable address fails with a transport error") {
    SocketTransport client("probe", {.connect_timeout_ms = 500, .request_timeout_ms = 1000});
    auto reply = ask<wire::MetaReply>(client, "127.0.0.1:" + std::to_string(free_port()), wire::GetMeta{"u", "f"});
    REQUIRE_FALSE(reply.ok());
    CHECK(reply.error().code() == Errc::transport);
    client.stop();
  }

  TEST_CASE("upload, retrieve and delete over TCP") {
    SocketGrid grid(2, {4, 2});
    SocketTransport t1("dev1"), t2("dev2");
    ClientOptions co;
    co.user = "alice";
    co.switching_node = grid.topology().clusters[1].members[0];
    Client c1(t1, grid.topology(), co), c2(t2, grid.topology(), co);
    const auto data = oracle::random_bytes(1, 300'000);
    auto up = c1.upload("f", data);
    CHECK(up.chunks_missing == up.chunks_total);
    CHECK(c2.retrieve("f").data == data);
    CHECK(c1.upload("g", data).chunk_bytes_sent == 0);
    c1.remove("f");
    c1.remove("g");
    t1.stop();
    t2.stop();
  }

  TEST_CASE("ten clients read one piece concurrently") {
    SocketGrid grid(1, {4, 2});
    SocketTransport writer("writer");
    ClientOptions co;
    co.user = "alice";
    co.switching_node = grid.topology().clusters[0].members[0];
    Client c(writer, grid.topology(), co);
    const auto data = oracle::random_bytes(2, 6000);
    c.upload("f", data);
    const auto ref = c.cache().find_meta("f")->chunks.at(0);
    const auto expect = grid.node(2).pieces().get(ref.chunk_id, 2);
    REQUIRE(expect.has_value());
    writer.stop();

    std::vector<std::optional<CodedPiece>> got(10);
    std::vector<char> ok(10, 0);
    std::vector<std::thread> threads;
    for (int i = 0; i < 10; ++i)
      threads.emplace_back([&, i] {
        SocketTransport t("reader" + std::to_string(i));
        for (int round = 0; round < 20; ++round) {
          auto r = ask<wire::PieceReply>(t, grid.topology().clusters[0].members[2], wire::GetPiece{ref.chunk_id, 2});
          ok[i] = r.ok();
          if (!r.ok()) break;
          got[i] = r.value().piece;
          if (got[i] != expect) break;
        }
        t.stop();
      });
    for (auto& th : threads) th.join();
    for (int i = 0; i < 10; ++i) {
      CHECK(ok[i]);
      CHECK(got[i] == expect);
    }
  }

  TEST_CASE("malformed frames do not take a node down") {
    SocketGrid grid(1, {3, 2});
    const auto target = grid.topology().clusters[0].members[1];

    {  // Wrong protocol version: the server hangs up.
      const int fd = raw_connect(target);
      const std::uint8_t v = 9;
      ::send(fd, &v, 1, MSG_NOSIGNAL);
      CHECK(read_some(fd, 1).empty());
      ::close(fd);
    }
    {  // Unknown type and junk bodies get error replies; the stream continues.
      const int fd = raw_connect(target);
      const std::uint8_t v = wire::kProtocolVersion;
      ::send(fd, &v, 1, MSG_NOSIGNAL);
      CHECK(read_some(fd, 1) == Bytes{wire::kProtocolVersion});
      auto frame = wire::encode_message(wire::make(77, wire::Cancel{1}));
      frame[4] = 0xEE;
      ::send(fd, frame.data(), frame.size(), MSG_NOSIGNAL);
      auto reply = read_message(fd);
      REQUIRE(reply.has_value());
      CHECK(reply->request_id == 77);
      CHECK(std::get<wire::ErrorReply>(reply->body).status.code == Errc::unknown_type);

      auto junk = wire::encode_message(wire::make(78, wire::GetMeta{"a", "b"}));
      junk.resize(junk.size() - 2);
      junk[3] -= 2;
      ::send(fd, junk.data(), junk.size(), MSG_NOSIGNAL);
      reply = read_message(fd);
      REQUIRE(reply.has_value());
      CHECK(reply->request_id == 78);
      CHECK(std::get<wire::ErrorReply>(reply->body).status.code == Errc::short_body);

      const Bytes bad_length{0xFF, 0xFF, 0xFF, 0xFF, 1, 0, 0, 0, 0, 0, 0, 0, 0};
      ::send(fd, bad_length.data(), bad_length.size(), MSG_NOSIGNAL);
      reply = read_message(fd);
      REQUIRE(reply.has_value());
      CHECK(std::get<wire::ErrorReply>(reply->body).status.code == Errc::bad_length);
      ::close(fd);
    }
    {  // Random garbage after a valid handshake.
      std::mt19937_64 rng(3);
      for (int i = 0; i < 20; ++i) {
        const int fd = raw_connect(target);
        Bytes junk(1 + rng() % 200);
        for (auto& b : junk) b = static_cast<std::uint8_t>(rng());
        junk[0] = wire::kProtocolVersion;
        ::send(fd, junk.data(), junk.size(), MSG_NOSIGNAL);
        ::shutdown(fd, SHUT_WR);
        read_some(fd, 1 << 16);
        ::close(fd);
      }
    }
    SocketTransport client("after");
    auto reply = ask<wire::MetaReply>(client, target, wire::GetMeta{"u", "f"});
    CHECK(reply.ok());
    client.stop();
  }

  TEST_CASE("address parsing") {
    CHECK(split_address("127.0.0.1:80") == std::pair<std::string, std::uint16_t>{"127.0.0.1", 80});
    CHECK(split_address("[::1]:9000") == std::pair<std::string, std::uint16_t>{"::1", 9000});
    CHECK_THROWS_AS(split_address("nohost"), Error);
    CHECK_THROWS_AS(split_address("h:99999"), Error);
  }

  TEST_CASE("a taken address is reported") {
    SocketGrid grid(1, {1, 1});
    SocketTransport dup(grid.topology().clusters[0].members[0]);
    try {
      dup.listen(nullptr);
      FAIL("expected io error");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::io);
    }
    dup.stop();
  }
}
