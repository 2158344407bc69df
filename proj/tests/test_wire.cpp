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

#include <random>
#include <utility>

#include "doctest.h"
#include "ecstore/wire.hpp"
#include "wire_fuzz.hpp"

using namespace ecstore;
using namespace ecstore::wire;

namespace {

Errc code_of(std::span<const std::uint8_t> bytes) {
  try {
    decode_message(bytes);
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::ok;
}

}  // namespace

TEST_SUITE("wire") {
  TEST_CASE("every message type round-trips under fuzzing") {
    std::mt19937_64 rng(2026);
    for (std::size_t type = 0; type < kMessageTypeCount; ++type) {
      CAPTURE(type);
      for (int i = 0; i < 10000; ++i) {
        const Message m{rng(), wire_fuzz::random_body(rng, type)};
        const auto bytes = encode_message(m);
        const auto back = decode_message(bytes);
        REQUIRE(back.has_value());
        REQUIRE(back->consumed == bytes.size());
        REQUIRE(back->message == m);
        REQUIRE(static_cast<std::size_t>(back->message.type()) == type + 1);
      }
    }
  }

  TEST_CASE("GetPiece layout") {
    ChunkId id;
    for (std::size_t i = 0; i < id.digest.size(); ++i) id.digest[i] = static_cast<std::uint8_t>(i + 1);
    const auto bytes = encode_message(make(0x0102030405060708ull, GetPiece{id, 3}));
    REQUIRE(bytes.size() == 13 + 20 + 1);
    CHECK(bytes[0] == 0);
    CHECK(bytes[1] == 0);
    CHECK(bytes[2] == 0);
    CHECK(bytes[3] == 34);
    CHECK(bytes[4] == 9);
    for (int i = 0; i < 8; ++i) CHECK(bytes[5 + i] == i + 1);
    for (int i = 0; i < 20; ++i) CHECK(bytes[13 + i] == i + 1);
    CHECK(bytes[33] == 3);
  }

  TEST_CASE("StoreChunk fields survive") {
    StoreChunk sc;
    sc.chunk_id.digest.fill(0xAB);
    sc.cluster_id = 17;
    sc.payload = {1, 2, 3, 4, 5};
    const auto back = decode_message(encode_message(make(9, sc)));
    REQUIRE(back.has_value());
    CHECK(std::get<StoreChunk>(back->message.body) == sc);
    CHECK(back->message.request_id == 9);
  }

  TEST_CASE("incomplete frames consume nothing") {
    const auto bytes = encode_message(make(1, GetMeta{"alice", "notes.txt"}));
    for (std::size_t cut = 0; cut < bytes.size(); ++cut)
      CHECK_FALSE(decode_message(std::span(bytes).first(cut)).has_value());
    CHECK_FALSE(decode_message(std::span(bytes).first(3)).has_value());
    CHECK_FALSE(peek_frame_length(std::span(bytes).first(3)).has_value());
    CHECK(peek_frame_length(bytes) == bytes.size());
  }

  TEST_CASE("two frames back to back") {
    Bytes stream;
    append_message(stream, make(1, Cancel{5}));
    append_message(stream, make(2, ListMeta{"bob"}));
    const auto first = decode_message(stream);
    REQUIRE(first.has_value());
    CHECK(std::get<Cancel>(first->message.body).target == 5);
    const auto second = decode_message(std::span(stream).subspan(first->consumed));
    REQUIRE(second.has_value());
    CHECK(std::get<ListMeta>(second->message.body).user == "bob");
  }

  TEST_CASE("unknown type carries the code") {
    auto bytes = encode_message(make(1, Cancel{5}));
    bytes[4] = 0xFF;
    try {
      decode_message(bytes);
      FAIL("expected unknown_type");
    } catch (const WireError& e) {
      CHECK(e.code() == Errc::unknown_type);
      CHECK(e.msg_type() == 0xFF);
    }
    bytes[4] = 0;
    CHECK(code_of(bytes) == Errc::unknown_type);
  }

  TEST_CASE("bad lengths") {
    Bytes tiny{0, 0, 0, 5, 1, 0, 0, 0, 0, 0, 0, 0, 0};
    CHECK(code_of(tiny) == Errc::bad_length);
    Bytes huge{0xFF, 0xFF, 0xFF, 0xFF, 1};
    CHECK(code_of(huge) == Errc::bad_length);
  }

  TEST_CASE("short and malformed bodies") {
    // A GetPiece frame whose length leaves out the index byte.
    auto bytes = encode_message(make(1, GetPiece{}));
    bytes.pop_back();
    bytes[3] -= 1;
    CHECK(code_of(bytes) == Errc::short_body);

    auto trailing = encode_message(make(1, Cancel{1}));
    trailing.push_back(0);
    trailing[3] += 1;
    CHECK(code_of(trailing) == Errc::malformed_body);

    auto flag = encode_message(make(1, MetaReply{}));
    flag.back() = 2;
    CHECK(code_of(flag) == Errc::malformed_body);
  }

  TEST_CASE("random bytes never crash the decoder") {
    std::mt19937_64 rng(77);
    for (int i = 0; i < 20000; ++i) {
      Bytes junk(rng() % 64);
      for (auto& b : junk) b = static_cast<std::uint8_t>(rng());
      if (junk.size() >= 4 && rng() % 2 == 0) {
        junk[0] = junk[1] = 0;
        junk[2] = 0;
        junk[3] = static_cast<std::uint8_t>(junk.size());
      }
      if (junk.size() >= 5) junk[4] = static_cast<std::uint8_t>(1 + rng() % 23);
      try {
        decode_message(junk);
      } catch (const WireError&) {
      }
    }
    // Mutated valid frames.
    for (int i = 0; i < 5000; ++i) {
      auto bytes = encode_message({rng(), wire_fuzz::random_body(rng, rng() % kMessageTypeCount)});
      bytes[rng() % bytes.size()] ^= static_cast<std::uint8_t>(1 + rng() % 255);
      try {
        decode_message(bytes);
      } catch (const WireError&) {
      }
    }
  }

  TEST_CASE("type names") {
    CHECK(type_name(MsgType::get_piece) == "GetPiece");
    CHECK(kMessageTypeCount == 23);
  }
}
