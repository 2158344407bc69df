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

#include "doctest.h"
#include "ecstore/erasure.hpp"
#include "ecstore/gf256.hpp"
#include "oracles.hpp"

using namespace ecstore;

namespace {

std::vector<CodedPiece> pick(const std::vector<CodedPiece>& all, const std::vector<unsigned>& idx) {
  std::vector<CodedPiece> out;
  for (auto i : idx) out.push_back(all[i]);
  return out;
}

void check_kernel_against_oracle(const gf::RegionKernel& kernel) {
  std::mt19937_64 rng(kernel.name.size());
  for (std::size_t len : {0u, 1u, 15u, 16u, 31u, 32u, 33u, 63u, 64u, 65u, 100u, 257u, 4096u, 4099u}) {
    for (std::size_t misalign : {0u, 1u, 7u}) {
      const auto src_buf = oracle::random_bytes(rng(), len + misalign);
      const auto dst_init = oracle::random_bytes(rng(), len + misalign);
      for (unsigned c : {0u, 1u, 2u, 0x53u, 0x8Eu, 0xFFu}) {
        auto dst = dst_init;
        kernel.mul_add(dst.data() + misalign, src_buf.data() + misalign, len, static_cast<std::uint8_t>(c));
        auto dst2 = dst_init;
        kernel.mul(dst2.data() + misalign, src_buf.data() + misalign, len, static_cast<std::uint8_t>(c));
        for (std::size_t i = 0; i < len; ++i) {
          const auto prod = oracle::gf_mul(src_buf[misalign + i], static_cast<std::uint8_t>(c));
          REQUIRE(dst[misalign + i] == (dst_init[misalign + i] ^ prod));
          REQUIRE(dst2[misalign + i] == prod);
        }
        for (std::size_t i = 0; i < misalign; ++i) REQUIRE(dst[i] == dst_init[i]);
      }
    }
  }
}

}  // namespace

TEST_SUITE("erasure") {
  TEST_CASE("field arithmetic matches shift-and-add multiplication") {
    for (unsigned a = 0; a < 256; ++a)
      for (unsigned b = 0; b < 256; ++b)
        REQUIRE(gf::mul(static_cast<std::uint8_t>(a), static_cast<std::uint8_t>(b)) ==
                oracle::gf_mul(static_cast<std::uint8_t>(a), static_cast<std::uint8_t>(b)));
    for (unsigned a = 1; a < 256; ++a) {
      const auto x = static_cast<std::uint8_t>(a);
      CHECK(gf::inv(x) == oracle::gf_inv(x));
      CHECK(gf::div(7, x) == oracle::gf_mul(7, oracle::gf_inv(x)));
      CHECK(gf::pow(x, 5) == oracle::gf_pow(x, 5));
    }
  }

  TEST_CASE("scalar kernel matches the oracle") { check_kernel_against_oracle(gf::scalar_kernel()); }

  TEST_CASE("vector kernel matches the oracle and the scalar kernel") {
    const auto* avx2 = gf::avx2_kernel();
    if (avx2 == nullptr) {
      MESSAGE("AVX2 kernel unavailable on this host");
      return;
    }
    check_kernel_against_oracle(*avx2);
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const std::size_t len = 1 + seed * 37;
      const auto src = oracle::random_bytes(seed, len);
      auto a = oracle::random_bytes(seed + 1000, len);
      auto b = a;
      const auto c = static_cast<std::uint8_t>(seed * 13 + 1);
      gf::scalar_kernel().mul_add(a.data(), src.data(), len, c);
      avx2->mul_add(b.data(), src.data(), len, c);
      CHECK(a == b);
    }
  }

  TEST_CASE("generator equals an independently built one") {
    for (unsigned n = 1; n <= 12; ++n)
      for (unsigned k = 1; k <= n; ++k) {
        const CodingParams p{static_cast<std::uint8_t>(n), static_cast<std::uint8_t>(k)};
        REQUIRE(generator_matrix(p) == oracle::generator(n, k));
      }
  }

  TEST_CASE("pieces equal an element-wise encoding") {
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
      const auto payload = oracle::random_bytes(seed, 100 + seed * 511);
      const CodingParams p{10, static_cast<std::uint8_t>(1 + seed)};
      const auto pieces = encode_chunk(payload, p);
      const auto expect = oracle::encode(payload, p.n, p.k);
      REQUIRE(pieces.size() == p.n);
      for (std::size_t i = 0; i < p.n; ++i) {
        CHECK(pieces[i].index == i);
        CHECK(pieces[i].original_len == payload.size());
        CHECK(pieces[i].payload == expect[i]);
      }
    }
  }

  TEST_CASE("identity coding") {
    const auto payload = oracle::random_bytes(1, 777);
    const auto pieces = encode_chunk(payload, {1, 1});
    REQUIRE(pieces.size() == 1);
    CHECK(pieces[0].payload == payload);
    CHECK(decode_chunk(pieces, {1, 1}, payload.size()) == payload);
  }

  TEST_CASE("(10,5) of 4096 bytes gives ten 820-byte pieces") {
    const auto payload = oracle::random_bytes(2, 4096);
    const auto pieces = encode_chunk(payload, {10, 5});
    REQUIRE(pieces.size() == 10);
    std::size_t total = 0;
    for (const auto& p : pieces) {
      CHECK(p.payload.size() == 820);
      total += p.payload.size();
    }
    CHECK(total == 8200);
    CHECK(piece_size(4096, {10, 5}) == 820);
    CHECK(expansion(4096, {10, 5}) == 8200);
  }

  TEST_CASE("(4,2) every pair decodes") {
    const auto payload = oracle::random_bytes(3, 100);
    const auto pieces = encode_chunk(payload, {4, 2});
    int subsets = 0;
    oracle::for_each_subset(4, 2, [&](const std::vector<unsigned>& idx) {
      ++subsets;
      CHECK(decode_chunk(pick(pieces, idx), {4, 2}, 100) == payload);
    });
    CHECK(subsets == 6);
  }

  TEST_CASE("systematic pieces are the data slices") {
    for (unsigned k = 1; k <= 10; ++k) {
      const auto payload = oracle::random_bytes(k, 1000 + k);
      const CodingParams p{10, static_cast<std::uint8_t>(k)};
      const auto pieces = encode_chunk(payload, p);
      Bytes joined;
      for (unsigned j = 0; j < k; ++j) joined.insert(joined.end(), pieces[j].payload.begin(), pieces[j].payload.end());
      joined.resize(payload.size());
      CHECK(joined == payload);
    }
  }

  TEST_CASE("round trip over every subset for small codes") {
    for (unsigned n = 1; n <= 6; ++n)
      for (unsigned k = 1; k <= n; ++k)
        for (std::size_t len : {1u, 2u, 17u, 1024u, 4097u}) {
          const CodingParams p{static_cast<std::uint8_t>(n), static_cast<std::uint8_t>(k)};
          const auto payload = oracle::random_bytes(n * 100 + k * 10 + len, len);
          const auto pieces = encode_chunk(payload, p);
          std::uint64_t total = 0;
          for (const auto& piece : pieces) total += piece.payload.size();
          CHECK(total == n * ((len + k - 1) / k));
          oracle::for_each_subset(n, k, [&](const std::vector<unsigned>& idx) {
            REQUIRE(decode_chunk(pick(pieces, idx), p, len) == payload);
          });
        }
  }

  TEST_CASE("(10,5) sampled subsets, reversed order and surplus pieces") {
    const auto payload = oracle::random_bytes(4, 4096);
    const auto pieces = encode_chunk(payload, {10, 5});
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<unsigned> idx(10);
      for (unsigned i = 0; i < 10; ++i) idx[i] = i;
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(5 + trial % 6);
      CHECK(decode_chunk(pick(pieces, idx), {10, 5}, 4096) == payload);
    }
  }

  TEST_CASE("errors") {
    const auto payload = oracle::random_bytes(6, 4096);
    const auto pieces = encode_chunk(payload, {10, 5}, chunk_id(payload));
    auto code_of = [](auto&& fn) {
      try {
        fn();
      } catch (const Error& e) {
        return e.code();
      }
      return Errc::ok;
    };
    CHECK(code_of([&] { decode_chunk(pick(pieces, {0, 3, 5, 9}), {10, 5}, 4096); }) == Errc::insufficient_pieces);
    CHECK(code_of([&] { decode_chunk(pick(pieces, {1, 1, 1, 2, 3, 4}), {10, 5}, 4096); }) ==
          Errc::insufficient_pieces);
    auto tampered = pick(pieces, {0, 1, 2, 3, 4});
    tampered.push_back(pieces[2]);
    tampered.back().payload[0] ^= 1;
    CHECK(code_of([&] { decode_chunk(tampered, {10, 5}, 4096); }) == Errc::inconsistent_pieces);
    auto wrong_len = pick(pieces, {0, 1, 2, 3, 4});
    CHECK(code_of([&] { decode_chunk(wrong_len, {10, 5}, 4000); }) == Errc::inconsistent_pieces);
    CHECK(code_of([&] { encode_chunk({}, {10, 5}); }) == Errc::invalid_argument);
    CHECK(code_of([&] { encode_chunk(payload, {4, 5}); }) == Errc::invalid_argument);
    CHECK(code_of([&] { encode_chunk(payload, {4, 0}); }) == Errc::invalid_argument);
  }

  TEST_CASE("matrix inversion round trip") {
    const auto g = oracle::generator(10, 4);
    std::vector<std::uint8_t> sub(g.begin() + 6 * 4, g.end());
    auto inv = sub;
    invert_matrix(inv, 4);
    for (std::size_t r = 0; r < 4; ++r)
      for (std::size_t c = 0; c < 4; ++c) {
        std::uint8_t acc = 0;
        for (std::size_t t = 0; t < 4; ++t) acc ^= oracle::gf_mul(sub[r * 4 + t], inv[t * 4 + c]);
        CHECK(acc == (r == c ? 1 : 0));
      }
    std::vector<std::uint8_t> singular{1, 2, 2, 4};
    CHECK_THROWS_AS(invert_matrix(singular, 2), Error);
  }
}
