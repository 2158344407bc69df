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

#include "ecstore/chunking.hpp"

#include <openssl/evp.h>

#include <algorithm>

namespace ecstore {

namespace {

constexpr std::uint64_t kTableSeed = 0x5EED'C0DE'CDC0'2015ull;

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace

void ChunkParams::validate() const {
  if (min_size == 0 || min_size > max_size)
    throw Error(Errc::invalid_argument, "chunk sizes require 0 < min_size <= max_size");
  if (boundary_mask_bits < 1 || boundary_mask_bits > 31)
    throw Error(Errc::invalid_argument, "boundary_mask_bits must be in [1, 31]");
  if (window_size == 0 || window_size > 63)
    throw Error(Errc::invalid_argument, "window_size must be in [1, 63]");
}

const std::array<std::uint64_t, 256>& rolling_table() {
  static const auto table = [] {
    std::array<std::uint64_t, 256> t{};
    std::uint64_t state = kTableSeed;
    for (auto& v : t) v = splitmix64(state);
    return t;
  }();
  return table;
}

ChunkId chunk_id(std::span<const std::uint8_t> payload) {
  ChunkId id;
  unsigned int len = 0;
  if (EVP_Digest(payload.data(), payload.size(), id.digest.data(), &len, EVP_sha1(), nullptr) != 1 || len != 20)
    throw Error(Errc::io, "SHA-1 digest failed");
  return id;
}

std::vector<ChunkSpan> find_boundaries(std::span<const std::uint8_t> input, const ChunkParams& params) {
  params.validate();
  const auto& table = rolling_table();
  const std::uint64_t mask = (std::uint64_t{1} << params.boundary_mask_bits) - 1;
  const unsigned window = static_cast<unsigned>(params.window_size);

  std::vector<ChunkSpan> spans;
  spans.reserve(input.size() / (params.min_size + mask + 1) + 1);

  std::size_t start = 0;
  while (start < input.size()) {
    const std::size_t remaining = input.size() - start;
    if (remaining <= params.min_size) {
      spans.push_back({start, remaining});
      break;
    }
    const std::size_t limit = std::min(remaining, params.max_size);
    // The hash at length L covers bytes [L - w, L); only lengths >= min_size
    // are tested, so rolling starts w bytes before that.
    const std::size_t roll_start = params.min_size > window ? params.min_size - window : 0;
    const std::size_t drop_from = roll_start + window;
    std::uint64_t h = 0;
    const std::uint8_t* base = input.data() + start;
    for (std::size_t i = roll_start; i < params.min_size; ++i) {
      h = (h << 1) + table[base[i]];
      if (i >= drop_from) h -= table[base[i - window]] << window;
    }
    std::size_t len = params.min_size;
    std::size_t cut = limit;
    if ((h & mask) == 0) {
      cut = len;
    } else {
      for (; len < limit; ++len) {
        h = (h << 1) + table[base[len]];
        if (len >= drop_from) h -= table[base[len - window]] << window;
        if ((h & mask) == 0) {
          cut = len + 1;
          break;
        }
      }
    }
    spans.push_back({start, cut});
    start += cut;
  }
  return spans;
}

std::vector<Chunk> chunk_stream(std::span<const std::uint8_t> input, const ChunkParams& params) {
  auto spans = find_boundaries(input, params);
  std::vector<Chunk> chunks;
  chunks.reserve(spans.size());
  for (const auto& s : spans) {
    auto piece = input.subspan(s.offset, s.length);
    chunks.push_back({chunk_id(piece), Bytes(piece.begin(), piece.end())});
  }
  return chunks;
}

}  // namespace ecstore
