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

// Content-defined chunking.
//
// Boundaries come from a windowed table-driven rolling hash:
//
//   h_i = sum_{j=0}^{w-1} T[b_{i-j}] << j      (mod 2^64)
//
// updated per byte as h = (h << 1) + T[in] - (T[out] << w). A chunk ends at
// the first length >= min_size whose trailing-window hash has its low
// boundary_mask_bits bits clear, or at max_size.

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "ecstore/common.hpp"

namespace ecstore {

struct ChunkParams {
  std::size_t min_size = 1024;
  std::size_t max_size = 8192;
  unsigned boundary_mask_bits = 12;
  std::size_t window_size = 48;

  /// Throws Errc::invalid_argument on a violated invariant.
  void validate() const;
};

struct Chunk {
  ChunkId id;
  Bytes payload;

  std::size_t length() const { return payload.size(); }
};

/// A boundary without the payload copy; offsets index the input.
struct ChunkSpan {
  std::size_t offset = 0;
  std::size_t length = 0;
};

/// SHA-1 of payload.
ChunkId chunk_id(std::span<const std::uint8_t> payload);

/// The fixed 256-entry gear table, derived from a hard-coded seed.
const std::array<std::uint64_t, 256>& rolling_table();

/// Boundary positions only. Deterministic; empty input gives no spans.
std::vector<ChunkSpan> find_boundaries(std::span<const std::uint8_t> input, const ChunkParams& params = {});

/// Splits input into chunks whose payloads concatenate back to input.
std::vector<Chunk> chunk_stream(std::span<const std::uint8_t> input, const ChunkParams& params = {});

}  // namespace ecstore
