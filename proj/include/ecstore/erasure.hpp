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

// Systematic Reed-Solomon (n, k) coding over GF(2^8).
//
// The generator is an n x k Vandermonde matrix V[i][j] = i^j multiplied by
// the inverse of its top k x k block, so rows 0..k-1 are the identity and
// any k rows are invertible. A chunk is zero-padded to k * ceil(len / k)
// bytes, sliced into k data pieces, and extended with n - k parity pieces.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ecstore/common.hpp"

namespace ecstore {

struct CodingParams {
  std::uint8_t n = 1;
  std::uint8_t k = 1;

  bool operator==(const CodingParams&) const = default;
  void validate() const;
};

struct CodedPiece {
  ChunkId chunk_id;
  std::uint8_t index = 0;
  CodingParams params;
  std::uint64_t original_len = 0;
  Bytes payload;

  bool operator==(const CodedPiece&) const = default;
};

/// ceil(len / k), the payload size of every piece of a len-byte chunk.
std::size_t piece_size(std::uint64_t original_len, const CodingParams& params);

/// n * piece_size: bytes a chunk occupies across its cluster.
std::uint64_t expansion(std::uint64_t original_len, const CodingParams& params);

/// Row-major n x k generator; rows 0..k-1 are the identity. Cached per
/// (n, k) and safe to call concurrently.
const std::vector<std::uint8_t>& generator_matrix(const CodingParams& params);

/// Inverts a k x k row-major matrix in place. Throws Errc::corruption when
/// the matrix is singular.
void invert_matrix(std::vector<std::uint8_t>& m, std::size_t k);

/// chunk_id is copied into every piece; it is not recomputed.
std::vector<CodedPiece> encode_chunk(std::span<const std::uint8_t> payload, const CodingParams& params,
                                     const ChunkId& chunk_id = {});

/// Uses the k lowest distinct indices; surplus pieces are ignored.
Bytes decode_chunk(std::span<const CodedPiece> pieces, const CodingParams& params, std::uint64_t original_len);

}  // namespace ecstore
