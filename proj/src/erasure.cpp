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

#include "ecstore/erasure.hpp"

#include <algorithm>
#include <cstring>
#include <map>
#include <memory>
#include <mutex>

#include "ecstore/gf256.hpp"

namespace ecstore {

void CodingParams::validate() const {
  if (k < 1 || k > n) throw Error(Errc::invalid_argument, "coding params require 1 <= k <= n <= 255");
}

std::size_t piece_size(std::uint64_t original_len, const CodingParams& params) {
  return static_cast<std::size_t>((original_len + params.k - 1) / params.k);
}

std::uint64_t expansion(std::uint64_t original_len, const CodingParams& params) {
  return static_cast<std::uint64_t>(params.n) * piece_size(original_len, params);
}

void invert_matrix(std::vector<std::uint8_t>& m, std::size_t k) {
  std::vector<std::uint8_t> inv(k * k, 0);
  for (std::size_t i = 0; i < k; ++i) inv[i * k + i] = 1;

  for (std::size_t col = 0; col < k; ++col) {
    std::size_t pivot = col;
    while (pivot < k && m[pivot * k + col] == 0) ++pivot;
    if (pivot == k) throw Error(Errc::corruption, "singular decode matrix");
    if (pivot != col) {
      std::swap_ranges(m.begin() + pivot * k, m.begin() + pivot * k + k, m.begin() + col * k);
      std::swap_ranges(inv.begin() + pivot * k, inv.begin() + pivot * k + k, inv.begin() + col * k);
    }
    const std::uint8_t scale = gf::inv(m[col * k + col]);
    for (std::size_t j = 0; j < k; ++j) {
      m[col * k + j] = gf::mul(m[col * k + j], scale);
      inv[col * k + j] = gf::mul(inv[col * k + j], scale);
    }
    for (std::size_t row = 0; row < k; ++row) {
      const std::uint8_t f = m[row * k + col];
      if (row == col || f == 0) continue;
      for (std::size_t j = 0; j < k; ++j) {
        m[row * k + j] ^= gf::mul(f, m[col * k + j]);
        inv[row * k + j] ^= gf::mul(f, inv[col * k + j]);
      }
    }
  }
  m.swap(inv);
}

const std::vector<std::uint8_t>& generator_matrix(const CodingParams& params) {
  params.validate();
  static std::mutex mu;
  static std::map<std::pair<int, int>, std::unique_ptr<std::vector<std::uint8_t>>> cache;

  std::lock_guard lock(mu);
  auto& slot = cache[{params.n, params.k}];
  if (slot) return *slot;

  const std::size_t n = params.n;
  const std::size_t k = params.k;
  std::vector<std::uint8_t> vander(n * k);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) vander[i * k + j] = gf::pow(static_cast<std::uint8_t>(i), static_cast<unsigned>(j));

  std::vector<std::uint8_t> top(vander.begin(), vander.begin() + k * k);
  invert_matrix(top, k);

  auto gen = std::make_unique<std::vector<std::uint8_t>>(n * k, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      std::uint8_t acc = 0;
      for (std::size_t t = 0; t < k; ++t) acc ^= gf::mul(vander[i * k + t], top[t * k + j]);
      (*gen)[i * k + j] = acc;
    }
  slot = std::move(gen);
  return *slot;
}

std::vector<CodedPiece> encode_chunk(std::span<const std::uint8_t> payload, const CodingParams& params,
                                     const ChunkId& chunk_id) {
  params.validate();
  if (payload.empty()) throw Error(Errc::invalid_argument, "cannot encode an empty chunk");

  const std::size_t k = params.k;
  const std::size_t size = piece_size(payload.size(), params);
  const auto& gen = generator_matrix(params);

  std::vector<CodedPiece> pieces(params.n);
  for (std::size_t i = 0; i < params.n; ++i) {
    auto& p = pieces[i];
    p.chunk_id = chunk_id;
    p.index = static_cast<std::uint8_t>(i);
    p.params = params;
    p.original_len = payload.size();
    p.payload.assign(size, 0);
  }
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t begin = j * size;
    if (begin < payload.size()) {
      const std::size_t len = std::min(size, payload.size() - begin);
      std::memcpy(pieces[j].payload.data(), payload.data() + begin, len);
    }
  }
  for (std::size_t i = k; i < params.n; ++i) {
    auto& dst = pieces[i].payload;
    for (std::size_t j = 0; j < k; ++j) gf::region_mul_add(dst, pieces[j].payload, gen[i * k + j]);
  }
  return pieces;
}

Bytes decode_chunk(std::span<const CodedPiece> pieces, const CodingParams& params, std::uint64_t original_len) {
  params.validate();
  const std::size_t k = params.k;
  const std::size_t size = piece_size(original_len, params);

  std::map<std::uint8_t, const CodedPiece*> by_index;
  const ChunkId* id = nullptr;
  for (const auto& p : pieces) {
    if (id == nullptr) id = &p.chunk_id;
    if (p.chunk_id != *id || p.params != params || p.original_len != original_len || p.payload.size() != size ||
        p.index >= params.n)
      throw Error(Errc::inconsistent_pieces, "piece " + std::to_string(p.index) + " does not match its siblings");
    auto [it, inserted] = by_index.emplace(p.index, &p);
    if (!inserted && it->second->payload != p.payload)
      throw Error(Errc::inconsistent_pieces, "two different pieces claim index " + std::to_string(p.index));
  }
  if (by_index.size() < k)
    throw Error(Errc::insufficient_pieces,
                "have " + std::to_string(by_index.size()) + " distinct pieces, need " + std::to_string(k));

  std::vector<const CodedPiece*> chosen;
  chosen.reserve(k);
  for (const auto& [index, piece] : by_index) {
    if (chosen.size() == k) break;
    chosen.push_back(piece);
  }

  Bytes out(size * k, 0);
  const bool systematic = chosen.back()->index == k - 1;
  if (systematic) {
    for (std::size_t j = 0; j < k; ++j) std::memcpy(out.data() + j * size, chosen[j]->payload.data(), size);
  } else {
    const auto& gen = generator_matrix(params);
    std::vector<std::uint8_t> sub(k * k);
    for (std::size_t r = 0; r < k; ++r)
      std::memcpy(sub.data() + r * k, gen.data() + static_cast<std::size_t>(chosen[r]->index) * k, k);
    invert_matrix(sub, k);
    std::vector<const CodedPiece*> direct(k, nullptr);
    for (const auto* p : chosen)
      if (p->index < k) direct[p->index] = p;
    for (std::size_t j = 0; j < k; ++j) {
      std::span<std::uint8_t> dst(out.data() + j * size, size);
      // Data slices already in hand are copied instead of recomputed.
      if (direct[j] != nullptr) {
        std::memcpy(dst.data(), direct[j]->payload.data(), size);
        continue;
      }
      for (std::size_t r = 0; r < k; ++r) gf::region_mul_add(dst, chosen[r]->payload, sub[j * k + r]);
    }
  }
  out.resize(original_len);
  return out;
}

}  // namespace ecstore
