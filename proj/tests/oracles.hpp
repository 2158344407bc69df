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

// Independent reference computations for tests. Nothing here calls the
// library code it checks.

#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "ecstore/chunking.hpp"

namespace oracle {

using Bytes = std::vector<std::uint8_t>;

inline Bytes random_bytes(std::uint64_t seed, std::size_t n) {
  std::mt19937_64 rng(seed);
  Bytes out(n);
  for (auto& b : out) b = static_cast<std::uint8_t>(rng() >> 56);
  return out;
}

// Carry-less shift-and-add multiply reduced by x^8+x^4+x^3+x^2+1.
inline std::uint8_t gf_mul(std::uint8_t a, std::uint8_t b) {
  unsigned acc = 0, x = a;
  for (unsigned y = b; y != 0; y >>= 1) {
    if (y & 1) acc ^= x;
    x <<= 1;
    if (x & 0x100) x ^= 0x11D;
  }
  return static_cast<std::uint8_t>(acc);
}

inline std::uint8_t gf_pow(std::uint8_t a, unsigned e) {
  std::uint8_t r = 1;
  while (e-- > 0) r = gf_mul(r, a);
  return r;
}

inline std::uint8_t gf_inv(std::uint8_t a) {
  for (unsigned b = 1; b < 256; ++b)
    if (gf_mul(a, static_cast<std::uint8_t>(b)) == 1) return static_cast<std::uint8_t>(b);
  throw std::runtime_error("zero has no inverse");
}

// Gauss-Jordan over GF(2^8) on a k x k row-major matrix.
inline std::vector<std::uint8_t> gf_invert(std::vector<std::uint8_t> m, std::size_t k) {
  std::vector<std::uint8_t> inv(k * k, 0);
  for (std::size_t i = 0; i < k; ++i) inv[i * k + i] = 1;
  for (std::size_t col = 0; col < k; ++col) {
    std::size_t pivot = col;
    while (pivot < k && m[pivot * k + col] == 0) ++pivot;
    if (pivot == k) throw std::runtime_error("singular");
    for (std::size_t j = 0; j < k; ++j) {
      std::swap(m[col * k + j], m[pivot * k + j]);
      std::swap(inv[col * k + j], inv[pivot * k + j]);
    }
    const std::uint8_t s = gf_inv(m[col * k + col]);
    for (std::size_t j = 0; j < k; ++j) {
      m[col * k + j] = gf_mul(m[col * k + j], s);
      inv[col * k + j] = gf_mul(inv[col * k + j], s);
    }
    for (std::size_t r = 0; r < k; ++r) {
      if (r == col || m[r * k + col] == 0) continue;
      const std::uint8_t f = m[r * k + col];
      for (std::size_t j = 0; j < k; ++j) {
        m[r * k + j] ^= gf_mul(f, m[col * k + j]);
        inv[r * k + j] ^= gf_mul(f, inv[col * k + j]);
      }
    }
  }
  return inv;
}

// Systematic generator: Vandermonde rows x_i = i, times the inverse of its
// top k x k block.
inline std::vector<std::uint8_t> generator(std::size_t n, std::size_t k) {
  std::vector<std::uint8_t> v(n * k);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) v[i * k + j] = gf_pow(static_cast<std::uint8_t>(i), static_cast<unsigned>(j));
  auto top = gf_invert(std::vector<std::uint8_t>(v.begin(), v.begin() + k * k), k);
  std::vector<std::uint8_t> g(n * k, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j)
      for (std::size_t t = 0; t < k; ++t) g[i * k + j] ^= gf_mul(v[i * k + t], top[t * k + j]);
  return g;
}

// Piece payloads for a zero-padded payload, computed element by element.
inline std::vector<Bytes> encode(const Bytes& payload, std::size_t n, std::size_t k) {
  const std::size_t size = (payload.size() + k - 1) / k;
  Bytes padded(payload);
  padded.resize(size * k, 0);
  const auto g = generator(n, k);
  std::vector<Bytes> out(n, Bytes(size, 0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t b = 0; b < size; ++b) {
      std::uint8_t acc = 0;
      for (std::size_t j = 0; j < k; ++j) acc ^= gf_mul(g[i * k + j], padded[j * size + b]);
      out[i][b] = acc;
    }
  return out;
}

// Content-defined boundaries recomputed from scratch at every candidate
// length: the hash of a window ending at L is sum(table[b_j] << (L-1-j)).
inline std::vector<std::size_t> chunk_lengths(const Bytes& input, const ecstore::ChunkParams& p) {
  const auto& table = ecstore::rolling_table();
  const std::uint64_t mask = (std::uint64_t{1} << p.boundary_mask_bits) - 1;
  std::vector<std::size_t> out;
  std::size_t start = 0;
  while (start < input.size()) {
    const std::size_t remaining = input.size() - start;
    if (remaining <= p.min_size) {
      out.push_back(remaining);
      break;
    }
    const std::size_t limit = std::min(remaining, p.max_size);
    std::size_t cut = limit;
    for (std::size_t len = p.min_size; len <= limit; ++len) {
      std::uint64_t h = 0;
      const std::size_t from = len > p.window_size ? len - p.window_size : 0;
      for (std::size_t j = from; j < len; ++j) h += table[input[start + j]] << (len - 1 - j);
      if ((h & mask) == 0) {
        cut = len;
        break;
      }
    }
    out.push_back(cut);
    start += cut;
  }
  return out;
}

inline std::uint64_t binomial(unsigned n, unsigned k) {
  std::uint64_t r = 1;
  for (unsigned i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// Calls fn on every k-subset of {0..n-1} (as an index vector).
template <typename Fn>
void for_each_subset(unsigned n, unsigned k, Fn&& fn) {
  std::vector<unsigned> idx(k);
  for (unsigned i = 0; i < k; ++i) idx[i] = i;
  while (true) {
    fn(idx);
    int i = static_cast<int>(k) - 1;
    while (i >= 0 && idx[i] == n - k + static_cast<unsigned>(i)) --i;
    if (i < 0) return;
    ++idx[i];
    for (unsigned j = static_cast<unsigned>(i) + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

}  // namespace oracle
