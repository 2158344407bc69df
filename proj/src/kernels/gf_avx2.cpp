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

// Split-nibble multiply: c*x = lo[x & 15] ^ hi[x >> 4], with both 16-entry
// tables held in a register and looked up by vpshufb, 32 bytes per step.
// This translation unit is compiled with -mavx2 and only entered after the
// dispatcher has checked the CPU.

#include "ecstore/gf256.hpp"

#if defined(__x86_64__) && defined(__AVX2__)
#include <immintrin.h>

namespace ecstore::gf {

namespace {

struct NibbleTables {
  __m256i lo;
  __m256i hi;
};

inline NibbleTables nibble_tables(std::uint8_t c) {
  alignas(16) std::uint8_t lo[16];
  alignas(16) std::uint8_t hi[16];
  const std::uint8_t* row = tables().mul[c];
  for (int i = 0; i < 16; ++i) {
    lo[i] = row[i];
    hi[i] = row[i << 4];
  }
  const __m128i l = _mm_load_si128(reinterpret_cast<const __m128i*>(lo));
  const __m128i h = _mm_load_si128(reinterpret_cast<const __m128i*>(hi));
  return {_mm256_broadcastsi128_si256(l), _mm256_broadcastsi128_si256(h)};
}

inline __m256i mul32(const NibbleTables& t, __m256i x) {
  const __m256i mask = _mm256_set1_epi8(0x0F);
  const __m256i lo = _mm256_and_si256(x, mask);
  const __m256i hi = _mm256_and_si256(_mm256_srli_epi64(x, 4), mask);
  return _mm256_xor_si256(_mm256_shuffle_epi8(t.lo, lo), _mm256_shuffle_epi8(t.hi, hi));
}

void avx2_mul_add(std::uint8_t* dst, const std::uint8_t* src, std::size_t len, std::uint8_t c) {
  if (c == 0) return;
  std::size_t i = 0;
  if (c == 1) {
    for (; i + 32 <= len; i += 32) {
      const __m256i s = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(src + i));
      const __m256i d = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(dst + i));
      _mm256_storeu_si256(reinterpret_cast<__m256i*>(dst + i), _mm256_xor_si256(d, s));
    }
    for (; i < len; ++i) dst[i] ^= src[i];
    return;
  }
  const NibbleTables t = nibble_tables(c);
  for (; i + 32 <= len; i += 32) {
    const __m256i s = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(src + i));
    const __m256i d = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(dst + i));
    _mm256_storeu_si256(reinterpret_cast<__m256i*>(dst + i), _mm256_xor_si256(d, mul32(t, s)));
  }
  const std::uint8_t* row = tables().mul[c];
  for (; i < len; ++i) dst[i] ^= row[src[i]];
}

void avx2_mul(std::uint8_t* dst, const std::uint8_t* src, std::size_t len, std::uint8_t c) {
  if (c <= 1) {
    scalar_kernel().mul(dst, src, len, c);
    return;
  }
  const NibbleTables t = nibble_tables(c);
  std::size_t i = 0;
  for (; i + 32 <= len; i += 32) {
    const __m256i s = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(src + i));
    _mm256_storeu_si256(reinterpret_cast<__m256i*>(dst + i), mul32(t, s));
  }
  const std::uint8_t* row = tables().mul[c];
  for (; i < len; ++i) dst[i] = row[src[i]];
}

}  // namespace

const RegionKernel* avx2_kernel_impl() {
  static const RegionKernel k{KernelKind::avx2, "avx2", &avx2_mul_add, &avx2_mul};
  return &k;
}

}  // namespace ecstore::gf

#else

namespace ecstore::gf {
const RegionKernel* avx2_kernel_impl() { return nullptr; }
}  // namespace ecstore::gf

#endif
