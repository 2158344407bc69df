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

// GF(2^8) over the primitive polynomial x^8 + x^4 + x^3 + x^2 + 1 (0x11D).
//
// Scalar element arithmetic uses log/antilog tables. Bulk region operations
// (dst ^= c * src) go through a kernel table selected once at startup:
// the scalar reference kernel, or an AVX2 nibble-shuffle kernel when the
// CPU has it. All kernels produce identical bytes.

#pragma once

#include <cstdint>
#include <span>
#include <string_view>

namespace ecstore::gf {

inline constexpr unsigned kPolynomial = 0x11D;

struct Tables {
  std::uint8_t exp[512];  // doubled so exp[log a + log b] needs no reduction
  std::uint8_t log[256];  // log[0] unused
  std::uint8_t mul[256][256];
};

const Tables& tables();

inline std::uint8_t add(std::uint8_t a, std::uint8_t b) { return a ^ b; }
inline std::uint8_t mul(std::uint8_t a, std::uint8_t b) { return tables().mul[a][b]; }
std::uint8_t inv(std::uint8_t a);  // a != 0
std::uint8_t div(std::uint8_t a, std::uint8_t b);  // b != 0
std::uint8_t pow(std::uint8_t a, unsigned e);

enum class KernelKind { scalar, avx2 };

struct RegionKernel {
  KernelKind kind;
  std::string_view name;
  /// dst[i] ^= c * src[i]
  void (*mul_add)(std::uint8_t* dst, const std::uint8_t* src, std::size_t len, std::uint8_t c);
  /// dst[i] = c * src[i]
  void (*mul)(std::uint8_t* dst, const std::uint8_t* src, std::size_t len, std::uint8_t c);
};

const RegionKernel& scalar_kernel();
/// nullptr when the build or the CPU lacks AVX2.
const RegionKernel* avx2_kernel();

/// Best kernel for this CPU. ECSTORE_GF_KERNEL=scalar forces the reference
/// path.
const RegionKernel& active_kernel();

void region_mul_add(std::span<std::uint8_t> dst, std::span<const std::uint8_t> src, std::uint8_t c);
void region_mul(std::span<std::uint8_t> dst, std::span<const std::uint8_t> src, std::uint8_t c);

}  // namespace ecstore::gf
