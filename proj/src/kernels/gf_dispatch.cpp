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

#include <cassert>
#include <cstdlib>
#include <string_view>

#include "ecstore/gf256.hpp"

namespace ecstore::gf {

const RegionKernel* avx2_kernel_impl();

const RegionKernel* avx2_kernel() {
#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
  static const bool supported = __builtin_cpu_supports("avx2");
  return supported ? avx2_kernel_impl() : nullptr;
#else
  return nullptr;
#endif
}

const RegionKernel& active_kernel() {
  static const RegionKernel& chosen = []() -> const RegionKernel& {
    const char* env = std::getenv("ECSTORE_GF_KERNEL");
    if (env != nullptr && std::string_view(env) == "scalar") return scalar_kernel();
    if (const RegionKernel* k = avx2_kernel()) return *k;
    return scalar_kernel();
  }();
  return chosen;
}

void region_mul_add(std::span<std::uint8_t> dst, std::span<const std::uint8_t> src, std::uint8_t c) {
  assert(dst.size() == src.size());
  active_kernel().mul_add(dst.data(), src.data(), dst.size(), c);
}

void region_mul(std::span<std::uint8_t> dst, std::span<const std::uint8_t> src, std::uint8_t c) {
  assert(dst.size() == src.size());
  active_kernel().mul(dst.data(), src.data(), dst.size(), c);
}

}  // namespace ecstore::gf
