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

#include <cstring>

#include "ecstore/gf256.hpp"

namespace ecstore::gf {

const Tables& tables() {
  static const Tables t = [] {
    Tables t{};
    unsigned x = 1;
    for (int i = 0; i < 255; ++i) {
      t.exp[i] = static_cast<std::uint8_t>(x);
      t.log[x] = static_cast<std::uint8_t>(i);
      x <<= 1;
      if (x & 0x100) x ^= kPolynomial;
    }
    for (int i = 255; i < 512; ++i) t.exp[i] = t.exp[i - 255];
    for (int a = 0; a < 256; ++a)
      for (int b = 0; b < 256; ++b)
        t.mul[a][b] = (a == 0 || b == 0) ? 0 : t.exp[t.log[a] + t.log[b]];
    return t;
  }();
  return t;
}

std::uint8_t inv(std::uint8_t a) {
  const auto& t = tables();
  return t.exp[255 - t.log[a]];
}

std::uint8_t div(std::uint8_t a, std::uint8_t b) {
  if (a == 0) return 0;
  const auto& t = tables();
  return t.exp[t.log[a] + 255 - t.log[b]];
}

std::uint8_t pow(std::uint8_t a, unsigned e) {
  if (e == 0) return 1;
  if (a == 0) return 0;
  const auto& t = tables();
  return t.exp[(t.log[a] * static_cast<unsigned long>(e)) % 255];
}

namespace {

void scalar_mul_add(std::uint8_t* dst, const std::uint8_t* src, std::size_t len, std::uint8_t c) {
  if (c == 0) return;
  if (c == 1) {
    for (std::size_t i = 0; i < len; ++i) dst[i] ^= src[i];
    return;
  }
  const std::uint8_t* row = tables().mul[c];
  for (std::size_t i = 0; i < len; ++i) dst[i] ^= row[src[i]];
}

void scalar_mul(std::uint8_t* dst, const std::uint8_t* src, std::size_t len, std::uint8_t c) {
  if (c == 0) {
    std::memset(dst, 0, len);
    return;
  }
  if (c == 1) {
    std::memmove(dst, src, len);
    return;
  }
  const std::uint8_t* row = tables().mul[c];
  for (std::size_t i = 0; i < len; ++i) dst[i] = row[src[i]];
}

}  // namespace

const RegionKernel& scalar_kernel() {
  static const RegionKernel k{KernelKind::scalar, "scalar", &scalar_mul_add, &scalar_mul};
  return k;
}

}  // namespace ecstore::gf
