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

#include "ecstore/common.hpp"

namespace ecstore {

std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::ok: return "ok";
    case Errc::invalid_argument: return "invalid-argument";
    case Errc::insufficient_pieces: return "insufficient-pieces";
    case Errc::inconsistent_pieces: return "inconsistent-pieces";
    case Errc::corruption: return "corruption";
    case Errc::capacity_exhausted: return "capacity-exhausted";
    case Errc::not_found: return "not-found";
    case Errc::integrity: return "integrity";
    case Errc::partial_store: return "partial-store";
    case Errc::unrecoverable_chunk: return "unrecoverable-chunk";
    case Errc::incomplete_frame: return "incomplete-frame";
    case Errc::bad_length: return "bad-length";
    case Errc::unknown_type: return "unknown-type";
    case Errc::short_body: return "short-body";
    case Errc::malformed_body: return "malformed-body";
    case Errc::routing: return "routing";
    case Errc::transport: return "transport";
    case Errc::protocol: return "protocol";
    case Errc::config: return "config";
    case Errc::io: return "io";
    case Errc::stale: return "stale";
    case Errc::cancelled: return "cancelled";
  }
  return "unknown";
}

std::string to_hex(const std::uint8_t* data, std::size_t len) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out(len * 2, '0');
  for (std::size_t i = 0; i < len; ++i) {
    out[2 * i] = digits[data[i] >> 4];
    out[2 * i + 1] = digits[data[i] & 15];
  }
  return out;
}

std::string ChunkId::hex() const { return to_hex(digest.data(), digest.size()); }

ChunkId ChunkId::from_hex(std::string_view hex) {
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  ChunkId id;
  if (hex.size() != 40) throw Error(Errc::invalid_argument, "chunk id hex must be 40 characters");
  for (std::size_t i = 0; i < 20; ++i) {
    int hi = nibble(hex[2 * i]);
    int lo = nibble(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) throw Error(Errc::invalid_argument, "bad hex digit in chunk id");
    id.digest[i] = static_cast<std::uint8_t>(hi << 4 | lo);
  }
  return id;
}

}  // namespace ecstore
