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

// Big-endian append writer and bounds-checked reader shared by the metadata
// and wire encoders.

#pragma once

#include <cstring>
#include <span>
#include <string>
#include <string_view>

#include "ecstore/common.hpp"

namespace ecstore {

class ByteWriter {
 public:
  explicit ByteWriter(Bytes& out) : out_(out) {}

  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) { put_be(v, 2); }
  void u32(std::uint32_t v) { put_be(v, 4); }
  void u64(std::uint64_t v) { put_be(v, 8); }

  void raw(std::span<const std::uint8_t> data) { out_.insert(out_.end(), data.begin(), data.end()); }
  void id(const ChunkId& c) { raw(c.digest); }

  /// u16 length prefix + bytes.
  void str(std::string_view s) {
    if (s.size() > 0xFFFF) throw Error(Errc::invalid_argument, "string longer than 65535 bytes");
    u16(static_cast<std::uint16_t>(s.size()));
    raw({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()});
  }

  /// u32 length prefix + bytes.
  void blob(std::span<const std::uint8_t> data) {
    if (data.size() > 0xFFFFFFFFull) throw Error(Errc::invalid_argument, "blob longer than 2^32-1");
    u32(static_cast<std::uint32_t>(data.size()));
    raw(data);
  }

  std::size_t size() const { return out_.size(); }

 private:
  void put_be(std::uint64_t v, int width) {
    for (int shift = (width - 1) * 8; shift >= 0; shift -= 8) out_.push_back(static_cast<std::uint8_t>(v >> shift));
  }

  Bytes& out_;
};

/// Reads fail with Errc::short_body when the span runs out.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get_be(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get_be(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get_be(4)); }
  std::uint64_t u64() { return get_be(8); }

  std::span<const std::uint8_t> raw(std::size_t n) {
    need(n);
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  ChunkId id() {
    ChunkId c;
    auto s = raw(c.digest.size());
    std::memcpy(c.digest.data(), s.data(), s.size());
    return c;
  }

  std::string str() {
    auto n = u16();
    auto s = raw(n);
    return {reinterpret_cast<const char*>(s.data()), s.size()};
  }

  Bytes blob() {
    auto n = u32();
    auto s = raw(n);
    return {s.begin(), s.end()};
  }

  std::size_t remaining() const { return in_.size() - pos_; }
  std::size_t position() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw Error(Errc::short_body, "need " + std::to_string(n) + " bytes, have " + std::to_string(in_.size() - pos_));
  }

  std::uint64_t get_be(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v = (v << 8) | in_[pos_ + i];
    pos_ += width;
    return v;
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace ecstore
