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

#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ecstore {

using Bytes = std::vector<std::uint8_t>;
using ClusterId = std::uint16_t;
using Address = std::string;

/// Placeholder cluster id carried by entries the switching node has not
/// bound yet.
inline constexpr ClusterId kUnplaced = 0xFFFF;

/// Error categories. The numeric values travel on the wire inside status
/// replies, so they are append-only.
enum class Errc : std::uint8_t {
  ok = 0,
  invalid_argument = 1,
  insufficient_pieces = 2,
  inconsistent_pieces = 3,
  corruption = 4,
  capacity_exhausted = 5,
  not_found = 6,
  integrity = 7,
  partial_store = 8,
  unrecoverable_chunk = 9,
  incomplete_frame = 10,
  bad_length = 11,
  unknown_type = 12,
  short_body = 13,
  malformed_body = 14,
  routing = 15,
  transport = 16,
  protocol = 17,
  config = 18,
  io = 19,
  stale = 20,
  cancelled = 21,
};

std::string_view errc_name(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

/// 160-bit content digest naming a chunk.
struct ChunkId {
  std::array<std::uint8_t, 20> digest{};

  auto operator<=>(const ChunkId&) const = default;
  bool operator==(const ChunkId&) const = default;

  std::string hex() const;
  static ChunkId from_hex(std::string_view hex);
};

std::string to_hex(const std::uint8_t* data, std::size_t len);

/// Value-or-error handed to asynchronous completions.
template <typename T>
class Result {
 public:
  Result(T value) : value_(std::move(value)) {}
  Result(Error error) : error_(std::move(error)) {}

  bool ok() const { return value_.has_value(); }
  explicit operator bool() const { return ok(); }

  const T& value() const& {
    if (!value_) throw *error_;
    return *value_;
  }
  T& value() & {
    if (!value_) throw *error_;
    return *value_;
  }
  T&& value() && {
    if (!value_) throw *error_;
    return std::move(*value_);
  }
  const Error& error() const { return *error_; }

 private:
  std::optional<T> value_;
  std::optional<Error> error_;
};

}  // namespace ecstore

template <>
struct std::hash<ecstore::ChunkId> {
  std::size_t operator()(const ecstore::ChunkId& id) const noexcept {
    std::size_t h = 0;
    for (int i = 0; i < 8; ++i) h = (h << 8) | id.digest[i];
    return h;
  }
};
