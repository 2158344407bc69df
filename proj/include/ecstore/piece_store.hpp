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

// Per-node piece storage.
//
// With a directory, each piece is one file named <hex chunk id>.<index>
// holding a 10-byte header (u64 original_len, u8 n, u8 k) and the payload.
// Files are written to a temp name and renamed, so a crash leaves either
// the old piece or the new one. Without a directory the store is in memory.
// Safe for concurrent use.

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <shared_mutex>
#include <vector>

#include "ecstore/erasure.hpp"

namespace ecstore {

inline constexpr std::size_t kPieceHeaderSize = 10;

struct PieceKey {
  ChunkId chunk_id;
  std::uint8_t index = 0;

  auto operator<=>(const PieceKey&) const = default;
  bool operator==(const PieceKey&) const = default;
};

struct PieceInfo {
  PieceKey key;
  std::uint64_t payload_len = 0;
};

class PieceStore {
 public:
  /// Empty dir keeps pieces in memory. An existing dir is scanned.
  explicit PieceStore(std::filesystem::path dir = {});

  /// Returns true when a piece with this key already existed (it is
  /// replaced).
  bool put(const CodedPiece& piece);
  std::optional<CodedPiece> get(const ChunkId& chunk_id, std::uint8_t index) const;
  bool contains(const ChunkId& chunk_id, std::uint8_t index) const;
  bool erase(const ChunkId& chunk_id, std::uint8_t index);

  /// Sum of stored payload lengths, maintained incrementally.
  std::uint64_t used_bytes() const;
  std::size_t piece_count() const;
  std::vector<PieceInfo> list() const;

  /// Recomputes used bytes from the backing medium (the files on disk, or
  /// the in-memory map).
  std::uint64_t scan_used_bytes() const;

  const std::filesystem::path& dir() const { return dir_; }
  bool persistent() const { return !dir_.empty(); }

  static std::string file_name(const PieceKey& key);
  static std::optional<PieceKey> parse_file_name(const std::string& name);

 private:
  std::filesystem::path path_of(const PieceKey& key) const { return dir_ / file_name(key); }
  CodedPiece read_piece(const PieceKey& key) const;

  std::filesystem::path dir_;
  mutable std::shared_mutex mu_;
  // In memory: full pieces. On disk: only lengths; payloads are read back
  // from the files.
  std::map<PieceKey, CodedPiece> memory_;
  std::map<PieceKey, std::uint64_t> index_;
  std::uint64_t used_ = 0;
};

}  // namespace ecstore
