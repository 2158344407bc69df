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

// File chunk metadata: a file is exactly its ordered (chunk id, cluster id)
// list. Per-user tables hold one FileMeta per name; reference counts are
// kept per (chunk id, cluster id) so that ULB's per-cluster copies are
// counted separately.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "ecstore/byte_io.hpp"
#include "ecstore/chunking.hpp"
#include "ecstore/common.hpp"

namespace ecstore {

struct ChunkRef {
  ChunkId chunk_id;
  ClusterId cluster_id = kUnplaced;

  auto operator<=>(const ChunkRef&) const = default;
  bool operator==(const ChunkRef&) const = default;
};

struct FileMeta {
  std::string file_name;
  std::string user_id;
  std::uint64_t timestamp = 0;  // ms since epoch
  std::vector<ChunkRef> chunks;
  std::uint64_t total_len = 0;

  bool operator==(const FileMeta&) const = default;
};

/// Placements are positional: placements[i] is the cluster of chunks[i].
FileMeta build_file_meta(std::string user_id, std::string file_name, std::span<const Chunk> chunks,
                         std::span<const ClusterId> placements, std::uint64_t timestamp);

/// Distinct refs of meta, in first-occurrence order.
std::vector<ChunkRef> distinct_refs(const FileMeta& meta);

/// Refs whose chunk id is not in known, deduplicated, in first-occurrence
/// order.
std::vector<ChunkRef> missing_chunks(const FileMeta& meta, const std::unordered_set<ChunkId>& known);

/// Same, with presence decided per ref (per-cluster presence sets).
std::vector<ChunkRef> missing_chunks(const FileMeta& meta, const std::function<bool(const ChunkRef&)>& present);

/// Last writer wins. Equal timestamps keep the remote (switching-node)
/// copy. Throws Errc::invalid_argument when both sides are absent or when
/// they name different files.
const FileMeta& sync_meta(const FileMeta* local, const FileMeta* remote);

class ChunkMetaTable {
 public:
  explicit ChunkMetaTable(std::string user_id = {}) : user_id_(std::move(user_id)) {}

  const std::string& user_id() const { return user_id_; }
  const FileMeta* find(const std::string& file_name) const;
  void put(FileMeta meta);
  bool erase(const std::string& file_name);
  const std::map<std::string, FileMeta>& files() const { return files_; }

 private:
  std::string user_id_;
  std::map<std::string, FileMeta> files_;
};

class RefCountTable {
 public:
  /// Adjusts each distinct ref of meta once. Returns refs that dropped to
  /// zero (and were erased). A decrement that would go below zero throws
  /// Errc::corruption and leaves the table unchanged.
  std::vector<ChunkRef> apply(const FileMeta& meta, int delta);

  std::uint64_t count(const ChunkRef& ref) const;
  const std::map<ChunkRef, std::uint64_t>& counts() const { return counts_; }
  void set(const ChunkRef& ref, std::uint64_t count);
  void clear() { counts_.clear(); }

  /// Counts rebuilt from scratch over a set of files.
  static RefCountTable recount(const std::vector<const FileMeta*>& metas);

  bool operator==(const RefCountTable&) const = default;

 private:
  std::map<ChunkRef, std::uint64_t> counts_;
};

// Binary form: u16 name length + name, u16 user length + user, u64
// timestamp, u64 total_len, u32 entry count, then per entry the 20-byte
// chunk id and a u16 cluster id. All integers big-endian.
void write_file_meta(ByteWriter& out, const FileMeta& meta);
FileMeta read_file_meta(ByteReader& in);
Bytes encode_file_meta(const FileMeta& meta);
FileMeta decode_file_meta(std::span<const std::uint8_t> data);
std::size_t encoded_size(const FileMeta& meta);

/// Snapshot of every user table, written to a temp file and renamed into
/// place.
void save_meta_tables(const std::filesystem::path& path, const std::map<std::string, ChunkMetaTable>& tables);
std::map<std::string, ChunkMetaTable> load_meta_tables(const std::filesystem::path& path);

/// Writes data to path atomically (temp file + rename).
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> data);
Bytes read_file(const std::filesystem::path& path);

}  // namespace ecstore
