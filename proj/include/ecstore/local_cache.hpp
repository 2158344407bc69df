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

// End-device chunk and metadata cache.
//
// Chunks are evicted least-recently-used once their total size exceeds the
// byte budget; a budget of 0 caches no chunks. Metadata is never evicted.
// With a directory, chunks live in <dir>/chunks/<hex id> and metadata in
// <dir>/metas.bin, so the cache survives process restarts. Every operation
// is safe to call concurrently.

#pragma once

#include <filesystem>
#include <list>
#include <map>
#include <mutex>
#include <optional>
#include <unordered_map>
#include <vector>

#include "ecstore/metadata.hpp"

namespace ecstore {

class LocalCache {
 public:
  static constexpr std::uint64_t kDefaultBudget = 256ull << 20;

  explicit LocalCache(std::uint64_t budget = kDefaultBudget, std::filesystem::path dir = {});

  /// Throws Errc::integrity when payload does not hash to id.
  void put_chunk(const ChunkId& id, Bytes payload);
  /// Payloads read back from disk are re-verified; a damaged file is
  /// dropped and reported as a miss.
  std::optional<Bytes> get_chunk(const ChunkId& id);
  bool has_chunk(const ChunkId& id) const;
  void clear_chunks();

  std::uint64_t chunk_bytes() const;
  std::size_t chunk_count() const;
  std::uint64_t budget() const { return budget_; }

  void put_meta(const FileMeta& meta);
  std::optional<FileMeta> find_meta(const std::string& file_name) const;
  bool erase_meta(const std::string& file_name);
  std::vector<FileMeta> metas() const;

 private:
  struct Entry {
    std::list<ChunkId>::iterator lru;
    std::uint64_t size = 0;
    Bytes payload;  // empty when disk-backed
  };

  std::filesystem::path chunk_path(const ChunkId& id) const;
  void evict_locked();
  void remove_locked(const ChunkId& id);
  void save_metas_locked() const;

  std::uint64_t budget_;
  std::filesystem::path dir_;
  mutable std::mutex mu_;
  std::list<ChunkId> lru_;  // front = most recent
  std::unordered_map<ChunkId, Entry> chunks_;
  std::uint64_t bytes_ = 0;
  std::map<std::string, FileMeta> metas_;
};

}  // namespace ecstore
