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

#include "ecstore/local_cache.hpp"

namespace fs = std::filesystem;

namespace ecstore {

LocalCache::LocalCache(std::uint64_t budget, fs::path dir) : budget_(budget), dir_(std::move(dir)) {
  if (dir_.empty()) return;
  fs::create_directories(dir_ / "chunks");
  for (const auto& entry : fs::directory_iterator(dir_ / "chunks")) {
    if (!entry.is_regular_file()) continue;
    ChunkId id;
    try {
      id = ChunkId::from_hex(entry.path().filename().string());
    } catch (const Error&) {
      continue;
    }
    lru_.push_back(id);
    chunks_[id] = Entry{std::prev(lru_.end()), entry.file_size(), {}};
    bytes_ += entry.file_size();
  }
  auto tables = load_meta_tables(dir_ / "metas.bin");
  for (auto& [user, table] : tables)
    for (const auto& [name, meta] : table.files()) metas_[name] = meta;
  std::lock_guard lock(mu_);
  evict_locked();
}

fs::path LocalCache::chunk_path(const ChunkId& id) const { return dir_ / "chunks" / id.hex(); }

void LocalCache::remove_locked(const ChunkId& id) {
  auto it = chunks_.find(id);
  if (it == chunks_.end()) return;
  bytes_ -= it->second.size;
  lru_.erase(it->second.lru);
  chunks_.erase(it);
  if (!dir_.empty()) {
    std::error_code ec;
    fs::remove(chunk_path(id), ec);
  }
}

void LocalCache::evict_locked() {
  while (bytes_ > budget_ && !lru_.empty()) remove_locked(lru_.back());
}

void LocalCache::put_chunk(const ChunkId& id, Bytes payload) {
  if (chunk_id(payload) != id) throw Error(Errc::integrity, "cached payload does not hash to " + id.hex());
  if (payload.size() > budget_) return;
  std::lock_guard lock(mu_);
  if (auto it = chunks_.find(id); it != chunks_.end()) {
    lru_.splice(lru_.begin(), lru_, it->second.lru);
    return;
  }
  const std::uint64_t size = payload.size();
  if (!dir_.empty()) {
    write_file_atomic(chunk_path(id), payload);
    payload.clear();
  }
  lru_.push_front(id);
  chunks_[id] = Entry{lru_.begin(), size, std::move(payload)};
  bytes_ += size;
  evict_locked();
}

std::optional<Bytes> LocalCache::get_chunk(const ChunkId& id) {
  std::lock_guard lock(mu_);
  auto it = chunks_.find(id);
  if (it == chunks_.end()) return std::nullopt;
  lru_.splice(lru_.begin(), lru_, it->second.lru);
  if (dir_.empty()) return it->second.payload;
  Bytes data;
  try {
    data = read_file(chunk_path(id));
  } catch (const Error&) {
    remove_locked(id);
    return std::nullopt;
  }
  if (chunk_id(data) != id) {
    remove_locked(id);
    return std::nullopt;
  }
  return data;
}

bool LocalCache::has_chunk(const ChunkId& id) const {
  std::lock_guard lock(mu_);
  return chunks_.contains(id);
}

void LocalCache::clear_chunks() {
  std::lock_guard lock(mu_);
  while (!lru_.empty()) remove_locked(lru_.back());
}

std::uint64_t LocalCache::chunk_bytes() const {
  std::lock_guard lock(mu_);
  return bytes_;
}

std::size_t LocalCache::chunk_count() const {
  std::lock_guard lock(mu_);
  return chunks_.size();
}

void LocalCache::save_metas_locked() const {
  if (dir_.empty()) return;
  std::map<std::string, ChunkMetaTable> tables;
  for (const auto& [name, meta] : metas_) tables.try_emplace(meta.user_id, meta.user_id).first->second.put(meta);
  save_meta_tables(dir_ / "metas.bin", tables);
}

void LocalCache::put_meta(const FileMeta& meta) {
  std::lock_guard lock(mu_);
  metas_[meta.file_name] = meta;
  save_metas_locked();
}

std::optional<FileMeta> LocalCache::find_meta(const std::string& file_name) const {
  std::lock_guard lock(mu_);
  auto it = metas_.find(file_name);
  if (it == metas_.end()) return std::nullopt;
  return it->second;
}

bool LocalCache::erase_meta(const std::string& file_name) {
  std::lock_guard lock(mu_);
  const bool erased = metas_.erase(file_name) > 0;
  if (erased) save_metas_locked();
  return erased;
}

std::vector<FileMeta> LocalCache::metas() const {
  std::lock_guard lock(mu_);
  std::vector<FileMeta> out;
  out.reserve(metas_.size());
  for (const auto& [name, meta] : metas_) out.push_back(meta);
  return out;
}

}  // namespace ecstore
