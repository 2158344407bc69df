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

#include "ecstore/piece_store.hpp"

#include <charconv>
#include <fstream>
#include <mutex>

#include "ecstore/byte_io.hpp"
#include "ecstore/metadata.hpp"

namespace fs = std::filesystem;

namespace ecstore {

std::string PieceStore::file_name(const PieceKey& key) { return key.chunk_id.hex() + "." + std::to_string(key.index); }

std::optional<PieceKey> PieceStore::parse_file_name(const std::string& name) {
  if (name.size() < 42 || name[40] != '.') return std::nullopt;
  PieceKey key;
  try {
    key.chunk_id = ChunkId::from_hex(std::string_view(name).substr(0, 40));
  } catch (const Error&) {
    return std::nullopt;
  }
  unsigned index = 0;
  const char* first = name.data() + 41;
  const char* last = name.data() + name.size();
  auto [p, ec] = std::from_chars(first, last, index);
  if (ec != std::errc() || p != last || index > 255) return std::nullopt;
  key.index = static_cast<std::uint8_t>(index);
  return key;
}

PieceStore::PieceStore(fs::path dir) : dir_(std::move(dir)) {
  if (dir_.empty()) return;
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw Error(Errc::io, "cannot create " + dir_.string() + ": " + ec.message());
  for (const auto& entry : fs::directory_iterator(dir_)) {
    if (!entry.is_regular_file()) continue;
    const auto name = entry.path().filename().string();
    if (name.ends_with(".tmp")) {
      fs::remove(entry.path(), ec);  // interrupted write
      continue;
    }
    auto key = parse_file_name(name);
    if (!key) continue;
    const auto size = entry.file_size();
    if (size < kPieceHeaderSize) continue;
    index_[*key] = size - kPieceHeaderSize;
    used_ += size - kPieceHeaderSize;
  }
}

CodedPiece PieceStore::read_piece(const PieceKey& key) const {
  auto data = read_file(path_of(key));
  if (data.size() < kPieceHeaderSize) throw Error(Errc::corruption, "truncated piece " + file_name(key));
  ByteReader r(data);
  CodedPiece piece;
  piece.chunk_id = key.chunk_id;
  piece.index = key.index;
  piece.original_len = r.u64();
  piece.params.n = r.u8();
  piece.params.k = r.u8();
  piece.payload.assign(data.begin() + kPieceHeaderSize, data.end());
  return piece;
}

bool PieceStore::put(const CodedPiece& piece) {
  const PieceKey key{piece.chunk_id, piece.index};
  if (persistent()) {
    Bytes data;
    data.reserve(kPieceHeaderSize + piece.payload.size());
    ByteWriter w(data);
    w.u64(piece.original_len);
    w.u8(piece.params.n);
    w.u8(piece.params.k);
    w.raw(piece.payload);
    // Written outside the lock; rename is atomic with respect to readers.
    write_file_atomic(path_of(key), data);
  }
  std::unique_lock lock(mu_);
  auto [it, inserted] = index_.try_emplace(key, 0);
  if (!inserted) used_ -= it->second;
  it->second = piece.payload.size();
  used_ += piece.payload.size();
  if (!persistent()) memory_[key] = piece;
  return !inserted;
}

std::optional<CodedPiece> PieceStore::get(const ChunkId& chunk_id, std::uint8_t index) const {
  const PieceKey key{chunk_id, index};
  std::shared_lock lock(mu_);
  if (!persistent()) {
    auto it = memory_.find(key);
    if (it == memory_.end()) return std::nullopt;
    return it->second;
  }
  if (!index_.contains(key)) return std::nullopt;
  try {
    return read_piece(key);
  } catch (const Error& e) {
    // Deleted between the index check and the read.
    if (e.code() == Errc::io) return std::nullopt;
    throw;
  }
}

bool PieceStore::contains(const ChunkId& chunk_id, std::uint8_t index) const {
  std::shared_lock lock(mu_);
  return index_.contains(PieceKey{chunk_id, index});
}

bool PieceStore::erase(const ChunkId& chunk_id, std::uint8_t index) {
  const PieceKey key{chunk_id, index};
  std::unique_lock lock(mu_);
  auto it = index_.find(key);
  if (it == index_.end()) return false;
  used_ -= it->second;
  index_.erase(it);
  memory_.erase(key);
  if (persistent()) {
    std::error_code ec;
    fs::remove(path_of(key), ec);
    if (ec) throw Error(Errc::io, "cannot remove " + path_of(key).string() + ": " + ec.message());
  }
  return true;
}

std::uint64_t PieceStore::used_bytes() const {
  std::shared_lock lock(mu_);
  return used_;
}

std::size_t PieceStore::piece_count() const {
  std::shared_lock lock(mu_);
  return index_.size();
}

std::vector<PieceInfo> PieceStore::list() const {
  std::shared_lock lock(mu_);
  std::vector<PieceInfo> out;
  out.reserve(index_.size());
  for (const auto& [key, len] : index_) out.push_back({key, len});
  return out;
}

std::uint64_t PieceStore::scan_used_bytes() const {
  std::shared_lock lock(mu_);
  std::uint64_t total = 0;
  if (!persistent()) {
    for (const auto& [key, piece] : memory_) total += piece.payload.size();
    return total;
  }
  for (const auto& entry : fs::directory_iterator(dir_)) {
    if (!entry.is_regular_file() || !parse_file_name(entry.path().filename().string())) continue;
    total += entry.file_size() - kPieceHeaderSize;
  }
  return total;
}

}  // namespace ecstore
