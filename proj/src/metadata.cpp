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

#include "ecstore/metadata.hpp"

#include <fstream>
#include <set>

namespace ecstore {

namespace {
constexpr std::uint32_t kMetaSnapshotMagic = 0x45434D54;  // "ECMT"
constexpr std::uint8_t kSnapshotVersion = 1;
}  // namespace

FileMeta build_file_meta(std::string user_id, std::string file_name, std::span<const Chunk> chunks,
                         std::span<const ClusterId> placements, std::uint64_t timestamp) {
  if (chunks.size() != placements.size())
    throw Error(Errc::invalid_argument, "placements length " + std::to_string(placements.size()) +
                                            " != chunk count " + std::to_string(chunks.size()));
  FileMeta meta;
  meta.user_id = std::move(user_id);
  meta.file_name = std::move(file_name);
  meta.timestamp = timestamp;
  meta.chunks.reserve(chunks.size());
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    meta.chunks.push_back({chunks[i].id, placements[i]});
    meta.total_len += chunks[i].length();
  }
  return meta;
}

std::vector<ChunkRef> distinct_refs(const FileMeta& meta) {
  std::vector<ChunkRef> out;
  std::set<ChunkRef> seen;
  for (const auto& ref : meta.chunks)
    if (seen.insert(ref).second) out.push_back(ref);
  return out;
}

std::vector<ChunkRef> missing_chunks(const FileMeta& meta, const std::unordered_set<ChunkId>& known) {
  return missing_chunks(meta, [&](const ChunkRef& ref) { return known.contains(ref.chunk_id); });
}

std::vector<ChunkRef> missing_chunks(const FileMeta& meta, const std::function<bool(const ChunkRef&)>& present) {
  std::vector<ChunkRef> out;
  std::unordered_set<ChunkId> seen;
  for (const auto& ref : meta.chunks) {
    if (!seen.insert(ref.chunk_id).second) continue;
    if (!present(ref)) out.push_back(ref);
  }
  return out;
}

const FileMeta& sync_meta(const FileMeta* local, const FileMeta* remote) {
  if (local == nullptr && remote == nullptr) throw Error(Errc::invalid_argument, "sync_meta needs at least one copy");
  if (local == nullptr) return *remote;
  if (remote == nullptr) return *local;
  if (local->user_id != remote->user_id || local->file_name != remote->file_name)
    throw Error(Errc::invalid_argument, "sync_meta across different files");
  return local->timestamp > remote->timestamp ? *local : *remote;
}

const FileMeta* ChunkMetaTable::find(const std::string& file_name) const {
  auto it = files_.find(file_name);
  return it == files_.end() ? nullptr : &it->second;
}

void ChunkMetaTable::put(FileMeta meta) {
  auto name = meta.file_name;
  files_.insert_or_assign(std::move(name), std::move(meta));
}

bool ChunkMetaTable::erase(const std::string& file_name) { return files_.erase(file_name) > 0; }

std::vector<ChunkRef> RefCountTable::apply(const FileMeta& meta, int delta) {
  if (delta != 1 && delta != -1) throw Error(Errc::invalid_argument, "refcount delta must be +1 or -1");
  auto refs = distinct_refs(meta);
  std::vector<ChunkRef> zeroed;
  if (delta > 0) {
    for (const auto& r : refs) ++counts_[r];
    return zeroed;
  }
  for (const auto& r : refs) {
    auto it = counts_.find(r);
    if (it == counts_.end() || it->second == 0)
      throw Error(Errc::corruption, "refcount underflow for chunk " + r.chunk_id.hex());
  }
  for (const auto& r : refs) {
    auto it = counts_.find(r);
    if (--it->second == 0) {
      counts_.erase(it);
      zeroed.push_back(r);
    }
  }
  return zeroed;
}

std::uint64_t RefCountTable::count(const ChunkRef& ref) const {
  auto it = counts_.find(ref);
  return it == counts_.end() ? 0 : it->second;
}

void RefCountTable::set(const ChunkRef& ref, std::uint64_t count) {
  if (count == 0)
    counts_.erase(ref);
  else
    counts_[ref] = count;
}

RefCountTable RefCountTable::recount(const std::vector<const FileMeta*>& metas) {
  RefCountTable t;
  for (const auto* m : metas) t.apply(*m, +1);
  return t;
}

void write_file_meta(ByteWriter& out, const FileMeta& meta) {
  out.str(meta.file_name);
  out.str(meta.user_id);
  out.u64(meta.timestamp);
  out.u64(meta.total_len);
  out.u32(static_cast<std::uint32_t>(meta.chunks.size()));
  for (const auto& ref : meta.chunks) {
    out.id(ref.chunk_id);
    out.u16(ref.cluster_id);
  }
}

FileMeta read_file_meta(ByteReader& in) {
  FileMeta meta;
  meta.file_name = in.str();
  meta.user_id = in.str();
  meta.timestamp = in.u64();
  meta.total_len = in.u64();
  const std::uint32_t count = in.u32();
  if (static_cast<std::uint64_t>(count) * 22 > in.remaining())
    throw Error(Errc::short_body, "file meta claims " + std::to_string(count) + " entries");
  meta.chunks.resize(count);
  for (auto& ref : meta.chunks) {
    ref.chunk_id = in.id();
    ref.cluster_id = in.u16();
  }
  return meta;
}

Bytes encode_file_meta(const FileMeta& meta) {
  Bytes out;
  out.reserve(encoded_size(meta));
  ByteWriter w(out);
  write_file_meta(w, meta);
  return out;
}

FileMeta decode_file_meta(std::span<const std::uint8_t> data) {
  ByteReader r(data);
  auto meta = read_file_meta(r);
  if (r.remaining() != 0) throw Error(Errc::malformed_body, "trailing bytes after file meta");
  return meta;
}

std::size_t encoded_size(const FileMeta& meta) {
  return 2 + meta.file_name.size() + 2 + meta.user_id.size() + 8 + 8 + 4 + meta.chunks.size() * 22;
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> data) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(Errc::io, "cannot open " + tmp.string());
    f.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!f) throw Error(Errc::io, "short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(Errc::io, "rename " + tmp.string() + ": " + ec.message());
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::io, "cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

void save_meta_tables(const std::filesystem::path& path, const std::map<std::string, ChunkMetaTable>& tables) {
  Bytes out;
  ByteWriter w(out);
  w.u32(kMetaSnapshotMagic);
  w.u8(kSnapshotVersion);
  w.u32(static_cast<std::uint32_t>(tables.size()));
  for (const auto& [user, table] : tables) {
    w.str(user);
    w.u32(static_cast<std::uint32_t>(table.files().size()));
    for (const auto& [name, meta] : table.files()) write_file_meta(w, meta);
  }
  write_file_atomic(path, out);
}

std::map<std::string, ChunkMetaTable> load_meta_tables(const std::filesystem::path& path) {
  std::map<std::string, ChunkMetaTable> tables;
  if (!std::filesystem::exists(path)) return tables;
  auto data = read_file(path);
  ByteReader r(data);
  if (r.u32() != kMetaSnapshotMagic || r.u8() != kSnapshotVersion)
    throw Error(Errc::corruption, "bad metadata snapshot header in " + path.string());
  auto users = r.u32();
  for (std::uint32_t u = 0; u < users; ++u) {
    auto user = r.str();
    ChunkMetaTable table(user);
    auto files = r.u32();
    for (std::uint32_t f = 0; f < files; ++f) table.put(read_file_meta(r));
    tables.emplace(user, std::move(table));
  }
  return tables;
}

}  // namespace ecstore
