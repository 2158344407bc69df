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

#include "ecstore/wire.hpp"

#include "ecstore/byte_io.hpp"

namespace ecstore::wire {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void write_status(ByteWriter& w, const Status& s) {
  w.u8(static_cast<std::uint8_t>(s.code));
  w.str(s.detail);
}

Status read_status(ByteReader& r) {
  Status s;
  s.code = static_cast<Errc>(r.u8());
  s.detail = r.str();
  return s;
}

void write_refs(ByteWriter& w, const std::vector<ChunkRef>& refs) {
  w.u32(static_cast<std::uint32_t>(refs.size()));
  for (const auto& ref : refs) {
    w.id(ref.chunk_id);
    w.u16(ref.cluster_id);
  }
}

std::vector<ChunkRef> read_refs(ByteReader& r) {
  auto count = r.u32();
  if (static_cast<std::uint64_t>(count) * 22 > r.remaining())
    throw WireError(Errc::short_body, "ref list claims " + std::to_string(count) + " entries");
  std::vector<ChunkRef> refs(count);
  for (auto& ref : refs) {
    ref.chunk_id = r.id();
    ref.cluster_id = r.u16();
  }
  return refs;
}

void write_lengths(ByteWriter& w, const std::vector<std::uint32_t>& lengths) {
  w.u32(static_cast<std::uint32_t>(lengths.size()));
  for (auto v : lengths) w.u32(v);
}

std::vector<std::uint32_t> read_lengths(ByteReader& r) {
  auto count = r.u32();
  if (static_cast<std::uint64_t>(count) * 4 > r.remaining())
    throw WireError(Errc::short_body, "length list claims " + std::to_string(count) + " entries");
  std::vector<std::uint32_t> out(count);
  for (auto& v : out) v = r.u32();
  return out;
}

void write_piece(ByteWriter& w, const CodedPiece& p) {
  w.id(p.chunk_id);
  w.u8(p.index);
  w.u8(p.params.n);
  w.u8(p.params.k);
  w.u64(p.original_len);
  w.blob(p.payload);
}

CodedPiece read_piece(ByteReader& r) {
  CodedPiece p;
  p.chunk_id = r.id();
  p.index = r.u8();
  p.params.n = r.u8();
  p.params.k = r.u8();
  p.original_len = r.u64();
  p.payload = r.blob();
  return p;
}

template <typename T>
void write_optional_meta(ByteWriter& w, const std::optional<T>& meta) {
  w.u8(meta.has_value() ? 1 : 0);
  if (meta) write_file_meta(w, *meta);
}

std::optional<FileMeta> read_optional_meta(ByteReader& r) {
  auto flag = r.u8();
  if (flag > 1) throw WireError(Errc::malformed_body, "presence flag must be 0 or 1");
  if (flag == 0) return std::nullopt;
  return read_file_meta(r);
}

void write_body(ByteWriter& w, const Body& body) {
  std::visit(overloaded{
                 [&](const StoreMeta& m) {
                   w.str(m.user);
                   write_file_meta(w, m.meta);
                   write_lengths(w, m.chunk_lengths);
                 },
                 [&](const MissingList& m) { write_refs(w, m.refs); },
                 [&](const GetMeta& m) {
                   w.str(m.user);
                   w.str(m.file_name);
                 },
                 [&](const MetaReply& m) { write_optional_meta(w, m.meta); },
                 [&](const StoreChunk& m) {
                   w.id(m.chunk_id);
                   w.u16(m.cluster_id);
                   w.blob(m.payload);
                 },
                 [&](const StoreAck& m) { write_status(w, m.status); },
                 [&](const StorePiece& m) { write_piece(w, m.piece); },
                 [&](const PieceAck& m) { write_status(w, m.status); },
                 [&](const GetPiece& m) {
                   w.id(m.chunk_id);
                   w.u8(m.index);
                 },
                 [&](const PieceReply& m) {
                   w.u8(m.piece.has_value() ? 1 : 0);
                   if (m.piece) write_piece(w, *m.piece);
                 },
                 [&](const DeleteFile& m) {
                   w.str(m.user);
                   w.str(m.file_name);
                 },
                 [&](const DeleteAck& m) { write_status(w, m.status); },
                 [&](const DeletePiece& m) {
                   w.id(m.chunk_id);
                   w.u8(m.index);
                 },
                 [&](const Cancel& m) { w.u64(m.target); },
                 [&](const ListMeta& m) { w.str(m.user); },
                 [&](const MetaList& m) {
                   w.u32(static_cast<std::uint32_t>(m.metas.size()));
                   for (const auto& meta : m.metas) write_file_meta(w, meta);
                 },
                 [&](const DirCommit& m) {
                   w.str(m.user);
                   w.u8(static_cast<std::uint8_t>(m.mode));
                   write_optional_meta(w, m.old_meta);
                   write_file_meta(w, m.new_meta);
                   write_lengths(w, m.chunk_lengths);
                 },
                 [&](const DirCommitReply& m) {
                   write_file_meta(w, m.placed);
                   write_refs(w, m.missing);
                   write_refs(w, m.garbage);
                 },
                 [&](const DirRelease& m) { write_file_meta(w, m.meta); },
                 [&](const DirReleaseReply& m) { write_refs(w, m.garbage); },
                 [&](const ChunkStored& m) {
                   w.id(m.ref.chunk_id);
                   w.u16(m.ref.cluster_id);
                   w.u32(m.length);
                 },
                 [&](const ChunkStoredAck& m) { write_status(w, m.status); },
                 [&](const ErrorReply& m) { write_status(w, m.status); },
             },
             body);
}

Body read_body(MsgType type, ByteReader& r) {
  switch (type) {
    case MsgType::store_meta: {
      StoreMeta m;
      m.user = r.str();
      m.meta = read_file_meta(r);
      m.chunk_lengths = read_lengths(r);
      return m;
    }
    case MsgType::missing_list: return MissingList{read_refs(r)};
    case MsgType::get_meta: {
      GetMeta m;
      m.user = r.str();
      m.file_name = r.str();
      return m;
    }
    case MsgType::meta_reply: return MetaReply{read_optional_meta(r)};
    case MsgType::store_chunk: {
      StoreChunk m;
      m.chunk_id = r.id();
      m.cluster_id = r.u16();
      m.payload = r.blob();
      return m;
    }
    case MsgType::store_ack: return StoreAck{read_status(r)};
    case MsgType::store_piece: return StorePiece{read_piece(r)};
    case MsgType::piece_ack: return PieceAck{read_status(r)};
    case MsgType::get_piece: {
      GetPiece m;
      m.chunk_id = r.id();
      m.index = r.u8();
      return m;
    }
    case MsgType::piece_reply: {
      PieceReply m;
      auto flag = r.u8();
      if (flag > 1) throw WireError(Errc::malformed_body, "presence flag must be 0 or 1");
      if (flag == 1) m.piece = read_piece(r);
      return m;
    }
    case MsgType::delete_file: {
      DeleteFile m;
      m.user = r.str();
      m.file_name = r.str();
      return m;
    }
    case MsgType::delete_ack: return DeleteAck{read_status(r)};
    case MsgType::delete_piece: {
      DeletePiece m;
      m.chunk_id = r.id();
      m.index = r.u8();
      return m;
    }
    case MsgType::cancel: return Cancel{r.u64()};
    case MsgType::list_meta: return ListMeta{r.str()};
    case MsgType::meta_list: {
      MetaList m;
      auto count = r.u32();
      if (static_cast<std::uint64_t>(count) * 24 > r.remaining())
        throw WireError(Errc::short_body, "meta list claims " + std::to_string(count) + " entries");
      m.metas.reserve(count);
      for (std::uint32_t i = 0; i < count; ++i) m.metas.push_back(read_file_meta(r));
      return m;
    }
    case MsgType::dir_commit: {
      DirCommit m;
      m.user = r.str();
      auto mode = r.u8();
      if (mode > 1) throw WireError(Errc::malformed_body, "binding mode must be 0 or 1");
      m.mode = static_cast<BindingMode>(mode);
      m.old_meta = read_optional_meta(r);
      m.new_meta = read_file_meta(r);
      m.chunk_lengths = read_lengths(r);
      return m;
    }
    case MsgType::dir_commit_reply: {
      DirCommitReply m;
      m.placed = read_file_meta(r);
      m.missing = read_refs(r);
      m.garbage = read_refs(r);
      return m;
    }
    case MsgType::dir_release: return DirRelease{read_file_meta(r)};
    case MsgType::dir_release_reply: return DirReleaseReply{read_refs(r)};
    case MsgType::chunk_stored: {
      ChunkStored m;
      m.ref.chunk_id = r.id();
      m.ref.cluster_id = r.u16();
      m.length = r.u32();
      return m;
    }
    case MsgType::chunk_stored_ack: return ChunkStoredAck{read_status(r)};
    case MsgType::error_reply: return ErrorReply{read_status(r)};
  }
  throw WireError(Errc::unknown_type, "unknown message type", static_cast<std::uint8_t>(type));
}

}  // namespace

std::string_view type_name(MsgType type) {
  switch (type) {
    case MsgType::store_meta: return "StoreMeta";
    case MsgType::missing_list: return "MissingList";
    case MsgType::get_meta: return "GetMeta";
    case MsgType::meta_reply: return "MetaReply";
    case MsgType::store_chunk: return "StoreChunk";
    case MsgType::store_ack: return "StoreAck";
    case MsgType::store_piece: return "StorePiece";
    case MsgType::piece_ack: return "PieceAck";
    case MsgType::get_piece: return "GetPiece";
    case MsgType::piece_reply: return "PieceReply";
    case MsgType::delete_file: return "DeleteFile";
    case MsgType::delete_ack: return "DeleteAck";
    case MsgType::delete_piece: return "DeletePiece";
    case MsgType::cancel: return "Cancel";
    case MsgType::list_meta: return "ListMeta";
    case MsgType::meta_list: return "MetaList";
    case MsgType::dir_commit: return "DirCommit";
    case MsgType::dir_commit_reply: return "DirCommitReply";
    case MsgType::dir_release: return "DirRelease";
    case MsgType::dir_release_reply: return "DirReleaseReply";
    case MsgType::chunk_stored: return "ChunkStored";
    case MsgType::chunk_stored_ack: return "ChunkStoredAck";
    case MsgType::error_reply: return "ErrorReply";
  }
  return "Unknown";
}

void append_message(Bytes& out, const Message& m) {
  const std::size_t start = out.size();
  ByteWriter w(out);
  w.u32(0);  // patched below
  w.u8(static_cast<std::uint8_t>(m.type()));
  w.u64(m.request_id);
  write_body(w, m.body);
  const std::uint64_t total = out.size() - start;
  if (total - kHeaderSize > kMaxBody) {
    out.resize(start);
    throw Error(Errc::invalid_argument, "message body exceeds 2^32-13 bytes");
  }
  for (int i = 0; i < 4; ++i) out[start + i] = static_cast<std::uint8_t>(total >> (24 - 8 * i));
}

Bytes encode_message(const Message& m) {
  Bytes out;
  append_message(out, m);
  return out;
}

std::optional<std::uint32_t> peek_frame_length(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) return std::nullopt;
  return static_cast<std::uint32_t>(bytes[0]) << 24 | static_cast<std::uint32_t>(bytes[1]) << 16 |
         static_cast<std::uint32_t>(bytes[2]) << 8 | bytes[3];
}

std::optional<Decoded> decode_message(std::span<const std::uint8_t> bytes) {
  auto total = peek_frame_length(bytes);
  if (!total) return std::nullopt;
  if (*total < kHeaderSize) throw WireError(Errc::bad_length, "frame length " + std::to_string(*total) + " < header");
  if (*total > kMaxFrame) throw WireError(Errc::bad_length, "frame length " + std::to_string(*total) + " over limit");
  if (bytes.size() < kHeaderSize) return std::nullopt;
  const std::uint8_t code = bytes[4];
  if (code == 0 || code > kMessageTypeCount)
    throw WireError(Errc::unknown_type, "unknown message type " + std::to_string(code), code);
  if (bytes.size() < *total) return std::nullopt;

  ByteReader header(bytes.subspan(5, 8));
  Decoded out;
  out.message.request_id = header.u64();
  ByteReader body(bytes.subspan(kHeaderSize, *total - kHeaderSize));
  try {
    out.message.body = read_body(static_cast<MsgType>(code), body);
  } catch (const WireError&) {
    throw;
  } catch (const Error& e) {
    throw WireError(e.code() == Errc::short_body ? Errc::short_body : Errc::malformed_body,
                    std::string(type_name(static_cast<MsgType>(code))) + ": " + e.what(), code);
  }
  if (body.remaining() != 0)
    throw WireError(Errc::malformed_body,
                    std::string(type_name(static_cast<MsgType>(code))) + ": " + std::to_string(body.remaining()) +
                        " trailing bytes",
                    code);
  out.consumed = *total;
  return out;
}

}  // namespace ecstore::wire
