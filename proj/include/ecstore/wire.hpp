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

// Binary message protocol.
//
// Frame: u32 total length (header included) | u8 msg_type | u64 request_id
// | body. All integers are big-endian. Strings are u16-length-prefixed,
// payloads u32-length-prefixed. A connection opens with a single protocol
// version byte in each direction.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "ecstore/binding.hpp"
#include "ecstore/common.hpp"
#include "ecstore/erasure.hpp"
#include "ecstore/metadata.hpp"

namespace ecstore::wire {

inline constexpr std::uint8_t kProtocolVersion = 1;
inline constexpr std::size_t kHeaderSize = 13;
inline constexpr std::uint64_t kMaxBody = 0xFFFFFFFFull - kHeaderSize;
/// Frames larger than this are rejected on decode before any allocation.
inline constexpr std::uint32_t kMaxFrame = 64u << 20;

enum class MsgType : std::uint8_t {
  store_meta = 1,
  missing_list = 2,
  get_meta = 3,
  meta_reply = 4,
  store_chunk = 5,
  store_ack = 6,
  store_piece = 7,
  piece_ack = 8,
  get_piece = 9,
  piece_reply = 10,
  delete_file = 11,
  delete_ack = 12,
  delete_piece = 13,
  cancel = 14,
  list_meta = 15,
  meta_list = 16,
  dir_commit = 17,
  dir_commit_reply = 18,
  dir_release = 19,
  dir_release_reply = 20,
  chunk_stored = 21,
  chunk_stored_ack = 22,
  error_reply = 23,
};

/// Status carried by every acknowledgement.
struct Status {
  Errc code = Errc::ok;
  std::string detail;

  bool ok() const { return code == Errc::ok; }
  bool operator==(const Status&) const = default;
};

/// chunk_lengths is positional with meta.chunks, or empty when unknown.
struct StoreMeta {
  std::string user;
  FileMeta meta;
  std::vector<std::uint32_t> chunk_lengths;
  bool operator==(const StoreMeta&) const = default;
};
struct MissingList {
  std::vector<ChunkRef> refs;
  bool operator==(const MissingList&) const = default;
};
struct GetMeta {
  std::string user;
  std::string file_name;
  bool operator==(const GetMeta&) const = default;
};
struct MetaReply {
  std::optional<FileMeta> meta;
  bool operator==(const MetaReply&) const = default;
};
struct StoreChunk {
  ChunkId chunk_id;
  ClusterId cluster_id = 0;
  Bytes payload;
  bool operator==(const StoreChunk&) const = default;
};
struct StoreAck {
  Status status;
  bool operator==(const StoreAck&) const = default;
};
struct StorePiece {
  CodedPiece piece;
  bool operator==(const StorePiece&) const = default;
};
struct PieceAck {
  Status status;
  bool operator==(const PieceAck&) const = default;
};
struct GetPiece {
  ChunkId chunk_id;
  std::uint8_t index = 0;
  bool operator==(const GetPiece&) const = default;
};
struct PieceReply {
  std::optional<CodedPiece> piece;
  bool operator==(const PieceReply&) const = default;
};
struct DeleteFile {
  std::string user;
  std::string file_name;
  bool operator==(const DeleteFile&) const = default;
};
struct DeleteAck {
  Status status;
  bool operator==(const DeleteAck&) const = default;
};
struct DeletePiece {
  ChunkId chunk_id;
  std::uint8_t index = 0;
  bool operator==(const DeletePiece&) const = default;
};
struct Cancel {
  std::uint64_t target = 0;
  bool operator==(const Cancel&) const = default;
};
struct ListMeta {
  std::string user;
  bool operator==(const ListMeta&) const = default;
};
struct MetaList {
  std::vector<FileMeta> metas;
  bool operator==(const MetaList&) const = default;
};
/// Switching node -> placement directory: atomically place the new file's
/// chunks and move reference counts from old_meta (if any) to new_meta.
struct DirCommit {
  std::string user;
  BindingMode mode = BindingMode::clb;
  std::optional<FileMeta> old_meta;
  FileMeta new_meta;
  std::vector<std::uint32_t> chunk_lengths;
  bool operator==(const DirCommit&) const = default;
};
struct DirCommitReply {
  FileMeta placed;
  std::vector<ChunkRef> missing;
  std::vector<ChunkRef> garbage;
  bool operator==(const DirCommitReply&) const = default;
};
struct DirRelease {
  FileMeta meta;
  bool operator==(const DirRelease&) const = default;
};
struct DirReleaseReply {
  std::vector<ChunkRef> garbage;
  bool operator==(const DirReleaseReply&) const = default;
};
/// Coding node -> directory once all n pieces are acknowledged.
struct ChunkStored {
  ChunkRef ref;
  std::uint32_t length = 0;
  bool operator==(const ChunkStored&) const = default;
};
struct ChunkStoredAck {
  Status status;
  bool operator==(const ChunkStoredAck&) const = default;
};
struct ErrorReply {
  Status status;
  bool operator==(const ErrorReply&) const = default;
};

// Variant order must follow MsgType numbering (index + 1 == type code).
using Body = std::variant<StoreMeta, MissingList, GetMeta, MetaReply, StoreChunk, StoreAck, StorePiece, PieceAck,
                          GetPiece, PieceReply, DeleteFile, DeleteAck, DeletePiece, Cancel, ListMeta, MetaList,
                          DirCommit, DirCommitReply, DirRelease, DirReleaseReply, ChunkStored, ChunkStoredAck,
                          ErrorReply>;

inline constexpr std::size_t kMessageTypeCount = std::variant_size_v<Body>;

struct Message {
  std::uint64_t request_id = 0;
  Body body;

  MsgType type() const { return static_cast<MsgType>(body.index() + 1); }
  bool operator==(const Message&) const = default;
};

std::string_view type_name(MsgType type);

/// Decode failure carrying the offending type code where relevant.
class WireError : public Error {
 public:
  WireError(Errc code, const std::string& what, std::uint8_t msg_type = 0)
      : Error(code, what), msg_type_(msg_type) {}
  std::uint8_t msg_type() const { return msg_type_; }

 private:
  std::uint8_t msg_type_;
};

Bytes encode_message(const Message& m);
void append_message(Bytes& out, const Message& m);

struct Decoded {
  Message message;
  std::size_t consumed = 0;
};

/// nullopt when more bytes are needed (nothing consumed). Malformed frames
/// throw WireError (bad-length, unknown-type, short-body, malformed-body).
std::optional<Decoded> decode_message(std::span<const std::uint8_t> bytes);

/// Frame length announced by a header, or nullopt with fewer than 4 bytes.
std::optional<std::uint32_t> peek_frame_length(std::span<const std::uint8_t> bytes);

/// Convenience for handlers and tests.
template <typename T>
Message make(std::uint64_t request_id, T body) {
  return Message{request_id, Body{std::move(body)}};
}

}  // namespace ecstore::wire
