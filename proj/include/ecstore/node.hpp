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

// Storage node. Every node stores pieces for its cluster position, encodes
// and fans out chunks sent to it as coding node, and holds the metadata
// tables of the users that use it as switching node. Member 0 of the first
// cluster also hosts the placement directory.
//
// All handlers except GetPiece run on the node transport's execution
// context. Operations for one user run one at a time, in arrival order.

#pragma once

#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>

#include "ecstore/directory.hpp"
#include "ecstore/journal.hpp"
#include "ecstore/piece_store.hpp"
#include "ecstore/topology.hpp"
#include "ecstore/transport.hpp"

namespace ecstore {

struct NodeConfig {
  Address address;
  ClusterId cluster_id = 0;
  std::uint8_t position = 0;
  CodingParams params;
  /// Binding mode given to users first seen through this node.
  BindingMode mode = BindingMode::clb;
  /// Per node; a cluster's capacity is n times this.
  std::uint64_t capacity = 64ull << 30;
  /// Empty keeps everything in memory.
  std::filesystem::path store_dir;
  /// Attempts per piece during fan-out.
  int store_attempts = 3;
  double retry_delay_ms = 20;

  /// Resolves cluster and position from the topology and checks them
  /// against anything already set. Keys: listen, topology, position, n, k,
  /// mode, capacity, store_dir.
  static NodeConfig from_config(const KeyValueConfig& cfg, const Topology& topology);
};

class Node final : public MessageHandler {
 public:
  Node(NodeConfig config, Topology topology, Transport& transport);
  ~Node() override;

  void handle(const Address& from, const wire::Message& request, Responder respond) override;
  bool concurrent(const wire::Message& request) const override;

  const NodeConfig& config() const { return config_; }
  const Topology& topology() const { return topology_; }
  PieceStore& pieces() { return pieces_; }
  const PieceStore& pieces() const { return pieces_; }
  const std::map<std::string, ChunkMetaTable>& meta_tables() const { return tables_; }
  /// Non-null on the directory host.
  const Directory* directory() const { return directory_.get(); }

  /// No user or directory operation is queued or running.
  bool idle() const;
  /// Serialized size of this node's metadata tables.
  std::uint64_t meta_index_bytes() const;

 private:
  using Done = std::function<void()>;
  using Op = std::function<void(Done)>;
  struct Queue {
    bool busy = false;
    std::deque<Op> ops;
  };

  void enqueue(Queue& q, Op op);
  void finish(Queue& q);

  void on_store_meta(wire::StoreMeta req, Responder respond, Done done);
  void on_get_meta(const wire::GetMeta& req, Responder respond);
  void on_list_meta(const wire::ListMeta& req, Responder respond);
  void on_delete_file(wire::DeleteFile req, Responder respond, Done done);
  void on_store_chunk(wire::StoreChunk req, Responder respond);
  wire::Status store_piece_local(const CodedPiece& piece, bool* existed);
  void on_dir_op(wire::Message req, Responder respond, Done done);
  void collect_garbage(std::vector<ChunkRef> garbage, Done done);

  /// Sends with retries on transport failure; protocol replies are final.
  void call(const Address& to, wire::Body body, int attempts, ReplyFn on_reply);
  void delete_pieces(const ChunkId& chunk, const ClusterState& cluster, std::vector<std::uint8_t> indices, Done done);

  void load_state();
  void journal_meta(const wire::Message& m);

  NodeConfig config_;
  Topology topology_;
  Transport& transport_;
  PieceStore pieces_;
  Journal meta_journal_;
  Journal dir_journal_;
  std::unique_ptr<Directory> directory_;
  std::map<std::string, ChunkMetaTable> tables_;
  std::map<std::string, Queue> user_queues_;
  Queue dir_queue_;
  std::shared_ptr<bool> alive_;
};

/// Cross-node audit of a quiescent system.
struct ConsistencyReport {
  /// Pieces whose ref is not placed, has no references, or whose index
  /// does not match the node position.
  std::vector<PieceInfo> orphans;
  /// Stored refs lacking one or more of their n pieces.
  std::vector<ChunkRef> incomplete;
  /// Directory counts disagreeing with a recount over every meta table.
  std::vector<ChunkRef> refcount_mismatches;
  /// Per-node used_bytes disagreeing with a storage scan.
  std::vector<Address> used_mismatches;
  /// Cluster accounting disagreeing with the placements.
  std::vector<ClusterId> space_mismatches;

  bool ok() const {
    return orphans.empty() && incomplete.empty() && refcount_mismatches.empty() && used_mismatches.empty() &&
           space_mismatches.empty();
  }
  std::string summary() const;
};

ConsistencyReport check_consistency(const std::vector<const Node*>& nodes);

}  // namespace ecstore
