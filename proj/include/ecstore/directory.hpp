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

// Placement directory: cluster free space, binding decisions, reference
// counts and the chunk presence index, owned by a single node.
//
// A chunk ref (chunk id, cluster id) is "placed" once some file needs it on
// that cluster and "stored" once its coding node reports all n pieces
// written. Placement charges the cluster n * ceil(len / k) bytes. Every
// operation is deterministic, so replaying the same operations rebuilds
// the same state.

#pragma once

#include <map>
#include <optional>
#include <set>
#include <unordered_map>

#include "ecstore/binding.hpp"
#include "ecstore/metadata.hpp"
#include "ecstore/wire.hpp"

namespace ecstore {

class Directory {
 public:
  struct Placement {
    std::uint32_t length = 0;  // 0 until known
    bool stored = false;
  };

  Directory(CodingParams params, std::vector<ClusterState> clusters);

  /// Places the unplaced entries of new_meta, moves reference counts from
  /// old_meta to new_meta and reports refs still awaiting upload. All or
  /// nothing: on error the directory is unchanged.
  wire::DirCommitReply commit(const wire::DirCommit& request);

  /// Drops one reference from each distinct ref of meta.
  wire::DirReleaseReply release(const wire::DirRelease& request);

  /// Marks a ref stored. Errc::stale when the ref is no longer placed.
  wire::Status chunk_stored(const wire::ChunkStored& request);

  const CodingParams& params() const { return params_; }
  const std::vector<ClusterState>& clusters() const { return clusters_; }
  const RefCountTable& refcounts() const { return refs_; }
  const BindingPolicy& policy() const { return policy_; }
  const std::map<ChunkRef, Placement>& placements() const { return placements_; }
  std::optional<BindingMode> user_mode(const std::string& user) const;

  /// Clusters holding a placement of chunk, ascending.
  std::vector<ClusterId> locations(const ChunkId& chunk) const;

  /// Serialized size of the presence index: 22 bytes per stored ref.
  std::uint64_t presence_index_bytes() const;

 private:
  ClusterState& cluster(ClusterId id);
  void charge(ClusterId id, std::uint64_t bytes);
  void uncharge(ClusterId id, std::uint64_t bytes);
  void drop(const ChunkRef& ref);

  CodingParams params_;
  std::vector<ClusterState> clusters_;
  BindingPolicy policy_;
  std::map<std::string, BindingMode> user_modes_;
  RefCountTable refs_;
  std::map<ChunkRef, Placement> placements_;
  std::unordered_map<ChunkId, std::set<ClusterId>> where_;
};

}  // namespace ecstore
