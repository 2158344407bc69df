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

// Data-to-cluster binding.
//
// CLB places every unique chunk on the cluster with the most free space, so
// a chunk exists once system-wide. ULB pins each user to one active cluster
// and rolls over to a fresh cluster when it fills. Free space is always
// compared against the erasure-expanded size n * ceil(len / k).

#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ecstore/common.hpp"
#include "ecstore/erasure.hpp"

namespace ecstore {

enum class BindingMode : std::uint8_t { clb = 0, ulb = 1 };

std::string_view binding_mode_name(BindingMode mode);
BindingMode parse_binding_mode(std::string_view text);

struct ClusterState {
  ClusterId cluster_id = 0;
  std::vector<Address> members;
  std::uint64_t capacity = 0;
  std::uint64_t used = 0;

  std::uint64_t free() const { return capacity - used; }
};

struct BindingPolicy {
  BindingMode mode = BindingMode::clb;
  /// ULB only; the last entry is the user's active cluster.
  std::map<std::string, std::vector<ClusterId>> user_assignments;
};

/// Greedy: the cluster with the largest free space, lowest id on ties.
/// Throws Errc::capacity_exhausted when no cluster fits the chunk.
ClusterId clb_select(std::uint64_t chunk_size, std::span<const ClusterState> clusters, const CodingParams& params);

/// Creates the user's assignment on first use. Appends a new cluster (the
/// one with room that is active for the fewest users, lowest id on ties)
/// when the active cluster cannot fit the chunk.
ClusterId ulb_select(const std::string& user_id, BindingPolicy& policy, std::span<const ClusterState> clusters,
                     std::uint64_t chunk_size, const CodingParams& params);

/// First 8 bytes of SHA-1(user_id), big-endian, modulo the cluster count.
ClusterId initial_user_assignment(std::string_view user_id, std::span<const ClusterState> clusters);

}  // namespace ecstore
