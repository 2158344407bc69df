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

#include "ecstore/binding.hpp"

#include <algorithm>

#include "ecstore/chunking.hpp"

namespace ecstore {

std::string_view binding_mode_name(BindingMode mode) { return mode == BindingMode::clb ? "clb" : "ulb"; }

BindingMode parse_binding_mode(std::string_view text) {
  if (text == "clb" || text == "CLB") return BindingMode::clb;
  if (text == "ulb" || text == "ULB") return BindingMode::ulb;
  throw Error(Errc::config, "unknown binding mode '" + std::string(text) + "'");
}

ClusterId clb_select(std::uint64_t chunk_size, std::span<const ClusterState> clusters, const CodingParams& params) {
  const std::uint64_t need = expansion(chunk_size, params);
  const ClusterState* best = nullptr;
  for (const auto& c : clusters) {
    if (c.free() < need) continue;
    if (best == nullptr || c.free() > best->free() || (c.free() == best->free() && c.cluster_id < best->cluster_id))
      best = &c;
  }
  if (best == nullptr)
    throw Error(Errc::capacity_exhausted, "no cluster has " + std::to_string(need) + " free bytes");
  return best->cluster_id;
}

ClusterId initial_user_assignment(std::string_view user_id, std::span<const ClusterState> clusters) {
  if (clusters.empty()) throw Error(Errc::invalid_argument, "no clusters");
  auto digest = chunk_id({reinterpret_cast<const std::uint8_t*>(user_id.data()), user_id.size()});
  std::uint64_t prefix = 0;
  for (int i = 0; i < 8; ++i) prefix = (prefix << 8) | digest.digest[i];
  return clusters[prefix % clusters.size()].cluster_id;
}

ClusterId ulb_select(const std::string& user_id, BindingPolicy& policy, std::span<const ClusterState> clusters,
                     std::uint64_t chunk_size, const CodingParams& params) {
  const std::uint64_t need = expansion(chunk_size, params);
  auto by_id = [&](ClusterId id) -> const ClusterState& {
    auto it = std::find_if(clusters.begin(), clusters.end(), [&](const ClusterState& c) { return c.cluster_id == id; });
    if (it == clusters.end()) throw Error(Errc::invalid_argument, "unknown cluster " + std::to_string(id));
    return *it;
  };

  auto& assigned = policy.user_assignments[user_id];
  if (assigned.empty()) assigned.push_back(initial_user_assignment(user_id, clusters));
  if (by_id(assigned.back()).free() >= need) return assigned.back();

  std::map<ClusterId, std::size_t> active_users;
  for (const auto& [user, list] : policy.user_assignments)
    if (!list.empty()) ++active_users[list.back()];

  const ClusterState* best = nullptr;
  std::size_t best_users = 0;
  for (const auto& c : clusters) {
    if (c.free() < need) continue;
    const std::size_t users = active_users[c.cluster_id];
    if (best == nullptr || users < best_users || (users == best_users && c.cluster_id < best->cluster_id)) {
      best = &c;
      best_users = users;
    }
  }
  if (best == nullptr)
    throw Error(Errc::capacity_exhausted, "every cluster is full for user " + user_id);
  assigned.push_back(best->cluster_id);
  return best->cluster_id;
}

}  // namespace ecstore
