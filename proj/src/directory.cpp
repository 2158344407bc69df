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

#include "ecstore/directory.hpp"

#include <algorithm>

namespace ecstore {

Directory::Directory(CodingParams params, std::vector<ClusterState> clusters)
    : params_(params), clusters_(std::move(clusters)) {
  params_.validate();
  if (clusters_.empty()) throw Error(Errc::config, "directory needs at least one cluster");
  std::sort(clusters_.begin(), clusters_.end(),
            [](const ClusterState& a, const ClusterState& b) { return a.cluster_id < b.cluster_id; });
}

ClusterState& Directory::cluster(ClusterId id) {
  for (auto& c : clusters_)
    if (c.cluster_id == id) return c;
  throw Error(Errc::invalid_argument, "unknown cluster " + std::to_string(id));
}

void Directory::charge(ClusterId id, std::uint64_t bytes) {
  auto& c = cluster(id);
  if (bytes > c.free()) throw Error(Errc::capacity_exhausted, "cluster " + std::to_string(id) + " is full");
  c.used += bytes;
}

void Directory::uncharge(ClusterId id, std::uint64_t bytes) {
  auto& c = cluster(id);
  if (bytes > c.used) throw Error(Errc::corruption, "cluster " + std::to_string(id) + " accounting underflow");
  c.used -= bytes;
}

void Directory::drop(const ChunkRef& ref) {
  auto it = placements_.find(ref);
  if (it == placements_.end()) return;
  uncharge(ref.cluster_id, expansion(it->second.length, params_));
  placements_.erase(it);
  auto w = where_.find(ref.chunk_id);
  if (w != where_.end()) {
    w->second.erase(ref.cluster_id);
    if (w->second.empty()) where_.erase(w);
  }
}

std::optional<BindingMode> Directory::user_mode(const std::string& user) const {
  auto it = user_modes_.find(user);
  if (it == user_modes_.end()) return std::nullopt;
  return it->second;
}

std::vector<ClusterId> Directory::locations(const ChunkId& chunk) const {
  auto it = where_.find(chunk);
  if (it == where_.end()) return {};
  return {it->second.begin(), it->second.end()};
}

std::uint64_t Directory::presence_index_bytes() const {
  std::uint64_t stored = 0;
  for (const auto& [ref, p] : placements_) stored += p.stored ? 1 : 0;
  return stored * 22;
}

wire::DirCommitReply Directory::commit(const wire::DirCommit& req) {
  const FileMeta& meta = req.new_meta;
  if (!req.chunk_lengths.empty() && req.chunk_lengths.size() != meta.chunks.size())
    throw Error(Errc::protocol, "chunk_lengths does not match the chunk list");
  if (req.old_meta && req.old_meta->file_name != meta.file_name)
    throw Error(Errc::protocol, "old and new meta name different files");

  // Undo log so a failure leaves no trace.
  const auto clusters_before = clusters_;
  const auto policy_before = policy_;
  const auto modes_before = user_modes_;
  std::vector<ChunkRef> created;
  auto undo = [&] {
    for (const auto& ref : created) {
      placements_.erase(ref);
      auto w = where_.find(ref.chunk_id);
      if (w != where_.end()) {
        w->second.erase(ref.cluster_id);
        if (w->second.empty()) where_.erase(w);
      }
    }
    clusters_ = clusters_before;
    policy_ = policy_before;
    user_modes_ = modes_before;
  };

  wire::DirCommitReply reply;
  reply.placed = meta;
  try {
    const BindingMode mode = user_modes_.emplace(req.user, req.mode).first->second;
    auto place = [&](const ChunkRef& ref, std::uint32_t length) {
      auto [it, inserted] = placements_.try_emplace(ref, Placement{length, false});
      if (!inserted) return;
      created.push_back(ref);
      where_[ref.chunk_id].insert(ref.cluster_id);
      charge(ref.cluster_id, expansion(length, params_));
    };

    std::unordered_map<ChunkId, ClusterId> decided;
    for (std::size_t i = 0; i < meta.chunks.size(); ++i) {
      auto& out = reply.placed.chunks[i];
      const std::uint32_t length = req.chunk_lengths.empty() ? 0 : req.chunk_lengths[i];
      if (out.cluster_id != kUnplaced) {
        cluster(out.cluster_id);  // must exist
        place(out, length);
        continue;
      }
      if (auto d = decided.find(out.chunk_id); d != decided.end()) {
        out.cluster_id = d->second;
        continue;
      }
      const auto where = where_.find(out.chunk_id);
      ClusterId chosen = kUnplaced;
      if (mode == BindingMode::clb) {
        if (where != where_.end()) {
          chosen = *where->second.begin();
        } else {
          chosen = clb_select(length, clusters_, params_);
        }
      } else {
        if (!policy_.user_assignments.contains(req.user))
          policy_.user_assignments[req.user] = {initial_user_assignment(req.user, clusters_)};
        const auto& assigned = policy_.user_assignments[req.user];
        // Prefer a copy already on one of the user's clusters, newest first.
        if (where != where_.end()) {
          for (auto a = assigned.rbegin(); a != assigned.rend(); ++a) {
            if (where->second.contains(*a)) {
              chosen = *a;
              break;
            }
          }
        }
        if (chosen == kUnplaced) chosen = ulb_select(req.user, policy_, clusters_, length, params_);
      }
      out.cluster_id = chosen;
      decided[out.chunk_id] = chosen;
      place(out, length);
    }

    refs_.apply(reply.placed, +1);
    if (req.old_meta) {
      try {
        reply.garbage = refs_.apply(*req.old_meta, -1);
      } catch (...) {
        refs_.apply(reply.placed, -1);
        throw;
      }
    }
  } catch (...) {
    undo();
    throw;
  }

  for (const auto& ref : reply.garbage) drop(ref);
  for (const auto& ref : distinct_refs(reply.placed)) {
    auto it = placements_.find(ref);
    if (it != placements_.end() && !it->second.stored) reply.missing.push_back(ref);
  }
  return reply;
}

wire::DirReleaseReply Directory::release(const wire::DirRelease& req) {
  wire::DirReleaseReply reply;
  reply.garbage = refs_.apply(req.meta, -1);
  for (const auto& ref : reply.garbage) drop(ref);
  return reply;
}

wire::Status Directory::chunk_stored(const wire::ChunkStored& req) {
  auto it = placements_.find(req.ref);
  if (it == placements_.end()) return {Errc::stale, "chunk is no longer placed on this cluster"};
  auto& p = it->second;
  if (p.length != req.length) {
    const auto before = expansion(p.length, params_);
    const auto after = expansion(req.length, params_);
    uncharge(req.ref.cluster_id, before);
    try {
      charge(req.ref.cluster_id, after);
    } catch (...) {
      charge(req.ref.cluster_id, before);
      throw;
    }
    p.length = req.length;
  }
  p.stored = true;
  return {};
}

}  // namespace ecstore
