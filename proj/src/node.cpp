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

#include "ecstore/node.hpp"

#include <set>
#include <sstream>

namespace ecstore {

namespace fs = std::filesystem;

NodeConfig NodeConfig::from_config(const KeyValueConfig& cfg, const Topology& topology) {
  NodeConfig nc;
  nc.address = cfg.get("listen");
  bool found = false;
  for (const auto& c : topology.clusters) {
    for (std::size_t i = 0; i < c.members.size(); ++i) {
      if (c.members[i] == nc.address) {
        nc.cluster_id = c.cluster_id;
        nc.position = static_cast<std::uint8_t>(i);
        found = true;
      }
    }
  }
  if (!found) throw Error(Errc::config, "listen address " + nc.address + " is not in the topology");
  if (cfg.has("position") && cfg.get_u64("position", 0) != nc.position)
    throw Error(Errc::config, "node " + nc.address + ": position " + cfg.get("position") +
                                  " disagrees with topology position " + std::to_string(nc.position));
  nc.params = topology.params;
  if ((cfg.has("n") && cfg.get_u64("n", 0) != topology.params.n) ||
      (cfg.has("k") && cfg.get_u64("k", 0) != topology.params.k))
    throw Error(Errc::config, "node " + nc.address + ": n/k disagree with the topology");
  nc.mode = parse_binding_mode(cfg.get("mode", "clb"));
  nc.capacity = cfg.get_u64("capacity", nc.capacity);
  nc.store_dir = cfg.get("store_dir", "");
  return nc;
}

Node::Node(NodeConfig config, Topology topology, Transport& transport)
    : config_(std::move(config)),
      topology_(std::move(topology)),
      transport_(transport),
      pieces_(config_.store_dir.empty() ? fs::path{} : config_.store_dir / "pieces"),
      meta_journal_(config_.store_dir.empty() ? fs::path{} : config_.store_dir / "meta.journal"),
      dir_journal_(config_.store_dir.empty() ? fs::path{} : config_.store_dir / "directory.journal"),
      alive_(std::make_shared<bool>(true)) {
  topology_.validate();
  if (config_.params != topology_.params) throw Error(Errc::config, "node coding params differ from the topology");
  const auto& home = topology_.cluster(config_.cluster_id);
  if (config_.position >= home.members.size() || home.members[config_.position] != config_.address)
    throw Error(Errc::config, "node " + config_.address + " is not member " + std::to_string(config_.position) +
                                  " of cluster " + std::to_string(config_.cluster_id));
  if (config_.address == topology_.directory()) {
    auto clusters = topology_.clusters;
    for (auto& c : clusters) {
      c.capacity = config_.capacity * config_.params.n;
      c.used = 0;
    }
    directory_ = std::make_unique<Directory>(config_.params, std::move(clusters));
  }
  load_state();
}

Node::~Node() { *alive_ = false; }

void Node::load_state() {
  for (auto& m : meta_journal_.replay()) {
    if (auto* put = std::get_if<wire::StoreMeta>(&m.body)) {
      tables_.try_emplace(put->user, put->user).first->second.put(put->meta);
    } else if (auto* del = std::get_if<wire::DeleteFile>(&m.body)) {
      auto it = tables_.find(del->user);
      if (it != tables_.end()) it->second.erase(del->file_name);
    }
  }
  if (meta_journal_.enabled()) {
    // Compact to one record per live file.
    std::vector<wire::Message> live;
    for (const auto& [user, table] : tables_)
      for (const auto& [name, meta] : table.files()) live.push_back(wire::make(0, wire::StoreMeta{user, meta, {}}));
    meta_journal_.rewrite(live);
  }
  if (directory_) {
    for (auto& m : dir_journal_.replay()) {
      try {
        if (auto* c = std::get_if<wire::DirCommit>(&m.body)) {
          directory_->commit(*c);
        } else if (auto* r = std::get_if<wire::DirRelease>(&m.body)) {
          directory_->release(*r);
        } else if (auto* s = std::get_if<wire::ChunkStored>(&m.body)) {
          directory_->chunk_stored(*s);
        }
      } catch (const Error&) {
        // Only successful operations are journaled; a failure here means
        // the log was edited. Skip the record.
      }
    }
  }
}

void Node::journal_meta(const wire::Message& m) { meta_journal_.append(m); }

bool Node::idle() const {
  if (dir_queue_.busy || !dir_queue_.ops.empty()) return false;
  for (const auto& [user, q] : user_queues_)
    if (q.busy || !q.ops.empty()) return false;
  return true;
}

std::uint64_t Node::meta_index_bytes() const {
  std::uint64_t total = 0;
  for (const auto& [user, table] : tables_)
    for (const auto& [name, meta] : table.files()) total += encoded_size(meta);
  return total;
}

void Node::enqueue(Queue& q, Op op) {
  q.ops.push_back(std::move(op));
  if (q.busy) return;
  q.busy = true;
  Op next = std::move(q.ops.front());
  q.ops.pop_front();
  next([this, &q, alive = alive_] {
    if (*alive) finish(q);
  });
}

void Node::finish(Queue& q) {
  q.busy = false;
  if (q.ops.empty()) return;
  // Resume from the transport rather than recursing, so long queues of
  // synchronous operations do not grow the stack.
  transport_.after(0, [this, &q, alive = alive_] {
    if (!*alive || q.busy || q.ops.empty()) return;
    q.busy = true;
    Op next = std::move(q.ops.front());
    q.ops.pop_front();
    next([this, &q, alive] {
      if (*alive) finish(q);
    });
  });
}

bool Node::concurrent(const wire::Message& request) const {
  return std::holds_alternative<wire::GetPiece>(request.body);
}

void Node::handle(const Address& from, const wire::Message& request, Responder respond) {
  (void)from;
  try {
    std::visit(
        [&](const auto& body) {
          using T = std::decay_t<decltype(body)>;
          if constexpr (std::is_same_v<T, wire::StoreMeta>) {
            enqueue(user_queues_[body.user], [this, body, respond](Done done) { on_store_meta(body, respond, done); });
          } else if constexpr (std::is_same_v<T, wire::GetMeta>) {
            enqueue(user_queues_[body.user], [this, body, respond](Done done) {
              on_get_meta(body, respond);
              done();
            });
          } else if constexpr (std::is_same_v<T, wire::ListMeta>) {
            enqueue(user_queues_[body.user], [this, body, respond](Done done) {
              on_list_meta(body, respond);
              done();
            });
          } else if constexpr (std::is_same_v<T, wire::DeleteFile>) {
            enqueue(user_queues_[body.user], [this, body, respond](Done done) { on_delete_file(body, respond, done); });
          } else if constexpr (std::is_same_v<T, wire::StoreChunk>) {
            on_store_chunk(body, respond);
          } else if constexpr (std::is_same_v<T, wire::StorePiece>) {
            bool existed = false;
            auto status = store_piece_local(body.piece, &existed);
            if (status.ok() && existed) status.detail = "replaced";
            respond(wire::PieceAck{status});
          } else if constexpr (std::is_same_v<T, wire::GetPiece>) {
            respond(wire::PieceReply{pieces_.get(body.chunk_id, body.index)});
          } else if constexpr (std::is_same_v<T, wire::DeletePiece>) {
            pieces_.erase(body.chunk_id, body.index);
            respond(wire::DeleteAck{});
          } else if constexpr (std::is_same_v<T, wire::Cancel>) {
            // Replies are produced without suspension, so there is never
            // server-side work left to abandon.
          } else if constexpr (std::is_same_v<T, wire::DirCommit> || std::is_same_v<T, wire::DirRelease> ||
                               std::is_same_v<T, wire::ChunkStored>) {
            if (!directory_) {
              respond(wire::ErrorReply{{Errc::routing, config_.address + " does not host the directory"}});
              return;
            }
            enqueue(dir_queue_, [this, request, respond](Done done) { on_dir_op(request, respond, done); });
          } else {
            respond(wire::ErrorReply{
                {Errc::protocol, std::string(wire::type_name(request.type())) + " is not a request"}});
          }
        },
        request.body);
  } catch (const Error& e) {
    respond(wire::ErrorReply{{e.code(), e.what()}});
  } catch (const std::exception& e) {
    respond(wire::ErrorReply{{Errc::io, e.what()}});
  }
}

void Node::on_store_meta(wire::StoreMeta req, Responder respond, Done done) {
  const FileMeta& meta = req.meta;
  std::string problem;
  if (meta.user_id != req.user) problem = "meta belongs to another user";
  else if (meta.file_name.empty()) problem = "empty file name";
  else if (!req.chunk_lengths.empty() && req.chunk_lengths.size() != meta.chunks.size())
    problem = "chunk_lengths does not match the chunk list";
  if (!problem.empty()) {
    respond(wire::ErrorReply{{Errc::protocol, problem}});
    done();
    return;
  }
  auto& table = tables_.try_emplace(req.user, req.user).first->second;
  const FileMeta* existing = table.find(meta.file_name);
  if (existing != nullptr && &sync_meta(&meta, existing) == existing) {
    // The stored copy is at least as new; nothing to place.
    respond(wire::MissingList{});
    done();
    return;
  }
  wire::DirCommit commit{req.user, config_.mode, std::nullopt, meta, std::move(req.chunk_lengths)};
  if (existing != nullptr) commit.old_meta = *existing;
  const std::string user = req.user;
  call(topology_.directory(), std::move(commit), 1,
       [this, user, respond, done, alive = alive_](Result<wire::Message> r) {
         if (!*alive) return;
         auto reply = expect_reply<wire::DirCommitReply>(std::move(r));
         if (!reply.ok()) {
           respond(wire::ErrorReply{{reply.error().code(), reply.error().what()}});
           done();
           return;
         }
         auto& placed = reply.value().placed;
         journal_meta(wire::make(0, wire::StoreMeta{user, placed, {}}));
         tables_.try_emplace(user, user).first->second.put(placed);
         respond(wire::MissingList{std::move(reply.value().missing)});
         done();
       });
}

void Node::on_get_meta(const wire::GetMeta& req, Responder respond) {
  wire::MetaReply reply;
  auto it = tables_.find(req.user);
  if (it != tables_.end())
    if (const auto* m = it->second.find(req.file_name)) reply.meta = *m;
  respond(std::move(reply));
}

void Node::on_list_meta(const wire::ListMeta& req, Responder respond) {
  wire::MetaList reply;
  auto it = tables_.find(req.user);
  if (it != tables_.end())
    for (const auto& [name, meta] : it->second.files()) reply.metas.push_back(meta);
  respond(std::move(reply));
}

void Node::on_delete_file(wire::DeleteFile req, Responder respond, Done done) {
  auto it = tables_.find(req.user);
  const FileMeta* meta = it == tables_.end() ? nullptr : it->second.find(req.file_name);
  if (meta == nullptr) {
    respond(wire::DeleteAck{{Errc::not_found, "no file " + req.file_name + " for user " + req.user}});
    done();
    return;
  }
  call(topology_.directory(), wire::DirRelease{*meta}, 1,
       [this, req, respond, done, alive = alive_](Result<wire::Message> r) {
         if (!*alive) return;
         auto reply = expect_reply<wire::DirReleaseReply>(std::move(r));
         if (!reply.ok()) {
           respond(wire::DeleteAck{{reply.error().code(), reply.error().what()}});
           done();
           return;
         }
         journal_meta(wire::make(0, req));
         tables_[req.user].erase(req.file_name);
         respond(wire::DeleteAck{});
         done();
       });
}

wire::Status Node::store_piece_local(const CodedPiece& piece, bool* existed) {
  if (piece.index != config_.position)
    return {Errc::invalid_argument, "piece " + std::to_string(piece.index) + " sent to position " +
                                        std::to_string(config_.position)};
  if (piece.params != config_.params) return {Errc::invalid_argument, "piece coded with different (n, k)"};
  if (piece.payload.size() != piece_size(piece.original_len, piece.params))
    return {Errc::invalid_argument, "piece payload length does not match original_len"};
  const bool had = pieces_.contains(piece.chunk_id, piece.index);
  if (!had && pieces_.used_bytes() + piece.payload.size() > config_.capacity)
    return {Errc::capacity_exhausted, config_.address + " is full"};
  try {
    *existed = pieces_.put(piece);
  } catch (const Error& e) {
    return {e.code(), e.what()};
  }
  return {};
}

void Node::call(const Address& to, wire::Body body, int attempts, ReplyFn on_reply) {
  wire::Body retry_body = attempts > 1 ? body : wire::Body{};
  transport_.request(to, std::move(body),
                     [this, to, attempts, retry_body = std::move(retry_body), on_reply = std::move(on_reply),
                      alive = alive_](Result<wire::Message> r) mutable {
                       if (!*alive) return;
                       if (!r.ok() && r.error().code() == Errc::transport && attempts > 1) {
                         transport_.after(config_.retry_delay_ms, [this, to, attempts, body = std::move(retry_body),
                                                                   on_reply = std::move(on_reply), alive]() mutable {
                           if (*alive) call(to, std::move(body), attempts - 1, std::move(on_reply));
                         });
                         return;
                       }
                       on_reply(std::move(r));
                     });
}

void Node::delete_pieces(const ChunkId& chunk, const ClusterState& cluster, std::vector<std::uint8_t> indices,
                         Done done) {
  auto pending = std::make_shared<std::size_t>(indices.size() + 1);
  auto step = [pending, done] {
    if (--*pending == 0) done();
  };
  for (auto index : indices) {
    const Address& member = cluster.members[index];
    if (member == config_.address) {
      pieces_.erase(chunk, index);
      step();
      continue;
    }
    call(member, wire::DeletePiece{chunk, index}, config_.store_attempts, [step](Result<wire::Message>) { step(); });
  }
  step();
}

void Node::on_store_chunk(wire::StoreChunk req, Responder respond) {
  if (req.cluster_id != config_.cluster_id) {
    respond(wire::StoreAck{{Errc::routing, "chunk for cluster " + std::to_string(req.cluster_id) + " sent to " +
                                               config_.address}});
    return;
  }
  if (req.payload.empty()) {
    respond(wire::StoreAck{{Errc::invalid_argument, "empty chunk"}});
    return;
  }
  if (chunk_id(req.payload) != req.chunk_id) {
    respond(wire::StoreAck{{Errc::integrity, "payload digest does not match " + req.chunk_id.hex()}});
    return;
  }
  const auto& cluster = topology_.cluster(config_.cluster_id);
  auto coded = encode_chunk(req.payload, config_.params, req.chunk_id);

  struct Fanout {
    std::size_t pending = 0;
    std::vector<std::uint8_t> created;
    std::string failure;
  };
  auto st = std::make_shared<Fanout>();
  st->pending = coded.size();
  const ChunkRef ref{req.chunk_id, req.cluster_id};
  const auto length = static_cast<std::uint32_t>(req.payload.size());
  const std::uint8_t n = config_.params.n;

  auto complete = [this, st, ref, length, n, respond, alive = alive_] {
    const auto& cluster = topology_.cluster(ref.cluster_id);
    if (!st->failure.empty()) {
      delete_pieces(ref.chunk_id, cluster, st->created, [respond, st] {
        respond(wire::StoreAck{{Errc::partial_store, st->failure}});
      });
      return;
    }
    call(topology_.directory(), wire::ChunkStored{ref, length}, config_.store_attempts,
         [this, st, ref, n, respond, alive](Result<wire::Message> r) {
           if (!*alive) return;
           const auto& cluster = topology_.cluster(ref.cluster_id);
           auto ack = expect_reply<wire::ChunkStoredAck>(std::move(r));
           if (ack.ok() && ack.value().status.ok()) {
             respond(wire::StoreAck{});
             return;
           }
           if (ack.ok() && ack.value().status.code == Errc::stale) {
             // The file went away while we were storing; nothing refers to
             // this chunk on this cluster.
             std::vector<std::uint8_t> all(n);
             for (std::uint8_t i = 0; i < n; ++i) all[i] = i;
             delete_pieces(ref.chunk_id, cluster, all, [respond] { respond(wire::StoreAck{{Errc::ok, "stale"}}); });
             return;
           }
           const std::string why = ack.ok() ? ack.value().status.detail : ack.error().what();
           delete_pieces(ref.chunk_id, cluster, st->created, [respond, why] {
             respond(wire::StoreAck{{Errc::partial_store, "directory did not record the chunk: " + why}});
           });
         });
  };
  auto piece_done = [st, complete](std::uint8_t index, const wire::Status& status) {
    if (status.ok()) {
      if (status.detail != "replaced") st->created.push_back(index);
    } else if (st->failure.empty()) {
      st->failure = "piece " + std::to_string(index) + ": " + std::string(errc_name(status.code)) + " " + status.detail;
    }
    if (--st->pending == 0) complete();
  };

  for (auto& piece : coded) {
    const std::uint8_t index = piece.index;
    const Address& member = cluster.members[index];
    if (member == config_.address) {
      bool existed = false;
      auto status = store_piece_local(piece, &existed);
      if (status.ok() && existed) status.detail = "replaced";
      piece_done(index, status);
      continue;
    }
    call(member, wire::StorePiece{std::move(piece)}, config_.store_attempts,
         [piece_done, index](Result<wire::Message> r) {
           auto ack = expect_reply<wire::PieceAck>(std::move(r));
           piece_done(index, ack.ok() ? ack.value().status : wire::Status{ack.error().code(), ack.error().what()});
         });
  }
}

void Node::on_dir_op(wire::Message req, Responder respond, Done done) {
  try {
    if (auto* c = std::get_if<wire::DirCommit>(&req.body)) {
      auto reply = directory_->commit(*c);
      dir_journal_.append(req);
      auto garbage = reply.garbage;
      respond(std::move(reply));
      collect_garbage(std::move(garbage), done);
    } else if (auto* r = std::get_if<wire::DirRelease>(&req.body)) {
      auto reply = directory_->release(*r);
      dir_journal_.append(req);
      auto garbage = reply.garbage;
      respond(std::move(reply));
      collect_garbage(std::move(garbage), done);
    } else if (auto* s = std::get_if<wire::ChunkStored>(&req.body)) {
      auto status = directory_->chunk_stored(*s);
      if (status.ok()) dir_journal_.append(req);
      respond(wire::ChunkStoredAck{status});
      done();
    }
  } catch (const Error& e) {
    respond(wire::ErrorReply{{e.code(), e.what()}});
    done();
  }
}

void Node::collect_garbage(std::vector<ChunkRef> garbage, Done done) {
  // The directory queue stays blocked until the deletes finish, so a later
  // commit cannot re-place a chunk whose pieces are still being removed.
  auto pending = std::make_shared<std::size_t>(garbage.size() + 1);
  auto step = [pending, done] {
    if (--*pending == 0) done();
  };
  std::vector<std::uint8_t> all(config_.params.n);
  for (std::uint8_t i = 0; i < config_.params.n; ++i) all[i] = i;
  for (const auto& ref : garbage) delete_pieces(ref.chunk_id, topology_.cluster(ref.cluster_id), all, step);
  step();
}

std::string ConsistencyReport::summary() const {
  std::ostringstream out;
  out << orphans.size() << " orphan pieces, " << incomplete.size() << " incomplete chunks, "
      << refcount_mismatches.size() << " refcount mismatches, " << used_mismatches.size() << " used-bytes mismatches, "
      << space_mismatches.size() << " cluster accounting mismatches";
  return out.str();
}

ConsistencyReport check_consistency(const std::vector<const Node*>& nodes) {
  ConsistencyReport report;
  const Directory* dir = nullptr;
  std::map<Address, const Node*> by_address;
  std::vector<const FileMeta*> metas;
  for (const Node* node : nodes) {
    by_address[node->config().address] = node;
    if (node->directory() != nullptr) dir = node->directory();
    for (const auto& [user, table] : node->meta_tables())
      for (const auto& [name, meta] : table.files()) metas.push_back(&meta);
  }
  if (dir == nullptr) throw Error(Errc::config, "no directory among the scanned nodes");

  const auto recount = RefCountTable::recount(metas);
  std::set<ChunkRef> refs;
  for (const auto& [ref, c] : recount.counts()) refs.insert(ref);
  for (const auto& [ref, c] : dir->refcounts().counts()) refs.insert(ref);
  for (const auto& ref : refs)
    if (recount.count(ref) != dir->refcounts().count(ref)) report.refcount_mismatches.push_back(ref);

  const auto& params = dir->params();
  std::map<ClusterId, std::uint64_t> expected_used;
  for (const auto& [ref, placement] : dir->placements()) {
    expected_used[ref.cluster_id] += expansion(placement.length, params);
    if (!placement.stored) continue;
    const auto& cluster = nodes.front()->topology().cluster(ref.cluster_id);
    for (std::uint8_t i = 0; i < params.n; ++i) {
      auto it = by_address.find(cluster.members[i]);
      if (it == by_address.end() || !it->second->pieces().contains(ref.chunk_id, i)) {
        report.incomplete.push_back(ref);
        break;
      }
    }
  }
  for (const auto& c : dir->clusters())
    if (c.used != expected_used[c.cluster_id]) report.space_mismatches.push_back(c.cluster_id);

  for (const Node* node : nodes) {
    const auto& cfg = node->config();
    for (const auto& info : node->pieces().list()) {
      const ChunkRef ref{info.key.chunk_id, cfg.cluster_id};
      if (info.key.index != cfg.position || !dir->placements().contains(ref) || dir->refcounts().count(ref) == 0)
        report.orphans.push_back(info);
    }
    if (node->pieces().used_bytes() != node->pieces().scan_used_bytes()) report.used_mismatches.push_back(cfg.address);
  }
  return report;
}

}  // namespace ecstore
