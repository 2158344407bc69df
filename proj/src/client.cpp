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

#include "ecstore/client.hpp"

#include <algorithm>
#include <set>

namespace ecstore {

// Connections opened lazily for one top-level operation and released when
// the last request of the operation completes.
class Client::Session : public std::enable_shared_from_this<Session> {
 public:
  Session(Transport& transport, int attempts, double retry_delay_ms)
      : transport_(transport), attempts_(attempts), retry_delay_ms_(retry_delay_ms) {}

  ~Session() {
    for (const auto& [addr, conn] : conns_)
      if (conn.ready) transport_.disconnect(addr);
  }

  Transport& transport() { return transport_; }
  std::uint64_t bytes_sent() const { return bytes_sent_; }

  /// Sends once the connection is up. wanted() is consulted just before
  /// sending; on_sent receives the request id.
  void request(const Address& to, wire::Body body, ReplyFn on_reply, std::function<bool()> wanted = nullptr,
               std::function<void(std::uint64_t)> on_sent = nullptr) {
    with_connection(to, [self = shared_from_this(), to, body = std::move(body), on_reply = std::move(on_reply),
                         wanted = std::move(wanted), on_sent = std::move(on_sent)](Errc e) mutable {
      if (wanted && !wanted()) return;
      if (e != Errc::ok) {
        on_reply(Error(e, "cannot connect to " + to));
        return;
      }
      auto info = self->transport_.request(to, std::move(body), [self, on_reply](Result<wire::Message> r) {
        on_reply(std::move(r));
      });
      self->bytes_sent_ += info.bytes;
      if (on_sent) on_sent(info.request_id);
    });
  }

  /// request() with retries on transport failure.
  void call(const Address& to, wire::Body body, ReplyFn on_reply, int attempts = 0) {
    if (attempts == 0) attempts = attempts_;
    wire::Body copy = attempts > 1 ? body : wire::Body{};
    request(to, std::move(body),
            [self = shared_from_this(), to, copy = std::move(copy), on_reply, attempts](Result<wire::Message> r) mutable {
              if (!r.ok() && r.error().code() == Errc::transport && attempts > 1) {
                self->transport_.after(self->retry_delay_ms_, [self, to, copy = std::move(copy), on_reply, attempts] {
                  self->call(to, copy, on_reply, attempts - 1);
                });
                return;
              }
              on_reply(std::move(r));
            });
  }

 private:
  struct Conn {
    bool ready = false;
    std::vector<std::function<void(Errc)>> waiters;
  };

  void with_connection(const Address& to, std::function<void(Errc)> then) {
    auto it = conns_.find(to);
    if (it != conns_.end() && it->second.ready) {
      then(Errc::ok);
      return;
    }
    if (it != conns_.end()) {
      it->second.waiters.push_back(std::move(then));
      return;
    }
    conns_[to].waiters.push_back(std::move(then));
    transport_.connect(to, [self = shared_from_this(), to](Errc e) {
      auto node = self->conns_.extract(to);
      auto waiters = std::move(node.mapped().waiters);
      if (e == Errc::ok) {
        self->conns_[to].ready = true;
      }
      // On failure the entry is gone, so a retry reconnects.
      for (auto& w : waiters) w(e);
    });
  }

  Transport& transport_;
  int attempts_;
  double retry_delay_ms_;
  std::map<Address, Conn> conns_;
  std::uint64_t bytes_sent_ = 0;
};

namespace {

using ErrorCallback = std::function<void(std::optional<Error>)>;

// Runs task(0..count-1) with at most window in flight. Stops launching at
// the first error and reports it once everything running has finished.
class Windowed : public std::enable_shared_from_this<Windowed> {
 public:
  using Task = std::function<void(std::size_t, ErrorCallback)>;

  Windowed(std::size_t count, std::size_t window, Task task, ErrorCallback done)
      : count_(count), window_(std::max<std::size_t>(window, 1)), task_(std::move(task)), done_(std::move(done)) {}

  void pump() {
    if (launching_) return;
    launching_ = true;
    while (!error_ && running_ < window_ && next_ < count_) {
      const std::size_t i = next_++;
      ++running_;
      task_(i, [self = shared_from_this()](std::optional<Error> e) { self->complete(std::move(e)); });
    }
    launching_ = false;
    report_if_done();
  }

 private:
  void complete(std::optional<Error> e) {
    --running_;
    ++finished_;
    if (e && !error_) error_ = std::move(e);
    if (!report_if_done()) pump();
  }

  bool report_if_done() {
    if (reported_) return true;
    if (error_ ? running_ == 0 : finished_ == count_) {
      reported_ = true;
      auto done = std::move(done_);
      done(error_);
      return true;
    }
    return false;
  }

  std::size_t count_, window_, next_ = 0, running_ = 0, finished_ = 0;
  std::optional<Error> error_;
  bool reported_ = false;
  bool launching_ = false;
  Task task_;
  ErrorCallback done_;
};

void run_windowed(std::size_t count, std::size_t window, Windowed::Task task, ErrorCallback done) {
  std::make_shared<Windowed>(count, window, std::move(task), std::move(done))->pump();
}

bool plausible(const std::optional<CodedPiece>& piece, const ChunkRef& ref, std::uint8_t index,
               const CodingParams& params) {
  return piece && piece->chunk_id == ref.chunk_id && piece->index == index && piece->params == params &&
         piece->original_len > 0 && piece->payload.size() == piece_size(piece->original_len, params);
}

// Decodes and checks the digest; nullopt on any mismatch.
std::optional<Bytes> try_decode(const std::vector<CodedPiece>& pieces, const ChunkRef& ref,
                                const CodingParams& params) {
  try {
    Bytes out = decode_chunk(pieces, params, pieces.front().original_len);
    if (chunk_id(out) == ref.chunk_id) return out;
  } catch (const Error&) {
  }
  return std::nullopt;
}

}  // namespace

std::size_t SyncReport::count(Resolution r) const {
  return static_cast<std::size_t>(
      std::count_if(files.begin(), files.end(), [r](const auto& kv) { return kv.second == r; }));
}

Client::Client(Transport& transport, Topology topology, ClientOptions options, std::shared_ptr<LocalCache> cache)
    : transport_(transport),
      topology_(std::move(topology)),
      options_(std::move(options)),
      cache_(cache ? std::move(cache) : std::make_shared<LocalCache>()) {
  options_.chunking.validate();
  if (options_.user.empty()) throw Error(Errc::config, "client needs a user id");
  if (options_.switching_node.empty()) throw Error(Errc::config, "client needs a switching node");
}

void Client::store_missing(std::shared_ptr<Session> session, std::vector<ChunkRef> missing,
                           std::shared_ptr<std::map<ChunkId, Bytes>> payloads,
                           std::shared_ptr<std::uint64_t> chunk_bytes, ErrorCallback done) {
  auto refs = std::make_shared<std::vector<ChunkRef>>(std::move(missing));
  run_windowed(
      refs->size(), options_.window,
      [this, session, refs, payloads, chunk_bytes](std::size_t i, ErrorCallback next) {
        const ChunkRef ref = (*refs)[i];
        auto it = payloads->find(ref.chunk_id);
        if (it == payloads->end()) {
          next(Error(Errc::protocol, "asked to upload unknown chunk " + ref.chunk_id.hex()));
          return;
        }
        Address coding;
        try {
          coding = topology_.coding_node(ref.chunk_id, ref.cluster_id);
        } catch (const Error& e) {
          next(e);
          return;
        }
        const std::uint64_t size = it->second.size();
        session->call(coding, wire::StoreChunk{ref.chunk_id, ref.cluster_id, it->second},
                      [next, chunk_bytes, size, ref](Result<wire::Message> r) {
                        auto ack = expect_reply<wire::StoreAck>(std::move(r));
                        if (!ack.ok()) {
                          next(ack.error());
                        } else if (!ack.value().status.ok()) {
                          next(Error(ack.value().status.code,
                                     "chunk " + ref.chunk_id.hex() + ": " + ack.value().status.detail));
                        } else {
                          *chunk_bytes += size;
                          next(std::nullopt);
                        }
                      });
      },
      std::move(done));
}

void Client::upload_async(std::string file_name, Bytes data, Callback<UploadReport> done,
                          std::optional<std::uint64_t> timestamp) {
  auto session = std::make_shared<Session>(transport_, options_.attempts, options_.retry_delay_ms);
  const double start = transport_.now_ms();
  FileMeta meta;
  auto payloads = std::make_shared<std::map<ChunkId, Bytes>>();
  std::vector<std::uint32_t> lengths;
  try {
    auto chunks = chunk_stream(data, options_.chunking);
    std::uint64_t ts = 0;
    if (timestamp) {
      ts = *timestamp;
    } else {
      ts = transport_.timestamp_ms();
      if (auto cached = cache_->find_meta(file_name)) ts = std::max(ts, cached->timestamp + 1);
    }
    std::vector<ClusterId> unplaced(chunks.size(), kUnplaced);
    meta = build_file_meta(options_.user, file_name, chunks, unplaced, ts);
    for (auto& c : chunks) {
      lengths.push_back(static_cast<std::uint32_t>(c.payload.size()));
      payloads->try_emplace(c.id, std::move(c.payload));
    }
  } catch (const Error& e) {
    done(e);
    return;
  }

  auto report = std::make_shared<UploadReport>();
  report->chunks_total = meta.chunks.size();
  auto chunk_bytes = std::make_shared<std::uint64_t>(0);
  const Address sw = options_.switching_node;
  session->call(
      sw, wire::StoreMeta{options_.user, meta, std::move(lengths)},
      [this, session, report, payloads, chunk_bytes, done, sw, file_name, start](Result<wire::Message> r) {
        auto missing = expect_reply<wire::MissingList>(std::move(r));
        if (!missing.ok()) {
          done(missing.error());
          return;
        }
        report->chunks_missing = missing.value().refs.size();
        store_missing(
            session, std::move(missing.value().refs), payloads, chunk_bytes,
            [this, session, report, payloads, chunk_bytes, done, sw, file_name, start](std::optional<Error> err) {
              if (err) {
                done(*err);
                return;
              }
              session->call(sw, wire::GetMeta{options_.user, file_name},
                            [this, session, report, payloads, chunk_bytes, done, file_name,
                             start](Result<wire::Message> r) {
                              auto reply = expect_reply<wire::MetaReply>(std::move(r));
                              if (!reply.ok()) {
                                done(reply.error());
                                return;
                              }
                              if (!reply.value().meta) {
                                done(Error(Errc::not_found, file_name + " vanished from the switching node"));
                                return;
                              }
                              report->meta = std::move(*reply.value().meta);
                              cache_->put_meta(report->meta);
                              for (auto& [id, payload] : *payloads) cache_->put_chunk(id, payload);
                              report->chunk_bytes_sent = *chunk_bytes;
                              report->bytes_sent = session->bytes_sent();
                              report->duration_ms = transport_.now_ms() - start;
                              done(std::move(*report));
                            });
            });
      });
}

void Client::fetch_with(std::shared_ptr<Session> session, const ChunkRef& ref, Callback<Bytes> done) {
  const ClusterState* cluster = nullptr;
  try {
    cluster = &topology_.cluster(ref.cluster_id);
  } catch (const Error& e) {
    done(e);
    return;
  }
  const CodingParams params = topology_.params;
  const std::size_t n = params.n;

  struct State {
    std::vector<std::optional<CodedPiece>> pieces;
    std::vector<bool> replied;
    std::vector<std::optional<std::uint64_t>> rid;
    std::size_t valid = 0, received = 0;
    bool finished = false;
    bool suspect = false;  // the first k valid pieces did not decode to the digest
  };
  auto st = std::make_shared<State>();
  st->pieces.resize(n);
  st->replied.assign(n, false);
  st->rid.resize(n);
  const std::vector<Address> members = cluster->members;

  auto finish = [this, st, members, done](Result<Bytes> result) {
    st->finished = true;
    for (std::size_t i = 0; i < members.size(); ++i)
      if (!st->replied[i] && st->rid[i]) transport_.cancel(members[i], *st->rid[i]);
    if (result.ok() && options_.decode_ms_per_byte > 0) {
      const double cost = options_.decode_ms_per_byte * static_cast<double>(result.value().size());
      transport_.after(cost, [done, result = std::move(result)] { done(result); });
      return;
    }
    done(std::move(result));
  };

  auto evaluate = [st, ref, params, n, finish] {
    const std::size_t k = params.k;
    auto valid_pieces = [&] {
      std::vector<CodedPiece> out;
      for (const auto& p : st->pieces)
        if (p) out.push_back(*p);
      return out;
    };
    if (!st->suspect && st->valid == k) {
      if (auto out = try_decode(valid_pieces(), ref, params)) {
        finish(std::move(*out));
        return;
      }
      st->suspect = true;
    }
    if (st->valid + (n - st->received) < k) {
      finish(Error(Errc::unrecoverable_chunk, "chunk " + ref.chunk_id.hex() + ": only " +
                                                  std::to_string(st->valid) + " of " + std::to_string(k) +
                                                  " pieces obtainable"));
      return;
    }
    if (st->suspect && st->received == n) {
      // Every reply is in; search the k-subsets for one that verifies.
      auto all = valid_pieces();
      std::vector<bool> pick(all.size(), false);
      std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(k), true);
      std::size_t tried = 0;
      do {
        std::vector<CodedPiece> subset;
        for (std::size_t i = 0; i < all.size(); ++i)
          if (pick[i]) subset.push_back(all[i]);
        if (auto out = try_decode(subset, ref, params)) {
          finish(std::move(*out));
          return;
        }
      } while (++tried < 100000 && std::prev_permutation(pick.begin(), pick.end()));
      finish(Error(Errc::corruption, "no " + std::to_string(k) + " pieces of " + ref.chunk_id.hex() +
                                         " decode to its digest"));
    }
  };

  for (std::size_t i = 0; i < n; ++i) {
    const auto index = static_cast<std::uint8_t>(i);
    session->request(
        members[i], wire::GetPiece{ref.chunk_id, index},
        [st, i, index, ref, params, evaluate](Result<wire::Message> r) {
          if (st->finished) return;  // late reply after completion
          st->replied[i] = true;
          ++st->received;
          auto reply = expect_reply<wire::PieceReply>(std::move(r));
          if (reply.ok() && plausible(reply.value().piece, ref, index, params)) {
            st->pieces[i] = std::move(reply.value().piece);
            ++st->valid;
          }
          evaluate();
        },
        [st] { return !st->finished; }, [st, i](std::uint64_t rid) { st->rid[i] = rid; });
  }
}

void Client::fetch_chunk_async(const ChunkRef& ref, Callback<Bytes> done) {
  auto session = std::make_shared<Session>(transport_, options_.attempts, options_.retry_delay_ms);
  fetch_with(session, ref, std::move(done));
}

void Client::retrieve_async(std::string file_name, Callback<RetrieveReport> done) {
  auto session = std::make_shared<Session>(transport_, options_.attempts, options_.retry_delay_ms);
  const double start = transport_.now_ms();

  auto assemble = [this, session, done, start](FileMeta meta) {
    auto report = std::make_shared<RetrieveReport>();
    auto parts = std::make_shared<std::map<ChunkId, Bytes>>();
    auto to_fetch = std::make_shared<std::vector<ChunkRef>>();
    std::set<ChunkId> seen;
    for (const auto& ref : meta.chunks) {
      if (!seen.insert(ref.chunk_id).second) continue;
      if (auto cached = cache_->get_chunk(ref.chunk_id)) {
        (*parts)[ref.chunk_id] = std::move(*cached);
        ++report->chunks_cached;
      } else {
        to_fetch->push_back(ref);
      }
    }
    report->chunks_fetched = to_fetch->size();
    auto shared_meta = std::make_shared<FileMeta>(std::move(meta));
    run_windowed(
        to_fetch->size(), options_.window,
        [this, session, parts, to_fetch](std::size_t i, ErrorCallback next) {
          const ChunkRef ref = (*to_fetch)[i];
          fetch_with(session, ref, [this, parts, ref, next](Result<Bytes> r) {
            if (!r.ok()) {
              next(r.error());
              return;
            }
            cache_->put_chunk(ref.chunk_id, r.value());
            (*parts)[ref.chunk_id] = std::move(r).value();
            next(std::nullopt);
          });
        },
        [this, session, parts, shared_meta, report, done, start](std::optional<Error> err) {
          if (err) {
            done(*err);
            return;
          }
          Bytes data;
          data.reserve(shared_meta->total_len);
          for (const auto& ref : shared_meta->chunks) {
            const auto& part = parts->at(ref.chunk_id);
            data.insert(data.end(), part.begin(), part.end());
          }
          if (data.size() != shared_meta->total_len) {
            done(Error(Errc::corruption, shared_meta->file_name + ": assembled " + std::to_string(data.size()) +
                                             " bytes, expected " + std::to_string(shared_meta->total_len)));
            return;
          }
          cache_->put_meta(*shared_meta);
          report->data = std::move(data);
          report->meta = *shared_meta;
          report->bytes_sent = session->bytes_sent();
          report->duration_ms = transport_.now_ms() - start;
          done(std::move(*report));
        });
  };

  if (options_.prefer_local_meta) {
    if (auto cached = cache_->find_meta(file_name)) {
      assemble(std::move(*cached));
      return;
    }
  }
  session->call(options_.switching_node, wire::GetMeta{options_.user, file_name},
                [assemble, done, file_name](Result<wire::Message> r) {
                  auto reply = expect_reply<wire::MetaReply>(std::move(r));
                  if (!reply.ok()) {
                    done(reply.error());
                    return;
                  }
                  if (!reply.value().meta) {
                    done(Error(Errc::not_found, "no file named " + file_name));
                    return;
                  }
                  assemble(std::move(*reply.value().meta));
                });
}

void Client::remove_async(std::string file_name, Callback<bool> done) {
  auto session = std::make_shared<Session>(transport_, options_.attempts, options_.retry_delay_ms);
  session->call(options_.switching_node, wire::DeleteFile{options_.user, file_name},
                [this, session, done, file_name](Result<wire::Message> r) {
                  auto ack = expect_reply<wire::DeleteAck>(std::move(r));
                  if (!ack.ok()) {
                    done(ack.error());
                    return;
                  }
                  if (!ack.value().status.ok()) {
                    done(Error(ack.value().status.code, ack.value().status.detail));
                    return;
                  }
                  cache_->erase_meta(file_name);
                  done(true);
                });
}

void Client::push_meta(std::shared_ptr<Session> session, FileMeta meta, std::function<void(bool)> done) {
  auto payloads = std::make_shared<std::map<ChunkId, Bytes>>();
  std::vector<std::uint32_t> lengths;
  bool complete = true;
  for (const auto& ref : meta.chunks) {
    auto it = payloads->find(ref.chunk_id);
    if (it == payloads->end()) {
      if (auto cached = cache_->get_chunk(ref.chunk_id)) {
        it = payloads->emplace(ref.chunk_id, std::move(*cached)).first;
      }
    }
    if (it == payloads->end()) {
      complete = false;
      continue;
    }
    lengths.push_back(static_cast<std::uint32_t>(it->second.size()));
  }
  if (!complete) lengths.clear();
  const std::string name = meta.file_name;
  session->call(options_.switching_node, wire::StoreMeta{options_.user, std::move(meta), std::move(lengths)},
                [this, session, payloads, done, name](Result<wire::Message> r) {
                  auto missing = expect_reply<wire::MissingList>(std::move(r));
                  if (!missing.ok()) {
                    done(false);
                    return;
                  }
                  store_missing(session, std::move(missing.value().refs), payloads,
                                std::make_shared<std::uint64_t>(0),
                                [this, session, done, name](std::optional<Error> err) {
                                  if (err) {
                                    done(false);
                                    return;
                                  }
                                  session->call(options_.switching_node, wire::GetMeta{options_.user, name},
                                                [this, done](Result<wire::Message> r) {
                                                  auto reply = expect_reply<wire::MetaReply>(std::move(r));
                                                  if (!reply.ok() || !reply.value().meta) {
                                                    done(false);
                                                    return;
                                                  }
                                                  cache_->put_meta(*reply.value().meta);
                                                  done(true);
                                                });
                                });
                });
}

void Client::sync_async(Callback<SyncReport> done) {
  auto session = std::make_shared<Session>(transport_, options_.attempts, options_.retry_delay_ms);
  session->call(
      options_.switching_node, wire::ListMeta{options_.user}, [this, session, done](Result<wire::Message> r) {
        auto list = expect_reply<wire::MetaList>(std::move(r));
        if (!list.ok()) {
          done(list.error());
          return;
        }
        std::map<std::string, FileMeta> remote;
        for (auto& m : list.value().metas) remote.emplace(m.file_name, std::move(m));
        std::map<std::string, FileMeta> local;
        for (auto& m : cache_->metas()) local.emplace(m.file_name, std::move(m));

        auto report = std::make_shared<SyncReport>();
        auto pushes = std::make_shared<std::vector<FileMeta>>();
        std::set<std::string> names;
        for (const auto& [name, m] : remote) names.insert(name);
        for (const auto& [name, m] : local) names.insert(name);
        for (const auto& name : names) {
          const FileMeta* l = local.contains(name) ? &local.at(name) : nullptr;
          const FileMeta* rm = remote.contains(name) ? &remote.at(name) : nullptr;
          const FileMeta& winner = sync_meta(l, rm);
          if (&winner == rm) {
            if (l == nullptr || *l != *rm) {
              cache_->put_meta(*rm);
              report->files[name] = SyncReport::Resolution::pulled;
            } else {
              report->files[name] = SyncReport::Resolution::unchanged;
            }
          } else {
            pushes->push_back(*l);
          }
        }
        run_windowed(
            pushes->size(), 1,
            [this, session, pushes, report](std::size_t i, ErrorCallback next) {
              const std::string name = (*pushes)[i].file_name;
              push_meta(session, (*pushes)[i], [report, name, next](bool ok) {
                report->files[name] = ok ? SyncReport::Resolution::pushed : SyncReport::Resolution::failed;
                next(std::nullopt);
              });
            },
            [report, done](std::optional<Error>) { done(std::move(*report)); });
      });
}

UploadReport Client::upload(const std::string& file_name, Bytes data, std::optional<std::uint64_t> timestamp) {
  return run_sync<UploadReport>(
      transport_, [&](Callback<UploadReport> cb) { upload_async(file_name, std::move(data), std::move(cb), timestamp); });
}

RetrieveReport Client::retrieve(const std::string& file_name) {
  return run_sync<RetrieveReport>(transport_, [&](Callback<RetrieveReport> cb) { retrieve_async(file_name, cb); });
}

Bytes Client::fetch_chunk(const ChunkRef& ref) {
  return run_sync<Bytes>(transport_, [&](Callback<Bytes> cb) { fetch_chunk_async(ref, cb); });
}

void Client::remove(const std::string& file_name) {
  run_sync<bool>(transport_, [&](Callback<bool> cb) { remove_async(file_name, cb); });
}

SyncReport Client::sync() {
  return run_sync<SyncReport>(transport_, [&](Callback<SyncReport> cb) { sync_async(cb); });
}

}  // namespace ecstore
