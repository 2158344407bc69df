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

// End-device client.
//
// Upload chunks the file, asks the user's switching node which chunks are
// missing, and sends only those to their coding nodes. Download takes the
// file's chunk list, reuses cached chunks and fetches the rest: for each
// chunk it asks all n cluster members for their piece and decodes from the
// first k valid ones, cancelling the stragglers.
//
// The *_async operations complete on the transport's execution context.
// The blocking wrappers drive the transport until the operation finishes.
// A client must outlive its pending operations.

#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "ecstore/chunking.hpp"
#include "ecstore/local_cache.hpp"
#include "ecstore/topology.hpp"
#include "ecstore/transport.hpp"

namespace ecstore {

struct ClientOptions {
  std::string user;
  Address switching_node;
  ChunkParams chunking;
  /// Chunks fetched or uploaded concurrently.
  std::size_t window = 4;
  /// Attempts per request on transport failure.
  int attempts = 3;
  double retry_delay_ms = 20;
  /// Modeled decode time per chunk byte, added after the k-th piece (for
  /// simulation; a real decode takes real time anyway).
  double decode_ms_per_byte = 0;
  /// Use a locally cached chunk list instead of asking the switching node.
  bool prefer_local_meta = true;
};

struct UploadReport {
  FileMeta meta;  // as placed by the switching node
  std::size_t chunks_total = 0;
  std::size_t chunks_missing = 0;
  std::uint64_t chunk_bytes_sent = 0;  // payload bytes of StoreChunk
  std::uint64_t bytes_sent = 0;        // every framed request of the operation
  double duration_ms = 0;
};

struct RetrieveReport {
  Bytes data;
  FileMeta meta;
  std::size_t chunks_fetched = 0;
  std::size_t chunks_cached = 0;
  std::uint64_t bytes_sent = 0;
  /// From the call to the moment the file is assembled.
  double duration_ms = 0;
};

struct SyncReport {
  enum class Resolution { unchanged, pulled, pushed, failed };
  std::map<std::string, Resolution> files;

  std::size_t count(Resolution r) const;
};

class Client {
 public:
  Client(Transport& transport, Topology topology, ClientOptions options, std::shared_ptr<LocalCache> cache = nullptr);

  template <typename T>
  using Callback = std::function<void(Result<T>)>;

  /// timestamp defaults to the transport clock, kept strictly above the
  /// cached copy's so a device's own updates always win.
  void upload_async(std::string file_name, Bytes data, Callback<UploadReport> done,
                    std::optional<std::uint64_t> timestamp = std::nullopt);
  void retrieve_async(std::string file_name, Callback<RetrieveReport> done);
  void fetch_chunk_async(const ChunkRef& ref, Callback<Bytes> done);
  void remove_async(std::string file_name, Callback<bool> done);
  void sync_async(Callback<SyncReport> done);

  UploadReport upload(const std::string& file_name, Bytes data, std::optional<std::uint64_t> timestamp = std::nullopt);
  RetrieveReport retrieve(const std::string& file_name);
  Bytes fetch_chunk(const ChunkRef& ref);
  void remove(const std::string& file_name);
  SyncReport sync();

  LocalCache& cache() { return *cache_; }
  const ClientOptions& options() const { return options_; }
  const Topology& topology() const { return topology_; }
  Transport& transport() { return transport_; }

  class Session;

 private:
  void fetch_with(std::shared_ptr<Session> session, const ChunkRef& ref, Callback<Bytes> done);
  void store_missing(std::shared_ptr<Session> session, std::vector<ChunkRef> missing,
                     std::shared_ptr<std::map<ChunkId, Bytes>> payloads, std::shared_ptr<std::uint64_t> chunk_bytes,
                     std::function<void(std::optional<Error>)> done);
  void push_meta(std::shared_ptr<Session> session, FileMeta meta, std::function<void(bool)> done);

  Transport& transport_;
  Topology topology_;
  ClientOptions options_;
  std::shared_ptr<LocalCache> cache_;
};

}  // namespace ecstore
