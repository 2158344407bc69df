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

// Experiment driver: synthetic workloads, cluster bring-up, trace replay
// and the two headline metrics (dedup ratio, average retrieval time).

#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "ecstore/client.hpp"
#include "ecstore/node.hpp"
#include "ecstore/sim_network.hpp"
#include "ecstore/topology.hpp"

namespace ecstore {

// ---------------------------------------------------------------- workload

struct WorkloadSpec {
  std::size_t users = 10;
  std::size_t files_per_user = 50;
  /// File sizes are log-uniform in [min_file, max_file].
  std::uint64_t min_file = 64 << 10;
  std::uint64_t max_file = 4 << 20;
  /// Share of a private file's 16 KiB segments copied from earlier in the
  /// same file.
  double repeat_fraction = 0.1;
  /// Share of each user's files that are copies of a shared document.
  double shared_fraction = 0.3;
  /// Size of the shared document pool; 0 picks twice the shared files per
  /// user, so each document is held by about half of the users.
  std::size_t shared_documents = 0;
  /// Timed retrievals spread over the trace.
  std::size_t gets = 200;
  /// Share of gets aimed at the user's shared documents (Zipf popularity).
  double hot_fraction = 0.5;
  /// Removals issued after the last get.
  std::size_t removes = 0;
  double hours = 24;
  std::uint64_t seed = 1;

  void validate() const;
  /// Reads the keys named like the fields; missing keys keep defaults.
  static WorkloadSpec from_config(const KeyValueConfig& cfg);
  void to_config(KeyValueConfig& cfg) const;
};

struct DocumentSpec {
  std::uint64_t size = 0;
  std::uint64_t seed = 0;
};

struct FileSpec {
  std::string user;
  std::string name;
  std::uint64_t size = 0;
  /// Index into Workload::documents, or -1 for private content.
  std::int64_t document = -1;
  std::uint64_t seed = 0;
};

struct TraceEvent {
  enum class Op : std::uint8_t { put, get, rm };
  /// Milliseconds since the start of the trace.
  double time_ms = 0;
  Op op = Op::get;
  std::uint32_t file = 0;

  bool operator==(const TraceEvent&) const = default;
};

std::string_view trace_op_name(TraceEvent::Op op);

struct Workload {
  WorkloadSpec spec;
  std::vector<DocumentSpec> documents;
  std::vector<FileSpec> files;
  /// Sorted by time. Puts at time 0 form the initial load.
  std::vector<TraceEvent> trace;

  std::vector<std::string> users() const;
  std::uint64_t total_bytes() const;
};

/// Identical specs give identical workloads.
Workload generate_workload(const WorkloadSpec& spec);
/// The content of files[index].
Bytes materialize(const Workload& workload, std::size_t index);

std::string format_workload(const Workload& workload);
Workload parse_workload(const std::string& text);
void save_workload(const std::filesystem::path& path, const Workload& workload);
Workload load_workload(const std::filesystem::path& path);

// ------------------------------------------------------------- experiment

struct ExperimentConfig {
  enum class TransportKind { sim, sockets };

  TransportKind transport = TransportKind::sim;
  BindingMode mode = BindingMode::clb;
  CodingParams params{10, 5};
  std::size_t clusters = 20;
  std::uint64_t node_capacity = 64ull << 30;
  ChunkParams chunking;

  SimOptions sim;
  std::size_t window = 4;
  double decode_ms_per_byte = 0;
  /// Virtual (sim) or wall (sockets) milliseconds per trace hour.
  double hour_ms = 60'000;

  // Socket mode.
  std::string host = "127.0.0.1";
  std::uint16_t base_port = 47000;
  std::filesystem::path work_dir;
  std::filesystem::path node_binary;

  /// Users not listed get member 0 of cluster (user index mod clusters).
  std::map<std::string, Address> switching_nodes;

  /// Rejects inconsistent settings before any traffic.
  void validate() const;
  static ExperimentConfig from_config(const KeyValueConfig& cfg);

  Topology topology() const;
  Address switching_node(const std::string& user, std::size_t user_index, const Topology& topology) const;
};

/// Storage consumption gathered from every node.
struct StoreScan {
  std::uint64_t original_bytes = 0;     // sum of total_len over stored files
  std::size_t files = 0;
  std::uint64_t piece_bytes = 0;        // payloads found on the nodes
  std::size_t piece_count = 0;
  std::uint64_t accounted_bytes = 0;    // directory's running cluster totals
  std::uint64_t meta_index_bytes = 0;   // serialized chunk-meta tables
  std::uint64_t presence_bytes = 0;
  std::uint64_t piece_header_bytes = 0;

  std::uint64_t index_bytes() const { return meta_index_bytes + presence_bytes + piece_header_bytes; }
  std::uint64_t consumed_bytes() const { return piece_bytes + index_bytes(); }
};

StoreScan scan_store(const std::vector<const Node*>& nodes);
/// original / consumed. Throws Errc::invalid_argument when nothing is
/// stored.
double dedup_ratio(const StoreScan& scan);
/// The same ratio from the directory's incremental accounting instead of
/// the piece scan.
double dedup_ratio_incremental(const StoreScan& scan);

struct HourlyPoint {
  int hour = 0;
  std::size_t gets = 0;
  double avg_retrieval_ms = 0;
};

struct MetricsReport {
  std::string mode;
  CodingParams params;
  std::size_t clusters = 0;
  StoreScan scan;
  double dedup_ratio = 0;
  double dedup_ratio_incremental = 0;
  std::size_t gets = 0;
  double avg_retrieval_ms = 0;
  std::vector<HourlyPoint> hourly;
  std::uint64_t wire_bytes = 0;
  std::uint64_t upload_wire_bytes = 0;
  std::uint64_t upload_chunk_bytes = 0;
  std::size_t failures = 0;
  bool consistent = false;
  std::string consistency;

  static std::string csv_header();
  std::string csv_row() const;
  static std::string hourly_csv_header();
  std::string hourly_csv() const;
};

/// A running set of nodes plus the transports clients use to reach them.
class RunningCluster {
 public:
  virtual ~RunningCluster() = default;

  const Topology& topology() const { return topology_; }
  /// Transport for a user's client (created on first use).
  virtual Transport& client_transport(const std::string& user) = 0;
  /// The transport whose run() drives all client activity.
  virtual Transport& driver() = 0;
  /// Waits until background node work (garbage collection) has settled.
  virtual void quiesce() = 0;
  /// Scans every node's storage. Socket clusters are stopped first.
  virtual StoreScan scan(ConsistencyReport* consistency = nullptr) = 0;
  virtual TransportStats wire_stats() const = 0;
  /// Number of node endpoints (simulated or processes).
  virtual std::size_t node_count() const = 0;
  virtual void teardown() = 0;

 protected:
  Topology topology_;
};

class SimCluster final : public RunningCluster {
 public:
  explicit SimCluster(const ExperimentConfig& config);
  ~SimCluster() override;

  Transport& client_transport(const std::string& user) override;
  Transport& driver() override;
  void quiesce() override;
  StoreScan scan(ConsistencyReport* consistency) override;
  TransportStats wire_stats() const override { return net_.total_stats(); }
  std::size_t node_count() const override { return nodes_.size(); }
  void teardown() override;

  SimNetwork& network() { return net_; }
  std::vector<const Node*> nodes() const;
  Node& node(const Address& address);

 private:
  SimNetwork net_;
  std::vector<std::unique_ptr<SimTransport>> node_transports_;
  std::vector<std::unique_ptr<Node>> nodes_;
  std::map<std::string, std::unique_ptr<SimTransport>> clients_;
};

/// One `node` process per topology member, on consecutive ports.
class ProcessCluster final : public RunningCluster {
 public:
  explicit ProcessCluster(const ExperimentConfig& config);
  ~ProcessCluster() override;

  Transport& client_transport(const std::string& user) override;
  Transport& driver() override;
  void quiesce() override;
  StoreScan scan(ConsistencyReport* consistency) override;
  TransportStats wire_stats() const override;
  std::size_t node_count() const override { return processes_.size(); }
  void teardown() override;

  /// Sends a GetMeta probe to every node; true when all answer.
  bool probe_all(double timeout_ms);

 private:
  struct Process {
    Address address;
    std::filesystem::path dir;
    int pid = -1;
  };

  void stop_processes();

  ExperimentConfig config_;
  std::vector<Process> processes_;
  std::unique_ptr<class SocketTransport> transport_;
};

std::unique_ptr<RunningCluster> spawn_topology(const ExperimentConfig& config);

MetricsReport run_experiment(const ExperimentConfig& config, const Workload& workload);

struct SweepRow {
  std::uint8_t k = 0;
  MetricsReport report;
};

/// One run per k with n fixed at config.params.n and identical seeds.
std::vector<SweepRow> sweep_k(const ExperimentConfig& config, const Workload& workload,
                              const std::vector<std::uint8_t>& ks);
std::string sweep_csv(const std::vector<SweepRow>& rows);

}  // namespace ecstore
