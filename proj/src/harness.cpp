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

#include "ecstore/harness.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "ecstore/socket_transport.hpp"

extern char** environ;

namespace fs = std::filesystem;

namespace ecstore {

namespace {

constexpr double kHourMs = 3'600'000.0;
constexpr std::size_t kSegment = 16 << 10;

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9E3779B97F4A7C15ull * (b + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

double unit(std::mt19937_64& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

void fill_random(std::mt19937_64& rng, std::uint8_t* out, std::size_t len) {
  while (len >= 8) {
    const std::uint64_t v = rng();
    std::memcpy(out, &v, 8);
    out += 8;
    len -= 8;
  }
  if (len > 0) {
    const std::uint64_t v = rng();
    std::memcpy(out, &v, len);
  }
}

// Relative request rate by hour of day: quiet overnight, peaking at 16:00.
double diurnal_weight(double hour_of_day) {
  if (hour_of_day < 8) return 0.25;
  return 1.0 + 0.5 * std::sin(std::numbers::pi * (hour_of_day - 8) / 16);
}

std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

void check_fraction(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0)) throw Error(Errc::config, std::string(name) + " must be in [0,1]");
}

}  // namespace

// ---------------------------------------------------------------- workload

void WorkloadSpec::validate() const {
  if (users == 0) throw Error(Errc::config, "users must be positive");
  if (files_per_user == 0) throw Error(Errc::config, "files_per_user must be positive");
  if (min_file == 0 || min_file > max_file) throw Error(Errc::config, "need 0 < min_file <= max_file");
  check_fraction(repeat_fraction, "repeat_fraction");
  check_fraction(shared_fraction, "shared_fraction");
  check_fraction(hot_fraction, "hot_fraction");
  if (!(hours > 0)) throw Error(Errc::config, "hours must be positive");
  if (removes > users * files_per_user) throw Error(Errc::config, "more removes than files");
}

WorkloadSpec WorkloadSpec::from_config(const KeyValueConfig& cfg) {
  WorkloadSpec s;
  s.users = cfg.get_u64("users", s.users);
  s.files_per_user = cfg.get_u64("files_per_user", s.files_per_user);
  s.min_file = cfg.get_u64("min_file", s.min_file);
  s.max_file = cfg.get_u64("max_file", s.max_file);
  s.repeat_fraction = cfg.get_double("repeat_fraction", s.repeat_fraction);
  s.shared_fraction = cfg.get_double("shared_fraction", s.shared_fraction);
  s.shared_documents = cfg.get_u64("shared_documents", s.shared_documents);
  s.gets = cfg.get_u64("gets", s.gets);
  s.hot_fraction = cfg.get_double("hot_fraction", s.hot_fraction);
  s.removes = cfg.get_u64("removes", s.removes);
  s.hours = cfg.get_double("hours", s.hours);
  s.seed = cfg.get_u64("seed", s.seed);
  s.validate();
  return s;
}

void WorkloadSpec::to_config(KeyValueConfig& cfg) const {
  cfg.set("users", std::to_string(users));
  cfg.set("files_per_user", std::to_string(files_per_user));
  cfg.set("min_file", std::to_string(min_file));
  cfg.set("max_file", std::to_string(max_file));
  cfg.set("repeat_fraction", fixed(repeat_fraction, 17));
  cfg.set("shared_fraction", fixed(shared_fraction, 17));
  cfg.set("shared_documents", std::to_string(shared_documents));
  cfg.set("gets", std::to_string(gets));
  cfg.set("hot_fraction", fixed(hot_fraction, 17));
  cfg.set("removes", std::to_string(removes));
  cfg.set("hours", fixed(hours, 17));
  cfg.set("seed", std::to_string(seed));
}

std::string_view trace_op_name(TraceEvent::Op op) {
  switch (op) {
    case TraceEvent::Op::put: return "put";
    case TraceEvent::Op::get: return "get";
    case TraceEvent::Op::rm: return "rm";
  }
  return "?";
}

std::vector<std::string> Workload::users() const {
  std::vector<std::string> out;
  for (const auto& f : files)
    if (std::find(out.begin(), out.end(), f.user) == out.end()) out.push_back(f.user);
  return out;
}

std::uint64_t Workload::total_bytes() const {
  std::uint64_t total = 0;
  for (const auto& f : files) total += f.size;
  return total;
}

Workload generate_workload(const WorkloadSpec& spec) {
  spec.validate();
  Workload w;
  w.spec = spec;
  std::mt19937_64 rng(mix(spec.seed, 1));
  const double lo = std::log(static_cast<double>(spec.min_file));
  const double hi = std::log(static_cast<double>(spec.max_file));
  auto file_size = [&] {
    const double v = std::exp(lo + unit(rng) * (hi - lo));
    return std::clamp<std::uint64_t>(static_cast<std::uint64_t>(v), spec.min_file, spec.max_file);
  };

  const auto shared_per_user = static_cast<std::size_t>(std::llround(spec.files_per_user * spec.shared_fraction));
  std::size_t docs = spec.shared_documents;
  if (docs == 0 && shared_per_user > 0) docs = 2 * shared_per_user;
  for (std::size_t d = 0; d < docs; ++d) w.documents.push_back({file_size(), rng()});

  std::vector<std::vector<std::uint32_t>> shared_of(spec.users), private_of(spec.users);
  for (std::size_t u = 0; u < spec.users; ++u) {
    const std::string user = "user" + std::to_string(u);
    std::vector<std::size_t> slots(spec.files_per_user);
    for (std::size_t i = 0; i < slots.size(); ++i) slots[i] = i;
    std::shuffle(slots.begin(), slots.end(), rng);
    std::vector<bool> is_shared(spec.files_per_user, false);
    for (std::size_t i = 0; i < std::min(shared_per_user, slots.size()) && docs > 0; ++i) is_shared[slots[i]] = true;
    std::vector<std::size_t> doc_order(docs);
    for (std::size_t d = 0; d < docs; ++d) doc_order[d] = d;
    std::shuffle(doc_order.begin(), doc_order.end(), rng);
    std::size_t next_doc = 0;
    for (std::size_t f = 0; f < spec.files_per_user; ++f) {
      FileSpec fs;
      fs.user = user;
      char name[32];
      std::snprintf(name, sizeof(name), "file%03zu", f);
      fs.name = name;
      if (is_shared[f]) {
        fs.document = static_cast<std::int64_t>(doc_order[next_doc++ % docs]);
        fs.size = w.documents[fs.document].size;
      } else {
        fs.size = file_size();
      }
      fs.seed = rng();
      const auto index = static_cast<std::uint32_t>(w.files.size());
      (is_shared[f] ? shared_of[u] : private_of[u]).push_back(index);
      w.files.push_back(std::move(fs));
    }
  }

  for (std::uint32_t i = 0; i < w.files.size(); ++i) w.trace.push_back({0, TraceEvent::Op::put, i});

  const double span = spec.hours * kHourMs;
  std::vector<TraceEvent> gets;
  for (std::size_t g = 0; g < spec.gets; ++g) {
    double t;
    do {
      t = unit(rng) * span;
    } while (unit(rng) * 1.5 > diurnal_weight(std::fmod(t / kHourMs, 24.0)));
    t = std::max(1.0, std::floor(t));
    const std::size_t u = rng() % spec.users;
    std::uint32_t target;
    if (!shared_of[u].empty() && (private_of[u].empty() || unit(rng) < spec.hot_fraction)) {
      // Zipf over the documents: a lower document id is more popular.
      double total = 0;
      for (auto idx : shared_of[u]) total += 1.0 / static_cast<double>(w.files[idx].document + 1);
      double pick = unit(rng) * total;
      target = shared_of[u].back();
      for (auto idx : shared_of[u]) {
        pick -= 1.0 / static_cast<double>(w.files[idx].document + 1);
        if (pick <= 0) {
          target = idx;
          break;
        }
      }
    } else {
      target = private_of[u][rng() % private_of[u].size()];
    }
    gets.push_back({t, TraceEvent::Op::get, target});
  }
  std::stable_sort(gets.begin(), gets.end(),
                   [](const TraceEvent& a, const TraceEvent& b) { return a.time_ms < b.time_ms; });
  w.trace.insert(w.trace.end(), gets.begin(), gets.end());

  std::vector<std::uint32_t> all(w.files.size());
  for (std::uint32_t i = 0; i < all.size(); ++i) all[i] = i;
  std::shuffle(all.begin(), all.end(), rng);
  for (std::size_t r = 0; r < spec.removes; ++r)
    w.trace.push_back({std::floor(span) + 1 + static_cast<double>(r), TraceEvent::Op::rm, all[r]});
  return w;
}

Bytes materialize(const Workload& workload, std::size_t index) {
  const FileSpec& f = workload.files.at(index);
  Bytes data(f.size);
  if (f.document >= 0) {
    const auto& doc = workload.documents.at(static_cast<std::size_t>(f.document));
    std::mt19937_64 rng(mix(doc.seed, 2));
    fill_random(rng, data.data(), data.size());
    // Each holder edits its copy a little.
    if (data.size() >= 8) {
      const std::size_t at = f.seed % (data.size() - 7);
      std::memcpy(data.data() + at, &f.seed, 8);
    }
    return data;
  }
  std::mt19937_64 rng(mix(f.seed, 3));
  const std::size_t segments = (data.size() + kSegment - 1) / kSegment;
  for (std::size_t s = 0; s < segments; ++s) {
    const std::size_t begin = s * kSegment;
    const std::size_t len = std::min(kSegment, data.size() - begin);
    if (s > 0 && unit(rng) < workload.spec.repeat_fraction) {
      const std::size_t from = (rng() % s) * kSegment;
      std::memcpy(data.data() + begin, data.data() + from, len);
    } else {
      fill_random(rng, data.data() + begin, len);
    }
  }
  return data;
}

std::string format_workload(const Workload& workload) {
  std::ostringstream out;
  out << "# ecstore workload\n";
  KeyValueConfig cfg;
  workload.spec.to_config(cfg);
  for (const auto& [k, v] : cfg.values()) out << "spec " << k << ' ' << v << '\n';
  for (const auto& d : workload.documents) out << "doc " << d.size << ' ' << d.seed << '\n';
  for (const auto& f : workload.files)
    out << "file " << f.user << ' ' << f.name << ' ' << f.size << ' ' << f.document << ' ' << f.seed << '\n';
  for (const auto& e : workload.trace)
    out << "event " << static_cast<std::uint64_t>(e.time_ms) << ' ' << trace_op_name(e.op) << ' ' << e.file << '\n';
  return out.str();
}

Workload parse_workload(const std::string& text) {
  Workload w;
  KeyValueConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  auto bad = [&](const std::string& why) {
    return Error(Errc::config, "workload line " + std::to_string(lineno) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream words(line);
    std::string kind;
    words >> kind;
    if (kind == "spec") {
      std::string key, value;
      if (!(words >> key >> value)) throw bad("spec needs a key and a value");
      cfg.set(key, value);
    } else if (kind == "doc") {
      DocumentSpec d;
      if (!(words >> d.size >> d.seed)) throw bad("malformed doc");
      w.documents.push_back(d);
    } else if (kind == "file") {
      FileSpec f;
      if (!(words >> f.user >> f.name >> f.size >> f.document >> f.seed)) throw bad("malformed file");
      if (f.document >= static_cast<std::int64_t>(w.documents.size())) throw bad("unknown document");
      w.files.push_back(std::move(f));
    } else if (kind == "event") {
      std::uint64_t t = 0;
      std::string op;
      TraceEvent e;
      if (!(words >> t >> op >> e.file)) throw bad("malformed event");
      e.time_ms = static_cast<double>(t);
      if (op == "put") e.op = TraceEvent::Op::put;
      else if (op == "get") e.op = TraceEvent::Op::get;
      else if (op == "rm") e.op = TraceEvent::Op::rm;
      else throw bad("unknown op " + op);
      if (e.file >= w.files.size()) throw bad("event names an unknown file");
      w.trace.push_back(e);
    } else {
      throw bad("unknown record " + kind);
    }
  }
  w.spec = WorkloadSpec::from_config(cfg);
  if (!std::is_sorted(w.trace.begin(), w.trace.end(),
                      [](const TraceEvent& a, const TraceEvent& b) { return a.time_ms < b.time_ms; }))
    throw Error(Errc::config, "workload trace is not sorted by time");
  return w;
}

void save_workload(const fs::path& path, const Workload& workload) {
  const std::string text = format_workload(workload);
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

Workload load_workload(const fs::path& path) {
  const Bytes data = read_file(path);
  return parse_workload(std::string(data.begin(), data.end()));
}

// ------------------------------------------------------------- experiment

void ExperimentConfig::validate() const {
  params.validate();
  chunking.validate();
  if (clusters == 0) throw Error(Errc::config, "clusters must be positive");
  if (clusters >= kUnplaced) throw Error(Errc::config, "too many clusters");
  if (node_capacity == 0) throw Error(Errc::config, "node_capacity must be positive");
  if (window == 0) throw Error(Errc::config, "window must be positive");
  if (!(hour_ms > 0)) throw Error(Errc::config, "hour_ms must be positive");
  const auto& l = sim.latency;
  if (l.base_delay_ms < 0 || l.per_byte_ms < 0 || l.jitter_ms < 0 || decode_ms_per_byte < 0)
    throw Error(Errc::config, "latency parameters must be non-negative");
  if (transport == TransportKind::sockets &&
      std::uint64_t{base_port} + clusters * params.n > 65536)
    throw Error(Errc::config, "port range exceeds 65535");
}

ExperimentConfig ExperimentConfig::from_config(const KeyValueConfig& cfg) {
  ExperimentConfig c;
  const std::string transport = cfg.get("transport", "sim");
  if (transport == "sim") c.transport = TransportKind::sim;
  else if (transport == "sockets") c.transport = TransportKind::sockets;
  else throw Error(Errc::config, "transport must be sim or sockets, not " + transport);
  c.mode = parse_binding_mode(cfg.get("mode", "clb"));
  const auto n = cfg.get_u64("n", c.params.n);
  const auto k = cfg.get_u64("k", c.params.k);
  if (n > 255 || k > 255) throw Error(Errc::config, "n and k must fit in a byte");
  c.params = {static_cast<std::uint8_t>(n), static_cast<std::uint8_t>(k)};
  c.clusters = cfg.get_u64("clusters", c.clusters);
  c.node_capacity = cfg.get_u64("node_capacity", c.node_capacity);
  c.chunking.min_size = cfg.get_u64("chunk_min", c.chunking.min_size);
  c.chunking.max_size = cfg.get_u64("chunk_max", c.chunking.max_size);
  c.chunking.boundary_mask_bits = static_cast<unsigned>(cfg.get_u64("chunk_mask_bits", c.chunking.boundary_mask_bits));
  c.chunking.window_size = cfg.get_u64("chunk_window", c.chunking.window_size);
  c.sim.latency.base_delay_ms = cfg.get_double("base_delay_ms", 0);
  c.sim.latency.per_byte_ms = cfg.get_double("per_byte_ms", 0);
  c.sim.latency.jitter_ms = cfg.get_double("jitter_ms", 0);
  c.sim.latency.seed = cfg.get_u64("latency_seed", c.sim.latency.seed);
  c.sim.contention = cfg.get_bool("contention", c.sim.contention);
  c.sim.model_handshake = cfg.get_bool("handshake", c.sim.model_handshake);
  c.window = cfg.get_u64("window", c.window);
  c.decode_ms_per_byte = cfg.get_double("decode_ms_per_byte", c.decode_ms_per_byte);
  c.hour_ms = cfg.get_double("hour_ms", c.hour_ms);
  c.host = cfg.get("host", c.host);
  const auto port = cfg.get_u64("base_port", c.base_port);
  if (port == 0 || port > 65535) throw Error(Errc::config, "base_port out of range");
  c.base_port = static_cast<std::uint16_t>(port);
  c.work_dir = cfg.get("work_dir", "");
  c.node_binary = cfg.get("node_binary", "");
  for (const auto& [key, value] : cfg.values())
    if (key.starts_with("switch.")) c.switching_nodes[key.substr(7)] = value;
  c.validate();
  return c;
}

Topology ExperimentConfig::topology() const {
  Topology t;
  t.params = params;
  for (std::size_t c = 0; c < clusters; ++c) {
    ClusterState cs;
    cs.cluster_id = static_cast<ClusterId>(c);
    for (std::size_t i = 0; i < params.n; ++i) {
      if (transport == TransportKind::sim) {
        cs.members.push_back("c" + std::to_string(c) + "n" + std::to_string(i));
      } else {
        cs.members.push_back(host + ":" + std::to_string(base_port + c * params.n + i));
      }
    }
    t.clusters.push_back(std::move(cs));
  }
  return t;
}

Address ExperimentConfig::switching_node(const std::string& user, std::size_t user_index,
                                         const Topology& topology) const {
  if (auto it = switching_nodes.find(user); it != switching_nodes.end()) {
    for (const auto& a : topology.all_nodes())
      if (a == it->second) return a;
    throw Error(Errc::config, "switching node " + it->second + " of " + user + " is not in the topology");
  }
  return topology.clusters[user_index % topology.clusters.size()].members[0];
}

StoreScan scan_store(const std::vector<const Node*>& nodes) {
  StoreScan s;
  std::set<std::pair<std::string, std::string>> seen;
  for (const Node* node : nodes) {
    s.piece_bytes += node->pieces().scan_used_bytes();
    const auto count = node->pieces().piece_count();
    s.piece_count += count;
    s.piece_header_bytes += count * kPieceHeaderSize;
    s.meta_index_bytes += node->meta_index_bytes();
    for (const auto& [user, table] : node->meta_tables()) {
      for (const auto& [name, meta] : table.files()) {
        if (!seen.emplace(user, name).second) continue;
        s.original_bytes += meta.total_len;
        ++s.files;
      }
    }
    if (const Directory* dir = node->directory()) {
      s.presence_bytes += dir->presence_index_bytes();
      for (const auto& c : dir->clusters()) s.accounted_bytes += c.used;
    }
  }
  return s;
}

double dedup_ratio(const StoreScan& scan) {
  if (scan.files == 0 || scan.consumed_bytes() == 0)
    throw Error(Errc::invalid_argument, "dedup ratio is undefined for an empty system");
  return static_cast<double>(scan.original_bytes) / static_cast<double>(scan.consumed_bytes());
}

double dedup_ratio_incremental(const StoreScan& scan) {
  const std::uint64_t consumed = scan.accounted_bytes + scan.index_bytes();
  if (scan.files == 0 || consumed == 0)
    throw Error(Errc::invalid_argument, "dedup ratio is undefined for an empty system");
  return static_cast<double>(scan.original_bytes) / static_cast<double>(consumed);
}

std::string MetricsReport::csv_header() {
  return "mode,n,k,clusters,files,original_bytes,consumed_bytes,piece_bytes,index_bytes,dedup_ratio,"
         "dedup_ratio_incremental,gets,avg_retrieval_ms,wire_bytes,upload_wire_bytes,upload_chunk_bytes,failures,"
         "consistent";
}

std::string MetricsReport::csv_row() const {
  std::ostringstream out;
  out << mode << ',' << int(params.n) << ',' << int(params.k) << ',' << clusters << ',' << scan.files << ','
      << scan.original_bytes << ',' << scan.consumed_bytes() << ',' << scan.piece_bytes << ',' << scan.index_bytes()
      << ',' << fixed(dedup_ratio) << ',' << fixed(dedup_ratio_incremental) << ',' << gets << ','
      << fixed(avg_retrieval_ms, 3) << ',' << wire_bytes << ',' << upload_wire_bytes << ',' << upload_chunk_bytes
      << ',' << failures << ',' << (consistent ? 1 : 0);
  return out.str();
}

std::string MetricsReport::hourly_csv_header() { return "hour,gets,avg_retrieval_ms"; }

std::string MetricsReport::hourly_csv() const {
  std::ostringstream out;
  out << hourly_csv_header() << '\n';
  for (const auto& h : hourly) out << h.hour << ',' << h.gets << ',' << fixed(h.avg_retrieval_ms, 3) << '\n';
  return out.str();
}

// ------------------------------------------------------------ sim cluster

SimCluster::SimCluster(const ExperimentConfig& config) : net_(config.sim) {
  config.validate();
  topology_ = config.topology();
  topology_.validate();
  for (const auto& c : topology_.clusters) {
    for (std::size_t i = 0; i < c.members.size(); ++i) {
      NodeConfig nc;
      nc.address = c.members[i];
      nc.cluster_id = c.cluster_id;
      nc.position = static_cast<std::uint8_t>(i);
      nc.params = topology_.params;
      nc.mode = config.mode;
      nc.capacity = config.node_capacity;
      node_transports_.push_back(net_.make_transport(nc.address));
      nodes_.push_back(std::make_unique<Node>(nc, topology_, *node_transports_.back()));
      net_.attach(nc.address, nodes_.back().get());
    }
  }
}

SimCluster::~SimCluster() { teardown(); }

Transport& SimCluster::client_transport(const std::string& user) {
  auto& t = clients_["client/" + user];
  if (!t) t = net_.make_transport("client/" + user);
  return *t;
}

Transport& SimCluster::driver() { return client_transport("harness"); }

void SimCluster::quiesce() { net_.run(); }

StoreScan SimCluster::scan(ConsistencyReport* consistency) {
  const auto all = nodes();
  if (consistency != nullptr) *consistency = check_consistency(all);
  return scan_store(all);
}

std::vector<const Node*> SimCluster::nodes() const {
  std::vector<const Node*> out;
  for (const auto& n : nodes_) out.push_back(n.get());
  return out;
}

Node& SimCluster::node(const Address& address) {
  for (auto& n : nodes_)
    if (n->config().address == address) return *n;
  throw Error(Errc::not_found, "no node " + address);
}

void SimCluster::teardown() {
  clients_.clear();
  nodes_.clear();
  node_transports_.clear();
}

// -------------------------------------------------------- process cluster

namespace {

fs::path find_node_binary(const ExperimentConfig& config) {
  if (!config.node_binary.empty()) return config.node_binary;
  if (const char* env = std::getenv("ECSTORE_NODE_BIN")) return env;
  std::error_code ec;
  const fs::path self = fs::read_symlink("/proc/self/exe", ec);
  if (!ec) {
    for (const auto& candidate : {self.parent_path() / "node", self.parent_path().parent_path() / "tools" / "node"})
      if (fs::exists(candidate)) return candidate;
  }
  throw Error(Errc::config, "cannot find the node binary; set node_binary or ECSTORE_NODE_BIN");
}

std::string tail_of(const fs::path& path) {
  std::error_code ec;
  if (!fs::exists(path, ec)) return "";
  Bytes data = read_file(path);
  std::string text(data.begin(), data.end());
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
  if (text.size() > 400) text = text.substr(text.size() - 400);
  return text;
}

// Binding the address briefly catches conflicts before a daemon starts and
// before a probe could be answered by whoever holds the port.
void check_port_free(const Address& address) {
  auto [host, port] = split_address(address);
  sockaddr_in sa{};
  sa.sin_family = AF_INET;
  sa.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &sa.sin_addr) != 1) return;  // leave other forms to the node
  const int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd < 0) return;
  int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  const bool ok = ::bind(fd, reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) == 0;
  const int err = errno;
  ::close(fd);
  if (!ok) throw Error(Errc::io, "node " + address + ": cannot listen: " + std::strerror(err));
}

bool probe(Transport& transport, const Address& node) {
  try {
    run_sync<bool>(transport, [&](auto done) {
      transport.request(node, wire::GetMeta{"_probe", "_probe"},
                        [done](Result<wire::Message> r) mutable {
                          if (r.ok()) done(true);
                          else done(r.error());
                        });
    });
    return true;
  } catch (const Error&) {
    return false;
  }
}

}  // namespace

ProcessCluster::ProcessCluster(const ExperimentConfig& config) : config_(config) {
  config_.validate();
  topology_ = config_.topology();
  topology_.validate();
  if (config_.work_dir.empty()) {
    static std::atomic<int> counter{0};
    config_.work_dir = fs::temp_directory_path() /
                       ("ecstore-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  }
  for (const auto& a : topology_.all_nodes()) check_port_free(a);
  fs::create_directories(config_.work_dir);
  const fs::path binary = find_node_binary(config_);
  const fs::path topo_path = config_.work_dir / "topology.txt";
  const std::string topo_text = format_topology(topology_);
  write_file_atomic(topo_path, std::span(reinterpret_cast<const std::uint8_t*>(topo_text.data()), topo_text.size()));

  for (const auto& c : topology_.clusters) {
    for (std::size_t i = 0; i < c.members.size(); ++i) {
      Process p;
      p.address = c.members[i];
      p.dir = config_.work_dir / ("node-" + std::to_string(c.cluster_id) + "-" + std::to_string(i));
      fs::create_directories(p.dir);
      KeyValueConfig nc;
      nc.set("listen", p.address);
      nc.set("topology", topo_path.string());
      nc.set("mode", std::string(binding_mode_name(config_.mode)));
      nc.set("capacity", std::to_string(config_.node_capacity));
      nc.set("store_dir", (p.dir / "store").string());
      const std::string text = nc.format();
      const fs::path conf = p.dir / "node.conf";
      write_file_atomic(conf, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));

      posix_spawn_file_actions_t actions;
      posix_spawn_file_actions_init(&actions);
      const std::string log = (p.dir / "node.log").string();
      posix_spawn_file_actions_addopen(&actions, 1, log.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
      posix_spawn_file_actions_adddup2(&actions, 1, 2);
      std::string arg0 = binary.string(), arg1 = "--config", arg2 = conf.string();
      char* argv[] = {arg0.data(), arg1.data(), arg2.data(), nullptr};
      pid_t pid = -1;
      const int rc = ::posix_spawn(&pid, arg0.c_str(), &actions, nullptr, argv, environ);
      posix_spawn_file_actions_destroy(&actions);
      if (rc != 0) {
        stop_processes();
        throw Error(Errc::io, "node " + p.address + ": spawn failed: " + std::strerror(rc));
      }
      p.pid = pid;
      processes_.push_back(std::move(p));
    }
  }

  transport_ = std::make_unique<SocketTransport>(config_.host + ":0", SocketOptions{2000, 60000});
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(20);
  for (auto& p : processes_) {
    while (!probe(*transport_, p.address)) {
      int status = 0;
      if (::waitpid(p.pid, &status, WNOHANG) == p.pid) {
        p.pid = -1;
        const std::string log = tail_of(p.dir / "node.log");
        stop_processes();
        throw Error(Errc::io, "node " + p.address + " failed to start" + (log.empty() ? "" : ": " + log));
      }
      if (std::chrono::steady_clock::now() > deadline) {
        stop_processes();
        throw Error(Errc::io, "node " + p.address + " did not answer within 20 s");
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
  }
}

ProcessCluster::~ProcessCluster() { teardown(); }

Transport& ProcessCluster::client_transport(const std::string&) { return *transport_; }

Transport& ProcessCluster::driver() { return *transport_; }

bool ProcessCluster::probe_all(double timeout_ms) {
  const auto deadline = std::chrono::steady_clock::now() +
                        std::chrono::milliseconds(static_cast<std::int64_t>(timeout_ms));
  for (const auto& p : processes_) {
    while (!probe(*transport_, p.address)) {
      if (std::chrono::steady_clock::now() > deadline) return false;
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
  }
  return true;
}

void ProcessCluster::quiesce() {
  if (!transport_) return;
  // Directory operations are serialized and garbage collection holds the
  // queue, so a no-op directory request returns once collection is done.
  try {
    run_sync<bool>(*transport_, [&](auto done) {
      transport_->request(topology_.directory(), wire::ChunkStored{ChunkRef{ChunkId{}, 0}, 0},
                          [done](Result<wire::Message>) mutable { done(true); });
    });
  } catch (const Error&) {
  }
}

TransportStats ProcessCluster::wire_stats() const {
  return transport_ ? transport_->stats() : TransportStats{};
}

StoreScan ProcessCluster::scan(ConsistencyReport* consistency) {
  quiesce();
  stop_processes();
  // Reopen each node's state offline.
  SimNetwork offline;
  std::vector<std::unique_ptr<SimTransport>> transports;
  std::vector<std::unique_ptr<Node>> nodes;
  for (const auto& c : topology_.clusters) {
    for (std::size_t i = 0; i < c.members.size(); ++i) {
      NodeConfig nc;
      nc.address = c.members[i];
      nc.cluster_id = c.cluster_id;
      nc.position = static_cast<std::uint8_t>(i);
      nc.params = topology_.params;
      nc.mode = config_.mode;
      nc.capacity = config_.node_capacity;
      nc.store_dir = config_.work_dir / ("node-" + std::to_string(c.cluster_id) + "-" + std::to_string(i)) / "store";
      transports.push_back(offline.make_transport(nc.address));
      nodes.push_back(std::make_unique<Node>(nc, topology_, *transports.back()));
    }
  }
  std::vector<const Node*> all;
  for (const auto& n : nodes) all.push_back(n.get());
  if (consistency != nullptr) *consistency = check_consistency(all);
  return scan_store(all);
}

void ProcessCluster::stop_processes() {
  for (auto& p : processes_)
    if (p.pid > 0) ::kill(p.pid, SIGTERM);
  for (auto& p : processes_) {
    if (p.pid <= 0) continue;
    int status = 0;
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(5);
    while (::waitpid(p.pid, &status, WNOHANG) == 0) {
      if (std::chrono::steady_clock::now() > deadline) {
        ::kill(p.pid, SIGKILL);
        ::waitpid(p.pid, &status, 0);
        break;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    p.pid = -1;
  }
}

void ProcessCluster::teardown() {
  if (transport_) transport_->stop();
  stop_processes();
}

std::unique_ptr<RunningCluster> spawn_topology(const ExperimentConfig& config) {
  if (config.transport == ExperimentConfig::TransportKind::sim) return std::make_unique<SimCluster>(config);
  return std::make_unique<ProcessCluster>(config);
}

// ------------------------------------------------------------------ replay

MetricsReport run_experiment(const ExperimentConfig& config, const Workload& workload) {
  config.validate();
  workload.spec.validate();
  const auto users = workload.users();
  {
    const Topology topology = config.topology();
    for (std::size_t i = 0; i < users.size(); ++i) config.switching_node(users[i], i, topology);
  }

  auto cluster = spawn_topology(config);
  const Topology& topology = cluster->topology();
  std::map<std::string, std::unique_ptr<Client>> clients;
  for (std::size_t i = 0; i < users.size(); ++i) {
    ClientOptions opts;
    opts.user = users[i];
    opts.switching_node = config.switching_node(users[i], i, topology);
    opts.chunking = config.chunking;
    opts.window = config.window;
    opts.decode_ms_per_byte = config.decode_ms_per_byte;
    // Every retrieval is cold: chunks come from the nodes and the chunk
    // list from the switching node.
    opts.prefer_local_meta = false;
    clients[users[i]] = std::make_unique<Client>(cluster->client_transport(users[i]), topology, opts,
                                                 std::make_shared<LocalCache>(0));
  }

  MetricsReport report;
  report.mode = std::string(binding_mode_name(config.mode));
  report.params = config.params;
  report.clusters = config.clusters;
  Transport& driver = cluster->driver();

  std::size_t i_first_timed = 0;
  while (i_first_timed < workload.trace.size() && workload.trace[i_first_timed].time_ms == 0 &&
         workload.trace[i_first_timed].op == TraceEvent::Op::put)
    ++i_first_timed;

  // Initial load: each user's puts in order, users concurrently.
  std::map<std::string, std::vector<std::uint32_t>> loads;
  for (std::size_t i = 0; i < i_first_timed; ++i) {
    const auto f = workload.trace[i].file;
    loads[workload.files[f].user].push_back(f);
  }
  std::size_t running = 0;
  std::function<void(const std::string&, std::size_t)> put_next = [&](const std::string& user, std::size_t pos) {
    const auto& queue = loads[user];
    if (pos == queue.size()) {
      --running;
      return;
    }
    const auto& f = workload.files[queue[pos]];
    clients[user]->upload_async(f.name, materialize(workload, queue[pos]), [&, user, pos](Result<UploadReport> r) {
      if (r.ok()) {
        report.upload_wire_bytes += r.value().bytes_sent;
        report.upload_chunk_bytes += r.value().chunk_bytes_sent;
      } else {
        ++report.failures;
      }
      put_next(user, pos + 1);
    });
  };
  driver.run(
      [&] {
        running = loads.size();
        for (const auto& [user, q] : loads) put_next(user, 0);
      },
      [&] { return running == 0; });

  // Timed events at their trace times, scaled to the run clock.
  std::map<int, std::pair<std::size_t, double>> hours;
  double retrieval_total = 0;
  std::size_t outstanding = 0;
  auto start_event = [&](const TraceEvent& e) {
    const auto& f = workload.files[e.file];
    Client& client = *clients[f.user];
    switch (e.op) {
      case TraceEvent::Op::put:
        client.upload_async(f.name, materialize(workload, e.file), [&](Result<UploadReport> r) {
          if (r.ok()) {
            report.upload_wire_bytes += r.value().bytes_sent;
            report.upload_chunk_bytes += r.value().chunk_bytes_sent;
          } else {
            ++report.failures;
          }
          --outstanding;
        });
        break;
      case TraceEvent::Op::get:
        client.retrieve_async(f.name, [&, e](Result<RetrieveReport> r) {
          --outstanding;
          if (!r.ok() || r.value().data != materialize(workload, e.file)) {
            ++report.failures;
            return;
          }
          const double ms = r.value().duration_ms;
          retrieval_total += ms;
          ++report.gets;
          auto& h = hours[static_cast<int>(e.time_ms / kHourMs)];
          ++h.first;
          h.second += ms;
        });
        break;
      case TraceEvent::Op::rm:
        client.remove_async(f.name, [&](Result<bool> r) {
          if (!r.ok()) ++report.failures;
          --outstanding;
        });
        break;
    }
  };
  if (i_first_timed < workload.trace.size()) {
    driver.run(
        [&] {
          const double scale = config.hour_ms / kHourMs;
          for (std::size_t i = i_first_timed; i < workload.trace.size(); ++i) {
            ++outstanding;
            const TraceEvent e = workload.trace[i];
            driver.after(e.time_ms * scale, [&, e] { start_event(e); });
          }
        },
        [&] { return outstanding == 0; });
  }

  cluster->quiesce();
  report.wire_bytes = cluster->wire_stats().bytes_sent;
  ConsistencyReport consistency;
  report.scan = cluster->scan(&consistency);
  report.consistent = consistency.ok();
  report.consistency = consistency.summary();
  cluster->teardown();

  if (report.scan.files > 0) {
    report.dedup_ratio = dedup_ratio(report.scan);
    report.dedup_ratio_incremental = dedup_ratio_incremental(report.scan);
  }
  report.avg_retrieval_ms = report.gets > 0 ? retrieval_total / static_cast<double>(report.gets) : 0;
  for (const auto& [hour, v] : hours)
    report.hourly.push_back({hour, v.first, v.second / static_cast<double>(v.first)});
  return report;
}

std::vector<SweepRow> sweep_k(const ExperimentConfig& config, const Workload& workload,
                              const std::vector<std::uint8_t>& ks) {
  for (auto k : ks)
    if (k == 0 || k > config.params.n)
      throw Error(Errc::config, "k = " + std::to_string(k) + " is outside [1, n = " + std::to_string(config.params.n) + "]");
  std::vector<SweepRow> rows;
  for (auto k : ks) {
    ExperimentConfig c = config;
    c.params.k = k;
    rows.push_back({k, run_experiment(c, workload)});
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "k,n,dedup_ratio,avg_retrieval_ms,original_bytes,consumed_bytes,piece_bytes,index_bytes,gets,failures\n";
  for (const auto& r : rows) {
    const auto& m = r.report;
    out << int(r.k) << ',' << int(m.params.n) << ',' << fixed(m.dedup_ratio) << ',' << fixed(m.avg_retrieval_ms, 3)
        << ',' << m.scan.original_bytes << ',' << m.scan.consumed_bytes() << ',' << m.scan.piece_bytes << ','
        << m.scan.index_bytes() << ',' << m.gets << ',' << m.failures << '\n';
  }
  return out.str();
}

}  // namespace ecstore
