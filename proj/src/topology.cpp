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

#include "ecstore/topology.hpp"

#include <algorithm>
#include <charconv>
#include <set>
#include <sstream>

#include "ecstore/metadata.hpp"

namespace ecstore {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::uint64_t to_u64(const std::string& text, const std::string& what) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || p != text.data() + text.size())
    throw Error(Errc::config, "expected an unsigned integer for " + what + ", got '" + text + "'");
  return v;
}

}  // namespace

const ClusterState& Topology::cluster(ClusterId id) const {
  for (const auto& c : clusters)
    if (c.cluster_id == id) return c;
  throw Error(Errc::not_found, "unknown cluster " + std::to_string(id));
}

const Address& Topology::directory() const {
  if (clusters.empty() || clusters.front().members.empty()) throw Error(Errc::config, "empty topology");
  return clusters.front().members.front();
}

const Address& Topology::coding_node(const ChunkId& chunk, ClusterId id) const {
  const auto& c = cluster(id);
  return c.members[chunk.digest[0] % c.members.size()];
}

std::vector<Address> Topology::all_nodes() const {
  std::vector<Address> out;
  for (const auto& c : clusters) out.insert(out.end(), c.members.begin(), c.members.end());
  return out;
}

void Topology::validate() const {
  params.validate();
  if (clusters.empty()) throw Error(Errc::config, "topology has no clusters");
  std::set<Address> seen;
  std::set<ClusterId> ids;
  for (const auto& c : clusters) {
    if (c.cluster_id == kUnplaced) throw Error(Errc::config, "cluster id 65535 is reserved");
    if (!ids.insert(c.cluster_id).second) throw Error(Errc::config, "duplicate cluster id " + std::to_string(c.cluster_id));
    if (c.members.size() != params.n)
      throw Error(Errc::config, "cluster " + std::to_string(c.cluster_id) + " has " + std::to_string(c.members.size()) +
                                    " members, n = " + std::to_string(params.n));
    for (const auto& m : c.members)
      if (!seen.insert(m).second) throw Error(Errc::config, "duplicate node address " + m);
  }
}

Topology parse_topology(const std::string& text) {
  Topology t;
  bool have_coding = false;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream words(line);
    std::string kind;
    if (!(words >> kind)) continue;
    if (kind == "coding") {
      std::string n, k;
      words >> n >> k;
      auto nv = to_u64(n, "n");
      auto kv = to_u64(k, "k");
      if (nv > 255 || kv > nv || kv == 0) throw Error(Errc::config, "line " + std::to_string(lineno) + ": bad coding params");
      t.params = {static_cast<std::uint8_t>(nv), static_cast<std::uint8_t>(kv)};
      have_coding = true;
    } else if (kind == "cluster") {
      std::string id;
      words >> id;
      ClusterState c;
      auto idv = to_u64(id, "cluster id");
      if (idv >= kUnplaced) throw Error(Errc::config, "cluster id out of range");
      c.cluster_id = static_cast<ClusterId>(idv);
      std::string addr;
      while (words >> addr) c.members.push_back(addr);
      t.clusters.push_back(std::move(c));
    } else {
      throw Error(Errc::config, "line " + std::to_string(lineno) + ": unknown directive '" + kind + "'");
    }
  }
  if (!have_coding) throw Error(Errc::config, "topology lacks a 'coding <n> <k>' line");
  t.validate();
  return t;
}

Topology load_topology(const std::filesystem::path& path) {
  auto data = read_file(path);
  return parse_topology(std::string(data.begin(), data.end()));
}

std::string format_topology(const Topology& topology) {
  std::ostringstream out;
  out << "coding " << int(topology.params.n) << ' ' << int(topology.params.k) << '\n';
  for (const auto& c : topology.clusters) {
    out << "cluster " << c.cluster_id;
    for (const auto& m : c.members) out << ' ' << m;
    out << '\n';
  }
  return out.str();
}

KeyValueConfig KeyValueConfig::parse(const std::string& text) {
  KeyValueConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(Errc::config, "line " + std::to_string(lineno) + ": expected key=value");
    cfg.values_[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  auto data = read_file(path);
  return parse(std::string(data.begin(), data.end()));
}

std::string KeyValueConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw Error(Errc::config, "missing config key '" + key + "'");
  return it->second;
}

std::string KeyValueConfig::get(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

std::uint64_t KeyValueConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : to_u64(it->second, key);
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    std::size_t used = 0;
    double v = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument(key);
    return v;
  } catch (const std::exception&) {
    throw Error(Errc::config, "expected a number for " + key + ", got '" + it->second + "'");
  }
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const auto& v = it->second;
  if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "off" || v == "no") return false;
  throw Error(Errc::config, "expected a boolean for " + key + ", got '" + v + "'");
}

std::string KeyValueConfig::format() const {
  std::ostringstream out;
  for (const auto& [k, v] : values_) out << k << '=' << v << '\n';
  return out.str();
}

}  // namespace ecstore
