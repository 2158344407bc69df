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

// Cluster topology and the flat key=value config files used by every tool.
//
// Topology file:
//
//   # comment
//   coding <n> <k>
//   cluster <id> <addr_0> ... <addr_{n-1}>
//
// The placement directory lives on member 0 of the first cluster listed.

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ecstore/binding.hpp"
#include "ecstore/erasure.hpp"

namespace ecstore {

struct Topology {
  CodingParams params;
  std::vector<ClusterState> clusters;

  const ClusterState& cluster(ClusterId id) const;
  const Address& directory() const;
  /// Coding node for a chunk: member (first digest byte mod n).
  const Address& coding_node(const ChunkId& chunk, ClusterId cluster) const;
  std::vector<Address> all_nodes() const;

  /// Throws Errc::config on duplicate addresses, wrong member counts or
  /// duplicate cluster ids.
  void validate() const;
};

Topology parse_topology(const std::string& text);
Topology load_topology(const std::filesystem::path& path);
std::string format_topology(const Topology& topology);

/// Flat key=value file; '#' starts a comment; later keys override.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(const std::string& text);
  static KeyValueConfig load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.contains(key); }
  std::string get(const std::string& key) const;
  std::string get(const std::string& key, const std::string& fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  const std::map<std::string, std::string>& values() const { return values_; }
  std::string format() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace ecstore
