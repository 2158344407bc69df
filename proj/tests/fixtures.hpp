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

// A simulated deployment built by hand, for tests that need to reach into
// individual nodes.

#pragma once

#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "ecstore/client.hpp"
#include "ecstore/node.hpp"
#include "ecstore/sim_network.hpp"

namespace fixture {

using namespace ecstore;

struct GridOptions {
  std::size_t clusters = 2;
  CodingParams params{4, 2};
  BindingMode mode = BindingMode::clb;
  std::uint64_t node_capacity = 1ull << 30;
  SimOptions sim;
  /// Non-empty gives every node a store directory below it.
  std::filesystem::path store_root;
};

class Grid {
 public:
  explicit Grid(GridOptions options) : options_(std::move(options)), net_(options_.sim) {
    topology_.params = options_.params;
    for (std::size_t c = 0; c < options_.clusters; ++c) {
      ClusterState cs;
      cs.cluster_id = static_cast<ClusterId>(c);
      for (std::size_t i = 0; i < options_.params.n; ++i)
        cs.members.push_back("c" + std::to_string(c) + "n" + std::to_string(i));
      topology_.clusters.push_back(std::move(cs));
    }
    for (const auto& c : topology_.clusters)
      for (std::size_t i = 0; i < c.members.size(); ++i) {
        NodeConfig nc;
        nc.address = c.members[i];
        nc.cluster_id = c.cluster_id;
        nc.position = static_cast<std::uint8_t>(i);
        nc.params = options_.params;
        nc.mode = options_.mode;
        nc.capacity = options_.node_capacity;
        if (!options_.store_root.empty()) nc.store_dir = options_.store_root / nc.address;
        configs_.push_back(nc);
        transports_.push_back(net_.make_transport(nc.address));
        nodes_.push_back(std::make_unique<Node>(nc, topology_, *transports_.back()));
        net_.attach(nc.address, nodes_.back().get());
      }
  }

  /// Rebuilds every node from its store directory.
  void restart() {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      nodes_[i].reset();
      nodes_[i] = std::make_unique<Node>(configs_[i], topology_, *transports_[i]);
      net_.attach(configs_[i].address, nodes_[i].get());
    }
  }

  Client make_client(const std::string& user, std::size_t switch_index = 0, std::size_t window = 4,
                     std::shared_ptr<LocalCache> cache = nullptr) {
    ClientOptions co;
    co.user = user;
    co.switching_node = topology_.all_nodes().at(switch_index);
    co.window = window;
    auto& t = clients_.emplace_back(net_.make_transport("client/" + user + "/" + std::to_string(clients_.size())));
    return Client(*t, topology_, co, std::move(cache));
  }

  Transport& raw_transport(const std::string& name) {
    return *clients_.emplace_back(net_.make_transport(name));
  }

  std::vector<const Node*> nodes() const {
    std::vector<const Node*> out;
    for (const auto& n : nodes_) out.push_back(n.get());
    return out;
  }
  Node& node(std::size_t i) { return *nodes_.at(i); }
  Node& directory_node() { return *nodes_.front(); }
  const Topology& topology() const { return topology_; }
  SimNetwork& net() { return net_; }

  std::uint64_t piece_bytes() const {
    std::uint64_t total = 0;
    for (const auto& n : nodes_) total += n->pieces().used_bytes();
    return total;
  }
  std::size_t piece_count() const {
    std::size_t total = 0;
    for (const auto& n : nodes_) total += n->pieces().piece_count();
    return total;
  }

 private:
  GridOptions options_;
  SimNetwork net_;
  Topology topology_;
  std::vector<NodeConfig> configs_;
  std::vector<std::unique_ptr<SimTransport>> transports_;
  std::vector<std::unique_ptr<Node>> nodes_;
  std::vector<std::unique_ptr<SimTransport>> clients_;
};

/// A fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("ecstore-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace fixture
