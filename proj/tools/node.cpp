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

// Storage node daemon: `node --config <file>`. Runs until SIGTERM/SIGINT.

#include <csignal>
#include <iostream>

#include "CLI11.hpp"
#include "ecstore/node.hpp"
#include "ecstore/socket_transport.hpp"

int main(int argc, char** argv) {
  CLI::App app{"ecstore storage node"};
  std::string config_path;
  app.add_option("--config", config_path, "key=value config file")->required();
  CLI11_PARSE(app, argc, argv);

  // Block the stop signals before any thread starts so only sigwait sees
  // them.
  sigset_t stop_signals;
  sigemptyset(&stop_signals);
  sigaddset(&stop_signals, SIGTERM);
  sigaddset(&stop_signals, SIGINT);
  pthread_sigmask(SIG_BLOCK, &stop_signals, nullptr);
  std::signal(SIGPIPE, SIG_IGN);

  try {
    const std::filesystem::path cfg_file(config_path);
    const auto cfg = ecstore::KeyValueConfig::load(cfg_file);
    std::filesystem::path topo_file = cfg.get("topology");
    if (topo_file.is_relative()) topo_file = cfg_file.parent_path() / topo_file;
    const auto topology = ecstore::load_topology(topo_file);
    auto nc = ecstore::NodeConfig::from_config(cfg, topology);
    if (!nc.store_dir.empty() && nc.store_dir.is_relative()) nc.store_dir = cfg_file.parent_path() / nc.store_dir;

    ecstore::SocketTransport transport(nc.address);
    ecstore::Node node(nc, topology, transport);
    transport.listen(&node);
    std::cout << "node " << nc.address << " listening (cluster " << nc.cluster_id << ", position "
              << int(nc.position) << (node.directory() ? ", directory" : "") << ")" << std::endl;

    int sig = 0;
    sigwait(&stop_signals, &sig);
    transport.stop();
    std::cout << "node " << nc.address << " stopped" << std::endl;
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "node: " << e.what() << std::endl;
    return 1;
  }
}
