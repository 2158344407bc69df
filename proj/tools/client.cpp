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

// End-device client: put, get, rm and sync against a running topology.
// Exit status: 0 success, 1 file not found, 2 any other failure.

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "ecstore/client.hpp"
#include "ecstore/metadata.hpp"
#include "ecstore/socket_transport.hpp"

namespace fs = std::filesystem;

namespace {

int exit_code(const ecstore::Error& e) { return e.code() == ecstore::Errc::not_found ? 1 : 2; }

fs::path default_cache_dir(const std::string& user) {
  const char* home = std::getenv("HOME");
  return fs::path(home != nullptr ? home : ".") / ".ecstore" / user;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ecstore client"};
  app.require_subcommand(1);
  std::string user, switch_addr, cache_dir, topology_path;
  std::size_t window = 4;
  app.add_option("--user", user, "user id")->required();
  app.add_option("--switch", switch_addr, "switching node host:port")->required();
  app.add_option("--cache-dir", cache_dir, "local chunk and metadata cache (default ~/.ecstore/<user>)");
  app.add_option("--topology", topology_path, "topology file")->envname("ECSTORE_TOPOLOGY")->required();
  app.add_option("--window", window, "chunks transferred concurrently")->check(CLI::PositiveNumber);

  std::string put_path, put_name;
  auto* put = app.add_subcommand("put", "upload a file");
  put->add_option("path", put_path)->required();
  put->add_option("--name", put_name, "stored name (default: the file name)");

  std::string get_name, get_out;
  auto* get = app.add_subcommand("get", "download a file");
  get->add_option("name", get_name)->required();
  get->add_option("-o,--output", get_out, "output path (default: stdout)");

  std::string rm_name;
  auto* rm = app.add_subcommand("rm", "delete a file");
  rm->add_option("name", rm_name)->required();

  auto* sync = app.add_subcommand("sync", "reconcile local metadata with the switching node");

  CLI11_PARSE(app, argc, argv);
  std::signal(SIGPIPE, SIG_IGN);

  try {
    const auto topology = ecstore::load_topology(topology_path);
    ecstore::ClientOptions opts;
    opts.user = user;
    opts.switching_node = switch_addr;
    opts.window = window;
    auto cache = std::make_shared<ecstore::LocalCache>(256ull << 20,
                                                       cache_dir.empty() ? default_cache_dir(user) : fs::path(cache_dir));
    ecstore::SocketTransport transport("client:0");
    ecstore::Client client(transport, topology, opts, cache);

    if (*put) {
      const std::string name = put_name.empty() ? fs::path(put_path).filename().string() : put_name;
      auto report = client.upload(name, ecstore::read_file(put_path));
      std::cout << "stored " << name << ": " << report.chunks_total << " chunks, " << report.chunks_missing
                << " new, " << report.chunk_bytes_sent << " chunk bytes sent\n";
    } else if (*get) {
      auto report = client.retrieve(get_name);
      if (get_out.empty()) {
        std::cout.write(reinterpret_cast<const char*>(report.data.data()),
                        static_cast<std::streamsize>(report.data.size()));
      } else {
        ecstore::write_file_atomic(get_out, report.data);
        std::cerr << "retrieved " << get_name << ": " << report.data.size() << " bytes, " << report.chunks_fetched
                  << " chunks fetched, " << report.chunks_cached << " from cache\n";
      }
    } else if (*rm) {
      client.remove(rm_name);
      std::cout << "removed " << rm_name << "\n";
    } else if (*sync) {
      using R = ecstore::SyncReport::Resolution;
      auto report = client.sync();
      std::cout << "sync: " << report.count(R::pulled) << " pulled, " << report.count(R::pushed) << " pushed, "
                << report.count(R::unchanged) << " unchanged, " << report.count(R::failed) << " failed\n";
      if (report.count(R::failed) > 0) return 2;
    }
    transport.stop();
    return 0;
  } catch (const ecstore::Error& e) {
    std::cerr << "client: " << e.what() << std::endl;
    return exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "client: " << e.what() << std::endl;
    return 2;
  }
}
