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

// Experiment driver.
//
//   harness run --config <file> [--out report.csv] [--hourly hourly.csv]
//   harness sweep-k --config <file> --k 2,5,8,10 [--out sweep.csv]
//   harness gen-workload --seed S --out <file> [--config <file>]

#include <csignal>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "ecstore/harness.hpp"

namespace {

ecstore::Workload workload_for(const ecstore::KeyValueConfig& cfg, const std::filesystem::path& cfg_file) {
  if (cfg.has("workload")) {
    std::filesystem::path p = cfg.get("workload");
    if (p.is_relative()) p = cfg_file.parent_path() / p;
    return ecstore::load_workload(p);
  }
  return ecstore::generate_workload(ecstore::WorkloadSpec::from_config(cfg));
}

void emit(const std::string& text, const std::string& path) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw ecstore::Error(ecstore::Errc::io, "cannot write " + path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ecstore experiment harness"};
  app.require_subcommand(1);

  std::string run_config, run_out, run_hourly;
  auto* run = app.add_subcommand("run", "replay a workload and report metrics");
  run->add_option("--config", run_config)->required();
  run->add_option("--out", run_out, "summary CSV (default: stdout)");
  run->add_option("--hourly", run_hourly, "per-hour retrieval CSV");

  std::string sweep_config, sweep_out;
  std::vector<unsigned> ks{2, 5, 8, 10};
  auto* sweep = app.add_subcommand("sweep-k", "one run per k with n fixed");
  sweep->add_option("--config", sweep_config)->required();
  sweep->add_option("--k", ks, "comma-separated k values")->delimiter(',');
  sweep->add_option("--out", sweep_out, "CSV output (default: stdout)");

  std::uint64_t seed = 1;
  std::string gen_out, gen_config;
  auto* gen = app.add_subcommand("gen-workload", "write a synthetic workload file");
  gen->add_option("--seed", seed)->required();
  gen->add_option("--out", gen_out)->required();
  gen->add_option("--config", gen_config, "workload keys (users, files_per_user, ...)");

  CLI11_PARSE(app, argc, argv);
  std::signal(SIGPIPE, SIG_IGN);

  try {
    if (*run) {
      const auto cfg = ecstore::KeyValueConfig::load(run_config);
      const auto config = ecstore::ExperimentConfig::from_config(cfg);
      const auto report = ecstore::run_experiment(config, workload_for(cfg, run_config));
      emit(ecstore::MetricsReport::csv_header() + "\n" + report.csv_row() + "\n", run_out);
      if (!run_hourly.empty()) emit(report.hourly_csv(), run_hourly);
      if (!report.consistent) std::cerr << "harness: consistency check failed: " << report.consistency << "\n";
      return report.consistent ? 0 : 1;
    }
    if (*sweep) {
      const auto cfg = ecstore::KeyValueConfig::load(sweep_config);
      const auto config = ecstore::ExperimentConfig::from_config(cfg);
      std::vector<std::uint8_t> k8;
      for (unsigned k : ks) {
        if (k == 0 || k > 255) throw ecstore::Error(ecstore::Errc::config, "bad k " + std::to_string(k));
        k8.push_back(static_cast<std::uint8_t>(k));
      }
      const auto rows = ecstore::sweep_k(config, workload_for(cfg, sweep_config), k8);
      emit(ecstore::sweep_csv(rows), sweep_out);
      return 0;
    }
    ecstore::KeyValueConfig cfg;
    if (!gen_config.empty()) cfg = ecstore::KeyValueConfig::load(gen_config);
    cfg.set("seed", std::to_string(seed));
    const auto workload = ecstore::generate_workload(ecstore::WorkloadSpec::from_config(cfg));
    ecstore::save_workload(gen_out, workload);
    std::cerr << "wrote " << workload.files.size() << " files, " << workload.trace.size() << " events, "
              << workload.total_bytes() << " bytes of content to " << gen_out << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "harness: " << e.what() << std::endl;
    return 2;
  }
}
