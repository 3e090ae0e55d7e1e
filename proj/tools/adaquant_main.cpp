// Copyright 2026 The AdaQuant Authors. All Rights Reserved.
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
// =============================================================================

// Command-line front end: run one experiment, sweep the fixed-width
// baselines against the adaptive schedule, or grid-search s0.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "adaquant/errors.hpp"
#include "adaquant/harness.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string output_dir;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("-c,--config", opts.config_path, "Experiment config (INI)")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", opts.seed, "Override the master seed");
  cmd->add_option("-o,--output-dir", opts.output_dir, "Directory for CSV output");
}

adaquant::TrainingConfig load(const CommonOptions& opts) {
  auto config = adaquant::load_config(opts.config_path);
  if (opts.seed) config.seed = *opts.seed;
  spdlog::info("partition: {}, clients: {}, seed: {}", adaquant::to_string(config.partition),
               config.clients, config.seed);
  return config;
}

std::string describe(const adaquant::ExperimentSummary& s) {
  return fmt::format("{:<10} rounds={:<6} bits={:<10} final_loss={:.6g}{}{}{}", s.label, s.rounds,
                     s.cumulative_bits, s.final_loss,
                     s.final_eval ? fmt::format(" eval={:.4f}", *s.final_eval) : "",
                     s.bits_to_threshold ? fmt::format(" bits_to_threshold={}", *s.bits_to_threshold)
                                         : "",
                     s.failure ? " FAILED: " + *s.failure : "");
}

int run_cmd(const CommonOptions& opts) {
  auto config = load(opts);
  if (!opts.output_dir.empty()) {
    fs::create_directories(opts.output_dir);
    config.output = fs::path(opts.output_dir) / "run.csv";
  }
  const auto result = adaquant::run_experiment(config);
  std::cout << describe(result.summary) << '\n';
  return result.summary.failure ? 1 : 0;
}

int sweep_cmd(const CommonOptions& opts) {
  const auto config = load(opts);
  const auto runs = adaquant::sweep(config, opts.output_dir);
  int status = 0;
  for (const auto& r : runs) {
    std::cout << describe(r.summary) << '\n';
    if (r.summary.failure) status = 1;
  }
  return status;
}

int grid_cmd(const CommonOptions& opts, const std::vector<std::uint32_t>& candidates) {
  const auto config = load(opts);
  const auto result = adaquant::grid_search_s0(config, candidates);
  for (const auto& [s0, summary] : result.ranking) std::cout << describe(summary) << '\n';
  std::cout << "best s0 = " << result.best_s0 << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantized federated learning simulator with adaptive quantization levels"};
  app.require_subcommand(1);

  CommonOptions run_opts;
  auto* run = app.add_subcommand("run", "Run one experiment");
  add_common(run, run_opts);

  CommonOptions sweep_opts;
  auto* sweep = app.add_subcommand("sweep", "Fixed 2/4/8/16-bit baselines vs the adaptive schedule");
  add_common(sweep, sweep_opts);

  CommonOptions grid_opts;
  std::vector<std::uint32_t> candidates{1, 2, 4, 8};
  auto* grid = app.add_subcommand("grid-s0", "Grid search over the initial level count s0");
  add_common(grid, grid_opts);
  grid->add_option("--candidates", candidates, "Candidate s0 values")->delimiter(',');

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return run_cmd(run_opts);
    if (*sweep) return sweep_cmd(sweep_opts);
    if (*grid) return grid_cmd(grid_opts, candidates);
  } catch (const adaquant::ConfigError& e) {
    spdlog::error("config error: {}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
