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

#ifndef ADAQUANT_HARNESS_HPP_
#define ADAQUANT_HARNESS_HPP_

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "adaquant/config.hpp"
#include "adaquant/fedsim.hpp"

namespace adaquant {

/// Parses an INI-style experiment description. The grammar and defaults are
/// documented in README.md. Throws ConfigError naming the offending field.
TrainingConfig parse_config(std::string_view text);
TrainingConfig load_config(const std::filesystem::path& path);

struct ExperimentSummary {
  std::string label;
  std::size_t rounds = 0;
  double final_loss = 0.0;
  std::optional<double> final_eval;
  std::uint64_t cumulative_bits = 0;
  std::optional<std::uint64_t> bits_to_threshold;
  std::vector<std::uint32_t> s_trajectory;
  std::optional<std::string> failure;
};

struct Experiment {
  ExperimentSummary summary;
  std::vector<RoundRecord> records;
};

/// Runs one configuration, streaming records to config.output when set.
Experiment run_experiment(const TrainingConfig& config, std::string label = "run");

/// Cumulative bits of the first record whose train loss is <= threshold.
std::optional<std::uint64_t> bits_to_threshold(std::span<const RoundRecord> records,
                                               double threshold);

/// Fixed-width baselines compared against the adaptive schedule.
inline constexpr std::uint32_t kSweepBits[] = {2, 4, 8, 16};

/// Runs fixed(b) for each b in kSweepBits plus the config's adaptive schedule
/// (defaults when the config is in fixed mode), all sharing data, partition,
/// batches and initialization. With a nonempty out_dir, writes one CSV per
/// run plus summary.csv.
std::vector<Experiment> sweep(const TrainingConfig& config, const std::filesystem::path& out_dir);

struct GridSearchResult {
  std::uint32_t best_s0 = 0;
  // Best first.
  std::vector<std::pair<std::uint32_t, ExperimentSummary>> ranking;
};

/// One adaptive run per candidate s0. Ranked by bits-to-threshold (runs that
/// reach the threshold first), then final loss, then smaller s0.
GridSearchResult grid_search_s0(const TrainingConfig& config,
                                std::span<const std::uint32_t> candidates);

inline constexpr std::string_view kCsvHeader =
    "round,cumulative_bits,train_loss,eval_metric,s,b,eta,interval,feasibility";

// Appends one line per record and flushes, so an interrupted run leaves a
// valid prefix.
class CsvWriter {
 public:
  explicit CsvWriter(const std::filesystem::path& path);
  void write(const RoundRecord& record);

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

void emit_csv(std::span<const RoundRecord> records, const std::filesystem::path& path);

/// Parses a file written by CsvWriter. bits_this_round is recovered from
/// consecutive cumulative totals.
std::vector<RoundRecord> read_csv(const std::filesystem::path& path);

void write_summary_csv(std::span<const Experiment> runs, const std::filesystem::path& path);

}  // namespace adaquant

#endif  // ADAQUANT_HARNESS_HPP_
