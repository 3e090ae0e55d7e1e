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

#ifndef ADAQUANT_CONFIG_HPP_
#define ADAQUANT_CONFIG_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <variant>

#include "adaquant/controller.hpp"
#include "adaquant/objectives.hpp"

namespace adaquant {

// Constant element width b, i.e. s = 2^b - 1 every round.
struct FixedLevels {
  std::uint32_t bits = 8;

  std::uint32_t levels() const {
    return static_cast<std::uint32_t>((std::uint64_t{1} << bits) - 1);
  }
};

// Loss-driven level schedule recomputed once per B0-bit interval.
struct AdaptiveLevels {
  std::uint32_t s0 = kDefaultInitialLevels;
  std::optional<std::uint64_t> interval_bits;  // B0; 16 d when unset
  std::uint32_t s_max = kDefaultMaxLevels;
  double f_star = 0.0;

  std::uint64_t interval_bits_for(std::size_t d) const {
    return interval_bits.value_or(16 * static_cast<std::uint64_t>(d));
  }
};

using QuantMode = std::variant<FixedLevels, AdaptiveLevels>;

struct DataConfig {
  enum class Source { kSynthetic, kFile };

  Source source = Source::kSynthetic;
  SyntheticParams synthetic;
  // Extra synthetic samples drawn with the training set and held out for
  // evaluation.
  std::size_t eval_samples = 0;
  std::filesystem::path file;
  std::optional<std::filesystem::path> eval_file;
};

struct TrainingConfig {
  ModelSpec model;
  DataConfig data;
  std::size_t clients = 8;
  PartitionMode partition = PartitionMode::kIid;
  std::size_t local_steps = 10;
  std::size_t batch_size = 32;
  LrSchedule lr = LrSchedule::constant(0.1);
  QuantMode quant = AdaptiveLevels{};
  std::size_t max_rounds = 0;
  std::optional<std::uint64_t> bit_budget;  // per-client uplink bits
  std::optional<double> loss_threshold;
  bool stop_at_threshold = false;
  std::uint64_t seed = 1;
  std::size_t eval_every = 1;
  std::size_t workers = 1;          // concurrent client computations per round
  std::optional<double> smoothness; // L, enables the per-round feasibility column
  std::filesystem::path output;     // CSV destination; empty disables writing
};

}  // namespace adaquant

#endif  // ADAQUANT_CONFIG_HPP_
