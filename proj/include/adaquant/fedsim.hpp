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

#ifndef ADAQUANT_FEDSIM_HPP_
#define ADAQUANT_FEDSIM_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "adaquant/config.hpp"
#include "adaquant/objectives.hpp"
#include "adaquant/quantizer.hpp"

namespace adaquant {

// Everything a run needs once the config has been materialized.
struct Problem {
  ModelSpec model;
  std::vector<ClientShard> shards;
  std::optional<Dataset> eval;
  ParameterVector w0;
};

Problem build_problem(const TrainingConfig& config);

struct GlobalState {
  ParameterVector w;
  std::size_t round = 0;
  std::uint64_t cumulative_bits = 0;  // per client; identical across clients
};

struct RoundRecord {
  std::size_t round = 0;
  std::uint32_t s = 0;
  std::uint32_t b = 0;  // ceil(log2(s + 1))
  double eta = 0.0;
  std::uint64_t bits_this_round = 0;
  std::uint64_t cumulative_bits = 0;  // after this round
  double train_loss = 0.0;            // f(w_k), before the round's updates
  std::optional<double> eval_metric;
  std::uint64_t interval = 0;
  std::optional<bool> feasible;

  friend bool operator==(const RoundRecord&, const RoundRecord&) = default;
};

struct RoundParams {
  std::uint32_t s = 1;
  double eta = 0.1;
  std::size_t local_steps = 1;
  std::size_t batch_size = 1;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
};

/// Sum_i p_i f_i(w) over the shards.
double global_loss(const ModelSpec& model, std::span<const ClientShard> shards,
                   std::span<const double> w);

/// Runs tau SGD steps from w_k on one shard and returns w_{k,tau} - w_k.
/// Throws DivergenceError carrying the step index on any non-finite value.
ParameterVector local_round(const ModelSpec& model, const ClientShard& shard,
                            std::span<const double> w_k, std::size_t local_steps, double eta,
                            std::size_t batch_size, Rng& rng);

/// w_k + sum_i p_i dequantize(update_i), reduced in client order.
ParameterVector aggregate(std::span<const double> w_k, std::span<const QuantizedUpdate> updates,
                          std::span<const double> weights);

/// Random stream used by a client for minibatch sampling in a given round.
Rng minibatch_stream(std::uint64_t seed, std::size_t client, std::size_t round);
/// Random stream used by a client to quantize its delta in a given round.
Rng quantize_stream(std::uint64_t seed, std::size_t client, std::size_t round);

struct RoundOutcome {
  GlobalState next;
  RoundRecord record;
};

/// One broadcast / local-train / quantize / upload / aggregate cycle. Every
/// quantized update crosses to the server through the wire format. The
/// record carries train_loss as given; eval, interval and feasibility are
/// left for the caller.
RoundOutcome run_round(const ModelSpec& model, const GlobalState& state,
                       std::span<const ClientShard> shards, const RoundParams& params,
                       double train_loss);

struct TrainingRun {
  std::vector<RoundRecord> records;
  ParameterVector final_w;
  double final_loss = 0.0;
  std::optional<double> final_eval;
  std::optional<std::string> failure;  // set when training stopped on an error
};

using RoundObserver = std::function<void(const RoundRecord&)>;

/// Trains for up to max_rounds rounds, stopping early when the next round
/// would exceed the bit budget or, if requested, once the loss threshold is
/// reached. Errors end the run and are reported in failure together with the
/// records produced so far.
TrainingRun run_training(const TrainingConfig& config, const RoundObserver& observer = {});
TrainingRun run_training(const TrainingConfig& config, const Problem& problem,
                         const RoundObserver& observer = {});

}  // namespace adaquant

#endif  // ADAQUANT_FEDSIM_HPP_
