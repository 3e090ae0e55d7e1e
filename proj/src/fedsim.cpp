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

#include "adaquant/fedsim.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>
#include <string>

#include "adaquant/controller.hpp"
#include "adaquant/errors.hpp"

namespace adaquant {

namespace {

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

// Client i's contribution to a round: its delta, quantized and serialized.
std::vector<std::uint8_t> client_upload(const ModelSpec& model, const ClientShard& shard,
                                        std::span<const double> w_k, const RoundParams& params,
                                        std::size_t round) {
  Rng batches = minibatch_stream(params.seed, shard.id, round);
  const ParameterVector delta =
      local_round(model, shard, w_k, params.local_steps, params.eta, params.batch_size, batches);
  Rng coins = quantize_stream(params.seed, shard.id, round);
  return encode(quantize(delta, params.s, coins));
}

}  // namespace

Problem build_problem(const TrainingConfig& config) {
  Problem problem;
  problem.model = config.model;
  Dataset train;
  if (config.data.source == DataConfig::Source::kSynthetic) {
    SyntheticParams params = config.data.synthetic;
    const std::size_t train_size = params.samples;
    params.samples += config.data.eval_samples;
    SyntheticData generated = generate_synthetic(params, config.seed);
    std::vector<std::size_t> idx(params.samples);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    train = generated.data.subset(std::span(idx).first(train_size));
    if (config.data.eval_samples > 0) {
      problem.eval = generated.data.subset(std::span(idx).subspan(train_size));
    }
  } else {
    const bool classification = config.model.kind != ModelKind::kQuadratic;
    train = load_delimited(config.data.file, classification);
    if (config.data.eval_file) problem.eval = load_delimited(*config.data.eval_file, classification);
  }
  if (problem.model.input_dim == 0) problem.model.input_dim = train.feature_dim();
  if (train.feature_dim() != problem.model.input_dim) {
    throw InvalidInput("dataset has " + std::to_string(train.feature_dim()) +
                       " features but the model expects " +
                       std::to_string(problem.model.input_dim));
  }
  if (problem.model.kind == ModelKind::kMlp && train.num_classes() > problem.model.classes) {
    throw InvalidInput("dataset has more classes than the model outputs");
  }
  problem.shards = partition(train, config.clients, config.partition, config.seed);
  problem.w0 = initial_parameters(problem.model, config.seed);
  return problem;
}

double global_loss(const ModelSpec& model, std::span<const ClientShard> shards,
                   std::span<const double> w) {
  double total = 0.0;
  for (const auto& shard : shards) total += shard.weight * loss(model, w, shard.data);
  return total;
}

ParameterVector local_round(const ModelSpec& model, const ClientShard& shard,
                            std::span<const double> w_k, std::size_t local_steps, double eta,
                            std::size_t batch_size, Rng& rng) {
  if (local_steps == 0) throw InvalidParameter("local_round: tau must be >= 1");
  if (!(eta > 0.0)) throw InvalidParameter("local_round: eta must be positive");
  ParameterVector w(w_k.begin(), w_k.end());
  for (std::size_t t = 0; t < local_steps; ++t) {
    const ParameterVector g = stochastic_gradient(model, w, shard.data, batch_size, rng);
    if (!all_finite(g)) throw DivergenceError("non-finite gradient at local step " + std::to_string(t), t);
    for (std::size_t j = 0; j < w.size(); ++j) w[j] -= eta * g[j];
    if (!all_finite(w)) throw DivergenceError("non-finite parameters at local step " + std::to_string(t), t);
  }
  for (std::size_t j = 0; j < w.size(); ++j) w[j] -= w_k[j];
  return w;
}

ParameterVector aggregate(std::span<const double> w_k, std::span<const QuantizedUpdate> updates,
                          std::span<const double> weights) {
  if (updates.size() != weights.size()) throw InvalidInput("aggregate: one weight per update");
  if (updates.empty()) throw InvalidInput("aggregate: no updates");
  const double weight_sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (std::abs(weight_sum - 1.0) > 1e-9) {
    throw InvalidInput("aggregate: weights sum to " + std::to_string(weight_sum));
  }
  const std::uint32_t s = updates.front().s();
  ParameterVector next(w_k.begin(), w_k.end());
  for (std::size_t i = 0; i < updates.size(); ++i) {
    if (updates[i].d() != w_k.size()) throw InvalidInput("aggregate: dimension mismatch");
    if (updates[i].s() != s) throw InvalidInput("aggregate: updates use different s");
    const auto delta = dequantize(updates[i]);
    for (std::size_t j = 0; j < next.size(); ++j) next[j] += weights[i] * delta[j];
  }
  return next;
}

Rng minibatch_stream(std::uint64_t seed, std::size_t client, std::size_t round) {
  return substream(seed, StreamTag::kMinibatch, client, round);
}

Rng quantize_stream(std::uint64_t seed, std::size_t client, std::size_t round) {
  return substream(seed, StreamTag::kQuantize, client, round);
}

RoundOutcome run_round(const ModelSpec& model, const GlobalState& state,
                       std::span<const ClientShard> shards, const RoundParams& params,
                       double train_loss) {
  if (params.s == 0) throw InvalidParameter("run_round: s must be >= 1");
  const std::size_t n = shards.size();
  std::vector<std::vector<std::uint8_t>> uploads(n);

  auto work = [&](std::size_t i) {
    try {
      uploads[i] = client_upload(model, shards[i], state.w, params, state.round);
    } catch (const DivergenceError& e) {
      throw DivergenceError("client " + std::to_string(shards[i].id) + ": " + e.what(), e.step(),
                            shards[i].id);
    }
  };
  const std::size_t workers = std::clamp<std::size_t>(params.workers, 1, n);
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) work(i);
  } else {
    std::vector<std::future<void>> pending;
    for (std::size_t w = 0; w < workers; ++w) {
      pending.push_back(std::async(std::launch::async, [&, w] {
        for (std::size_t i = w; i < n; i += workers) work(i);
      }));
    }
    for (auto& f : pending) f.get();
  }

  // Server side: decode each upload, then reduce in client order.
  const auto d = static_cast<std::uint32_t>(state.w.size());
  std::vector<QuantizedUpdate> updates;
  std::vector<double> weights;
  updates.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    updates.push_back(decode(uploads[i], d));
    weights.push_back(shards[i].weight);
  }

  RoundOutcome out;
  out.next.w = aggregate(state.w, updates, weights);
  if (!all_finite(out.next.w)) throw DivergenceError("non-finite aggregate", state.round);
  const std::uint64_t bits = bits_per_update(d, params.s).total_bits;
  out.next.round = state.round + 1;
  out.next.cumulative_bits = state.cumulative_bits + bits;

  out.record.round = state.round;
  out.record.s = params.s;
  out.record.b = bits_for_level(params.s);
  out.record.eta = params.eta;
  out.record.bits_this_round = bits;
  out.record.cumulative_bits = out.next.cumulative_bits;
  out.record.train_loss = train_loss;
  return out;
}

TrainingRun run_training(const TrainingConfig& config, const RoundObserver& observer) {
  return run_training(config, build_problem(config), observer);
}

TrainingRun run_training(const TrainingConfig& config, const Problem& problem,
                         const RoundObserver& observer) {
  config.lr.validate();
  const ModelSpec& model = problem.model;
  const std::size_t d = model.dimension();
  const double tau = static_cast<double>(config.local_steps);
  const double n = static_cast<double>(problem.shards.size());

  TrainingRun run;
  GlobalState state{problem.w0, 0, 0};
  std::optional<QuantSchedule> schedule;

  auto eval_metric = [&](std::span<const double> w) -> std::optional<double> {
    if (!problem.eval || !problem.eval->is_classification()) return std::nullopt;
    return accuracy(model, w, *problem.eval);
  };

  try {
    for (std::size_t k = 0; k < config.max_rounds; ++k) {
      const double f_wk = global_loss(model, problem.shards, state.w);
      if (!std::isfinite(f_wk)) throw DivergenceError("non-finite training loss", k);
      const double eta = config.lr.at(k);

      std::uint32_t s = 0;
      std::uint64_t interval = 0;
      if (const auto* fixed = std::get_if<FixedLevels>(&config.quant)) {
        s = fixed->levels();
      } else {
        const auto& adaptive = std::get<AdaptiveLevels>(config.quant);
        if (!schedule) {
          schedule = QuantSchedule::start(adaptive.s0, adaptive.interval_bits_for(d), f_wk,
                                          config.lr.at(0), adaptive.s_max, adaptive.f_star);
        }
        s = interval_tick(*schedule, state.cumulative_bits, f_wk, eta).s;
        interval = schedule->interval;
      }

      const std::uint64_t cost = bits_per_update(d, s).total_bits;
      if (config.bit_budget && state.cumulative_bits + cost > *config.bit_budget) break;

      const RoundParams params{s, eta, config.local_steps, config.batch_size, config.seed,
                               config.workers};
      RoundOutcome outcome = run_round(model, state, problem.shards, params, f_wk);
      if (config.eval_every > 0 && k % config.eval_every == 0) {
        outcome.record.eval_metric = eval_metric(state.w);
      }
      outcome.record.interval = interval;
      if (config.smoothness) {
        outcome.record.feasible = lr_condition_per_round(eta, *config.smoothness,
                                                         static_cast<double>(d), tau, s, n);
      }
      if (observer) observer(outcome.record);
      run.records.push_back(outcome.record);
      state = std::move(outcome.next);

      if (config.stop_at_threshold && config.loss_threshold && f_wk <= *config.loss_threshold) {
        break;
      }
    }
    run.final_loss = global_loss(model, problem.shards, state.w);
    run.final_eval = eval_metric(state.w);
  } catch (const Error& e) {
    run.failure = e.what();
    run.final_loss = NAN;
  }
  run.final_w = std::move(state.w);
  return run;
}

}  // namespace adaquant
