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

#include "adaquant/controller.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include <spdlog/spdlog.h>

#include "adaquant/errors.hpp"
#include "adaquant/quantizer.hpp"

namespace adaquant {

double BoundConstants::a1() const { return 2.0 * (f_w0 - f_star) * d / (eta * B * tau); }

double BoundConstants::a2() const { return eta * L * d * sigma_sq / n; }

double BoundConstants::a3() const {
  return eta * eta * sigma_sq * (tau - 1.0) * L * L * (n + 1.0) / n + eta * L * sigma_sq / n +
         a1() * (d + 32.0) / d;
}

void BoundConstants::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw InvalidParameter(std::string("BoundConstants: ") + name + " must be positive");
    }
  };
  positive(eta, "eta");
  positive(L, "L");
  positive(sigma_sq, "sigma_sq");
  positive(tau, "tau");
  positive(n, "n");
  positive(d, "d");
  positive(B, "B");
  if (!std::isfinite(f_w0) || !std::isfinite(f_star) || !(f_w0 > f_star)) {
    throw InvalidParameter("BoundConstants: need f_w0 > f_star");
  }
}

double bound_value(double s, double a1, double a2, double a3) {
  return a1 * std::log2(4.0 * s) + a2 / (s * s) + a3;
}

double bound_value(double s, const BoundConstants& c) {
  return bound_value(s, c.a1(), c.a2(), c.a3());
}

double optimal_s_closed_form(const BoundConstants& c) {
  if (!(c.f_w0 > c.f_star)) throw InvalidParameter("optimal_s_closed_form: need f_w0 > f_star");
  return std::sqrt(c.eta * c.eta * c.L * c.sigma_sq * c.tau * c.B * std::numbers::ln2 /
                   (c.n * (c.f_w0 - c.f_star)));
}

std::uint32_t bits_for_level(std::uint64_t s) { return level_bits(s); }

LrSchedule LrSchedule::constant(double eta) { return {eta, 1.0, 0}; }

LrSchedule LrSchedule::step(double eta0, double decay, std::size_t period) {
  return {eta0, decay, period};
}

double LrSchedule::at(std::size_t round) const {
  if (period == 0) return eta0;
  return eta0 * std::pow(decay, static_cast<double>(round / period));
}

void LrSchedule::validate() const {
  if (!(eta0 > 0.0) || !std::isfinite(eta0)) throw InvalidParameter("learning rate must be positive");
  if (!(decay > 0.0) || !std::isfinite(decay)) throw InvalidParameter("decay factor must be positive");
}

QuantSchedule QuantSchedule::start(std::uint32_t s0, std::uint64_t interval_bits, double f_w0,
                                   double eta0, std::uint32_t s_max, double f_star) {
  QuantSchedule sched;
  sched.s0 = s0;
  sched.interval_bits = interval_bits;
  sched.f_w0 = f_w0;
  sched.eta0 = eta0;
  sched.s_max = s_max;
  sched.f_star = f_star;
  sched.interval = 0;
  sched.current_s = s0;
  sched.validate();
  return sched;
}

void QuantSchedule::validate() const {
  if (s0 == 0) throw InvalidParameter("s0 must be >= 1");
  if (s_max < s0) throw InvalidParameter("s_max must be >= s0");
  if (interval_bits == 0) throw InvalidParameter("interval length B0 must be >= 1 bit");
  if (!(eta0 > 0.0)) throw InvalidParameter("eta0 must be positive");
}

std::uint32_t adaquant_level(double f_wk, double eta_k, const QuantSchedule& sched) {
  const double gap_k = f_wk - sched.f_star;
  if (!(gap_k > 0.0)) {
    spdlog::warn("loss {} is at or below the assumed optimum {}; using s_max = {}", f_wk,
                 sched.f_star, sched.s_max);
    return sched.s_max;
  }
  const double gap_0 = sched.f_w0 - sched.f_star;
  const double s_real = sched.s0 * (eta_k / sched.eta0) * std::sqrt(gap_0 / gap_k);
  const double rounded = std::round(s_real);
  if (!(rounded >= 1.0)) return 1;
  if (rounded >= static_cast<double>(sched.s_max)) return sched.s_max;
  return static_cast<std::uint32_t>(rounded);
}

TickResult interval_tick(QuantSchedule& sched, std::uint64_t cumulative_bits, double f_wk,
                         double eta_k) {
  const std::uint64_t interval = cumulative_bits / sched.interval_bits;
  if (interval <= sched.interval) return {sched.current_s, false};
  sched.interval = interval;
  sched.current_s = adaquant_level(f_wk, eta_k, sched);
  return {sched.current_s, true};
}

double lr_condition_value(double eta, double L, double d, double tau, double s, double n) {
  return 1.0 - eta * L * (1.0 + d * tau / (s * s * n)) - 2.0 * eta * eta * L * L * tau * (tau - 1.0);
}

bool lr_condition_fixed(double eta, double L, double d, double tau, double s, double n) {
  return lr_condition_value(eta, L, d, tau, s, n) >= 0.0;
}

bool lr_condition_per_round(double eta_k, double L, double d, double tau, double s_k, double n) {
  return lr_condition_value(eta_k, L, d, tau, s_k, n) >= 0.0;
}

std::vector<bool> feasibility_scan(std::span<const double> etas, std::span<const double> levels,
                                   double L, double d, double tau, double n) {
  if (etas.size() != levels.size()) throw InvalidInput("feasibility_scan: length mismatch");
  std::vector<bool> out(etas.size());
  for (std::size_t k = 0; k < etas.size(); ++k) {
    out[k] = lr_condition_per_round(etas[k], L, d, tau, levels[k], n);
  }
  return out;
}

std::vector<std::size_t> feasibility_transitions(std::span<const bool> feasible) {
  std::vector<std::size_t> out;
  for (std::size_t k = 1; k < feasible.size(); ++k) {
    if (feasible[k] != feasible[k - 1]) out.push_back(k);
  }
  return out;
}

std::array<double, 4> adaptive_bound_terms(std::span<const double> etas,
                                           std::span<const double> levels,
                                           const BoundConstants& c) {
  if (etas.empty() || etas.size() != levels.size()) {
    throw InvalidInput("adaptive_bound_terms: need equal-length, nonempty sequences");
  }
  double sum1 = 0.0;
  double sum2 = 0.0;
  double sum3 = 0.0;
  double sum_quant = 0.0;
  for (std::size_t k = 0; k < etas.size(); ++k) {
    const double e = etas[k];
    sum1 += e;
    sum2 += e * e;
    sum3 += e * e * e;
    sum_quant += e * e * c.d / (levels[k] * levels[k]);
  }
  const double lts = c.L * c.tau * c.sigma_sq;
  return {
      2.0 * (c.f_w0 - c.f_star) / sum1,
      lts * sum2 / (c.n * sum1),
      c.sigma_sq * (c.n + 1.0) * c.tau * (c.tau - 1.0) * c.L * c.L * sum3 / (c.n * sum1),
      lts * sum_quant / (c.n * sum1),
  };
}

}  // namespace adaquant
