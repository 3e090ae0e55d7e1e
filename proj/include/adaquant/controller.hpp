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

#ifndef ADAQUANT_CONTROLLER_HPP_
#define ADAQUANT_CONTROLLER_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace adaquant {

/// Default level cap: 16-bit elements.
inline constexpr std::uint32_t kDefaultMaxLevels = (1U << 16) - 1;
inline constexpr std::uint32_t kDefaultInitialLevels = 2;

// Problem constants of the error-vs-bits bound.
struct BoundConstants {
  double eta = 0.0;       // learning rate
  double L = 0.0;         // smoothness
  double sigma_sq = 0.0;  // stochastic-gradient variance bound
  double tau = 0.0;       // local steps per round
  double n = 0.0;         // clients
  double d = 0.0;         // model dimension
  double B = 0.0;         // bits communicated per client
  double f_w0 = 0.0;      // loss at initialization
  double f_star = 0.0;    // optimal loss

  double a1() const;  // 2 (f_w0 - f*) d / (eta B tau)
  double a2() const;  // eta L d sigma^2 / n
  double a3() const;  // eta^2 sigma^2 (tau-1) L^2 (n+1)/n + eta L sigma^2 / n + a1 (d+32)/d

  /// Throws InvalidParameter unless every constant is positive (f* may be
  /// zero or negative) and f_w0 > f*.
  void validate() const;
};

/// A1 log2(4s) + A2/s^2 + A3. Defined for real s > 0.
double bound_value(double s, const BoundConstants& c);
double bound_value(double s, double a1, double a2, double a3);

/// sqrt(eta^2 L sigma^2 tau B ln2 / (n (f_w0 - f*))), the global minimizer of
/// bound_value over s > 0. Throws InvalidParameter when f_w0 <= f*.
double optimal_s_closed_form(const BoundConstants& c);

/// ceil(log2(s + 1)) for s >= 1.
std::uint32_t bits_for_level(std::uint64_t s);

// Learning-rate schedule: eta0 * gamma^floor(k / period), or constant when
// period is zero.
struct LrSchedule {
  double eta0 = 0.1;
  double decay = 1.0;
  std::size_t period = 0;

  static LrSchedule constant(double eta);
  static LrSchedule step(double eta0, double decay, std::size_t period);

  double at(std::size_t round) const;
  void validate() const;
};

struct QuantSchedule {
  std::uint32_t s0 = kDefaultInitialLevels;
  std::uint64_t interval_bits = 0;  // B0
  double f_w0 = 0.0;                // loss at the start of training
  double eta0 = 0.0;
  std::uint32_t s_max = kDefaultMaxLevels;
  double f_star = 0.0;              // assumed optimum, 0 unless overridden
  std::uint64_t interval = 0;       // index of the current B0 interval
  std::uint32_t current_s = kDefaultInitialLevels;

  /// Fresh schedule positioned at interval 0 emitting s0.
  static QuantSchedule start(std::uint32_t s0, std::uint64_t interval_bits, double f_w0,
                             double eta0, std::uint32_t s_max = kDefaultMaxLevels,
                             double f_star = 0.0);

  void validate() const;
};

/// s0 * (eta_k / eta0) * sqrt((f_w0 - f*) / (f_wk - f*)), rounded to the
/// nearest integer and clamped to [1, s_max]. A loss at or below f* yields
/// s_max and logs a warning.
std::uint32_t adaquant_level(double f_wk, double eta_k, const QuantSchedule& sched);

struct TickResult {
  std::uint32_t s;
  bool recomputed;
};

/// Recomputes the level only when floor(cumulative_bits / B0) has moved past
/// the stored interval index; otherwise returns the current level.
TickResult interval_tick(QuantSchedule& sched, std::uint64_t cumulative_bits, double f_wk,
                         double eta_k);

/// 1 - eta L (1 + d tau / (s^2 n)) - 2 eta^2 L^2 tau (tau - 1).
double lr_condition_value(double eta, double L, double d, double tau, double s, double n);

/// Learning-rate hypothesis of the fixed-level bound.
bool lr_condition_fixed(double eta, double L, double d, double tau, double s, double n);

/// Per-round hypothesis of the adaptive bound, with the round's eta_k and
/// s_k. Uses eta_k in both terms.
bool lr_condition_per_round(double eta_k, double L, double d, double tau, double s_k, double n);

/// Per-round feasibility over (eta_k, s_k) sequences of equal length.
std::vector<bool> feasibility_scan(std::span<const double> etas, std::span<const double> levels,
                                   double L, double d, double tau, double n);

/// Rounds k >= 1 where feasibility differs from round k - 1.
std::vector<std::size_t> feasibility_transitions(std::span<const bool> feasible);

/// The four terms whose sum bounds the eta-weighted average squared
/// gradient norm under a varying (eta_k, s_k) schedule:
///   [0] 2 (f_w0 - f*) / sum eta
///   [1] L tau sigma^2 sum eta^2 / (n sum eta)
///   [2] sigma^2 (n+1) tau (tau-1) L^2 sum eta^3 / (n sum eta)
///   [3] L tau sigma^2 sum eta^2 d / s^2 / (n sum eta)
/// Only L, sigma^2, tau, n, d, f_w0, f* are read from c.
std::array<double, 4> adaptive_bound_terms(std::span<const double> etas,
                                           std::span<const double> levels,
                                           const BoundConstants& c);

}  // namespace adaquant

#endif  // ADAQUANT_CONTROLLER_HPP_
