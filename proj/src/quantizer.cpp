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

#include "adaquant/quantizer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <string>

#include "adaquant/errors.hpp"
#include "bit_stream.hpp"

namespace adaquant {

namespace {

struct LevelSplit {
  std::uint32_t lower;  // l
  double p_upper;       // probability of l + 1
};

// l = floor(ratio * s), except ratio == 1 maps to l = s - 1 with p = 1 so the
// index never leaves [0, s]. Integral ratio * s below s is deterministic.
LevelSplit split_level(double ratio, std::uint32_t s) {
  const double scaled = ratio * static_cast<double>(s);
  double lower = std::floor(scaled);
  if (lower >= static_cast<double>(s)) lower = static_cast<double>(s) - 1.0;
  return {static_cast<std::uint32_t>(lower), scaled - lower};
}

double checked_norm(std::span<const double> w) {
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (!std::isfinite(w[i])) {
      throw InvalidInput("quantize: non-finite coordinate at index " + std::to_string(i));
    }
    sum_sq += w[i] * w[i];
  }
  const double norm = std::sqrt(sum_sq);
  if (!std::isfinite(norm)) throw InvalidInput("quantize: norm overflows");
  return norm;
}

// The norm actually transmitted. Zero when w is zero or too small for f32.
float wire_norm(double norm) {
  const float rounded = static_cast<float>(norm);
  if (!std::isfinite(rounded)) throw InvalidInput("quantize: norm exceeds float range");
  return rounded;
}

}  // namespace

QuantizedUpdate QuantizedUpdate::zero(std::uint32_t d, std::uint32_t s) {
  return QuantizedUpdate(0.0F, std::vector<bool>(d, false),
                         std::vector<std::uint32_t>(d, 0), s);
}

QuantizedUpdate::QuantizedUpdate(float norm, std::vector<bool> negative,
                                 std::vector<std::uint32_t> levels, std::uint32_t s)
    : norm_(norm), negative_(std::move(negative)), levels_(std::move(levels)), s_(s) {
  if (s_ == 0) throw InvalidInput("QuantizedUpdate: s must be >= 1");
  if (levels_.empty()) throw InvalidInput("QuantizedUpdate: d must be >= 1");
  if (negative_.size() != levels_.size()) {
    throw InvalidInput("QuantizedUpdate: sign and level planes differ in length");
  }
  if (!std::isfinite(norm_) || norm_ < 0.0F) {
    throw InvalidInput("QuantizedUpdate: norm must be finite and nonnegative");
  }
  for (const auto l : levels_) {
    if (l > s_) throw InvalidInput("QuantizedUpdate: level index exceeds s");
    if (norm_ == 0.0F && l != 0) {
      throw InvalidInput("QuantizedUpdate: zero norm requires zero levels");
    }
  }
}

std::uint32_t level_bits(std::uint64_t s) {
  // ceil(log2(s + 1)) == bit_width(s) for s >= 1.
  return static_cast<std::uint32_t>(std::bit_width(s));
}

QuantizedUpdate quantize(std::span<const double> w, std::uint32_t s, Rng& rng) {
  if (s == 0) throw InvalidParameter("quantize: s must be >= 1");
  if (w.empty()) throw InvalidInput("quantize: empty vector");
  const auto d = static_cast<std::uint32_t>(w.size());
  const float norm = wire_norm(checked_norm(w));
  if (norm == 0.0F) return QuantizedUpdate::zero(d, s);

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double norm_d = norm;
  std::vector<bool> negative(d);
  std::vector<std::uint32_t> levels(d);
  for (std::uint32_t i = 0; i < d; ++i) {
    negative[i] = std::signbit(w[i]) && w[i] != 0.0;
    const double ratio = std::min(std::abs(w[i]) / norm_d, 1.0);
    const auto [lower, p_upper] = split_level(ratio, s);
    // One draw per coordinate regardless of p keeps stream consumption fixed.
    const double u = unit(rng);
    levels[i] = lower + (u < p_upper ? 1U : 0U);
  }
  return QuantizedUpdate(norm, std::move(negative), std::move(levels), s);
}

std::vector<double> dequantize(const QuantizedUpdate& q) {
  std::vector<double> out(q.d());
  const double norm = q.norm();
  const double s = q.s();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = norm * q.sign(i) * (static_cast<double>(q.levels()[i]) / s);
  }
  return out;
}

BitCost bits_per_update(std::uint64_t d, std::uint64_t s) {
  BitCost cost{};
  cost.element_bits = level_bits(s);
  cost.sign_bits = d;
  cost.norm_bits = 32;
  cost.total_bits = d * cost.element_bits + d + cost.norm_bits;
  return cost;
}

double variance_upper_bound(std::uint64_t d, std::uint64_t s, double norm_sq) {
  const double sd = static_cast<double>(s);
  return static_cast<double>(d) / (sd * sd) * norm_sq;
}

double exact_variance(std::span<const double> w, std::uint32_t s) {
  if (s == 0) throw InvalidParameter("exact_variance: s must be >= 1");
  const double norm = wire_norm(checked_norm(w));
  if (norm == 0.0F) {
    double sum_sq = 0.0;
    for (const double x : w) sum_sq += x * x;
    return sum_sq;
  }
  const double norm_d = norm;
  const double sd = s;
  double total = 0.0;
  for (const double x : w) {
    const double a = std::abs(x);
    const auto [lower, p_upper] = split_level(std::min(a / norm_d, 1.0), s);
    const double lo = norm_d * (lower / sd);
    const double hi = norm_d * ((lower + 1.0) / sd);
    total += p_upper * (hi - a) * (hi - a) + (1.0 - p_upper) * (lo - a) * (lo - a);
  }
  return total;
}

std::uint64_t encoded_bit_length(std::uint64_t d, std::uint64_t s) {
  return kWireHeaderBits + bits_per_update(d, s).total_bits;
}

std::vector<std::uint8_t> encode(const QuantizedUpdate& q) {
  std::vector<std::uint8_t> out;
  out.reserve((encoded_bit_length(q.d(), q.s()) + 7) / 8);
  detail::BitWriter writer(out);
  writer.put_bytes_le(kWireMagic[0], 1);
  writer.put_bytes_le(kWireMagic[1], 1);
  writer.put_bytes_le(kWireVersion, 1);
  writer.put_bytes_le(q.s(), 4);
  writer.put_bytes_le(q.d(), 4);

  const float norm = q.norm();
  std::uint32_t norm_bits = 0;
  std::memcpy(&norm_bits, &norm, sizeof norm_bits);
  writer.put(norm_bits, 32);

  for (const bool neg : q.negative()) writer.put(neg ? 1 : 0, 1);
  const unsigned width = level_bits(q.s());
  for (const auto l : q.levels()) writer.put(l, width);
  return out;
}

QuantizedUpdate decode(std::span<const std::uint8_t> bytes, std::uint32_t d) {
  constexpr std::uint64_t kFixed = kWireHeaderBits + 32;
  if (8 * bytes.size() < kFixed) throw DecodeError("decode: truncated header");
  detail::BitReader reader(bytes);
  if (reader.get(8) != kWireMagic[0] || reader.get(8) != kWireMagic[1]) {
    throw DecodeError("decode: bad magic");
  }
  if (const auto version = reader.get(8); version != kWireVersion) {
    throw DecodeError("decode: unsupported version " + std::to_string(version));
  }
  const auto s = static_cast<std::uint32_t>(reader.get(32));
  const auto wire_d = static_cast<std::uint32_t>(reader.get(32));
  if (s == 0) throw DecodeError("decode: s = 0");
  if (wire_d != d) {
    throw DecodeError("decode: dimension mismatch (wire " + std::to_string(wire_d) +
                      ", expected " + std::to_string(d) + ")");
  }
  if (d == 0) throw DecodeError("decode: d = 0");

  const std::uint64_t total_bits = encoded_bit_length(d, s);
  const std::uint64_t expected_bytes = (total_bits + 7) / 8;
  if (bytes.size() < expected_bytes) throw DecodeError("decode: truncated payload");
  if (bytes.size() > expected_bytes) throw DecodeError("decode: trailing bytes");

  const auto norm_bits = static_cast<std::uint32_t>(reader.get(32));
  float norm = 0.0F;
  std::memcpy(&norm, &norm_bits, sizeof norm);

  std::vector<bool> negative(d);
  for (std::uint32_t i = 0; i < d; ++i) negative[i] = reader.get(1) != 0;
  const unsigned width = level_bits(s);
  std::vector<std::uint32_t> levels(d);
  for (std::uint32_t i = 0; i < d; ++i) levels[i] = static_cast<std::uint32_t>(reader.get(width));
  if (reader.bits_left() > 0 && reader.get(static_cast<unsigned>(reader.bits_left())) != 0) {
    throw DecodeError("decode: nonzero padding");
  }

  try {
    return QuantizedUpdate(norm, std::move(negative), std::move(levels), s);
  } catch (const InvalidInput& e) {
    throw DecodeError(std::string("decode: corrupt payload: ") + e.what());
  }
}

}  // namespace adaquant
