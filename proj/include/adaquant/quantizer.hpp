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

#ifndef ADAQUANT_QUANTIZER_HPP_
#define ADAQUANT_QUANTIZER_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "adaquant/rng.hpp"

namespace adaquant {

// Stochastic uniform quantizer with s levels. Each coordinate is stored as
// a sign and a level index l in [0, s]; its reconstruction is
// norm * sign * l / s.
class QuantizedUpdate {
 public:
  /// All-zero update of dimension d.
  static QuantizedUpdate zero(std::uint32_t d, std::uint32_t s);

  /// Validates the invariants and throws InvalidInput if any is violated.
  QuantizedUpdate(float norm, std::vector<bool> negative,
                  std::vector<std::uint32_t> levels, std::uint32_t s);

  float norm() const { return norm_; }
  std::uint32_t s() const { return s_; }
  std::uint32_t d() const { return static_cast<std::uint32_t>(levels_.size()); }
  const std::vector<std::uint32_t>& levels() const { return levels_; }
  // true where the coordinate's sign is -1.
  const std::vector<bool>& negative() const { return negative_; }
  int sign(std::size_t i) const { return negative_[i] ? -1 : 1; }

  friend bool operator==(const QuantizedUpdate&, const QuantizedUpdate&) = default;

 private:
  float norm_;
  std::vector<bool> negative_;
  std::vector<std::uint32_t> levels_;
  std::uint32_t s_;
};

struct BitCost {
  std::uint64_t total_bits;
  std::uint32_t element_bits;  // ceil(log2(s + 1))
  std::uint64_t sign_bits;     // d
  std::uint32_t norm_bits;     // 32
};

/// ceil(log2(s + 1)), the width of one level index. s must be >= 1.
std::uint32_t level_bits(std::uint64_t s);

/// Quantizes w with s levels, drawing one uniform per coordinate from rng.
/// The norm is rounded to float first and the levels are drawn against the
/// rounded norm, so the reconstruction is unbiased for the value actually
/// sent. Throws InvalidInput on non-finite input, InvalidParameter on s = 0.
QuantizedUpdate quantize(std::span<const double> w, std::uint32_t s, Rng& rng);

std::vector<double> dequantize(const QuantizedUpdate& q);

/// Uplink bits for one update: d * ceil(log2(s+1)) + d + 32.
BitCost bits_per_update(std::uint64_t d, std::uint64_t s);

/// (d / s^2) * norm_sq.
double variance_upper_bound(std::uint64_t d, std::uint64_t s, double norm_sq);

/// Exact E||Q_s(w) - w||^2 over the quantizer's randomness, evaluated in
/// closed form per coordinate from the two reachable levels.
double exact_variance(std::span<const double> w, std::uint32_t s);

// Wire format, all multi-byte fields little-endian:
//   magic "AQ" (2 bytes) | version (1) | s (u32) | d (u32)
//   | norm (f32) | sign plane (d bits) | level plane (d * level_bits(s) bits)
//   | zero padding to the next byte.
// Bits are packed LSB-first; a set sign bit means -1.
inline constexpr std::uint8_t kWireMagic[2] = {'A', 'Q'};
inline constexpr std::uint8_t kWireVersion = 1;
inline constexpr std::uint64_t kWireHeaderBits = 8 * (2 + 1 + 4 + 4);

/// Header plus payload bits, before padding.
std::uint64_t encoded_bit_length(std::uint64_t d, std::uint64_t s);

std::vector<std::uint8_t> encode(const QuantizedUpdate& q);

/// Throws DecodeError on truncation, trailing bytes, bad magic/version,
/// a dimension other than d, or any field that breaks the invariants.
QuantizedUpdate decode(std::span<const std::uint8_t> bytes, std::uint32_t d);

}  // namespace adaquant

#endif  // ADAQUANT_QUANTIZER_HPP_
