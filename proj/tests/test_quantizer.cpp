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

#include <cmath>
#include <limits>
#include <vector>

#include <doctest.h>

#include "adaquant/errors.hpp"
#include "adaquant/quantizer.hpp"

using namespace adaquant;

namespace {

QuantizedUpdate random_update(Rng& rng) {
  std::uniform_int_distribution<std::uint32_t> dim(1, 70);
  std::uniform_int_distribution<std::uint32_t> width(1, 32);
  const std::uint32_t d = dim(rng);
  const std::uint32_t b = width(rng);
  const auto s = static_cast<std::uint32_t>((std::uint64_t{1} << b) - 1 - (rng() % 2 ? 0 : (b > 1 ? 1 : 0)));
  std::uniform_int_distribution<std::uint32_t> level(0, s);
  std::vector<bool> neg(d);
  std::vector<std::uint32_t> levels(d);
  for (std::uint32_t i = 0; i < d; ++i) {
    neg[i] = rng() % 2 == 0;
    levels[i] = level(rng);
  }
  std::uniform_real_distribution<float> norm(0.001F, 1000.0F);
  return QuantizedUpdate(norm(rng), neg, levels, s);
}

}  // namespace

TEST_SUITE("quantizer") {
  TEST_CASE("zero vector quantizes to the zero update") {
    Rng rng(1);
    const std::vector<double> w(4, 0.0);
    const auto q = quantize(w, 3, rng);
    CHECK(q.norm() == 0.0F);
    CHECK(q.d() == 4);
    CHECK(q.s() == 3);
    for (auto l : q.levels()) CHECK(l == 0);
    for (double x : dequantize(q)) CHECK(x == 0.0);
  }

  TEST_CASE("coordinates on exact levels quantize deterministically") {
    const std::vector<double> w{3.0, -4.0};
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      Rng rng(seed);
      const auto q = quantize(w, 5, rng);
      CHECK(q.norm() == 5.0F);
      CHECK(q.levels() == std::vector<std::uint32_t>{3, 4});
      CHECK(q.sign(0) == 1);
      CHECK(q.sign(1) == -1);
      CHECK(dequantize(q) == w);
    }
  }

  TEST_CASE("exact-level determinism holds for other lattice vectors") {
    // Every |w_i| / ||w|| * s is an integer in these cases.
    const std::vector<std::pair<std::vector<double>, std::uint32_t>> cases = {
        {{1.0, 2.0, -2.0}, 3}, {{1.0, 2.0, -2.0}, 6}, {{3.0, 4.0}, 10}, {{0.0, -2.0, 0.0}, 3}};
    for (const auto& [w, s] : cases) {
      Rng a(11);
      Rng b(12);
      const auto qa = quantize(w, s, a);
      CHECK(qa == quantize(w, s, b));
      const auto back = dequantize(qa);
      for (std::size_t i = 0; i < w.size(); ++i) CHECK(back[i] == doctest::Approx(w[i]).epsilon(1e-15));
    }
  }

  TEST_CASE("ratio one maps to level s") {
    Rng rng(3);
    const std::vector<double> w{0.0, -2.0, 0.0};
    const auto q = quantize(w, 3, rng);
    CHECK(q.levels() == std::vector<std::uint32_t>{0, 3, 0});
    CHECK(dequantize(q) == w);
  }

  TEST_CASE("level probability follows the fractional part") {
    // w = [1, 1], s = 1: each coordinate lands on level 1 with p = 1/sqrt(2).
    const std::vector<double> w{1.0, 1.0};
    const int draws = 20000;
    Rng rng(2024);
    int ones = 0;
    for (int k = 0; k < draws; ++k) {
      const auto q = quantize(w, 1, rng);
      ones += static_cast<int>(q.levels()[0]);
    }
    const double p = 1.0 / std::sqrt(2.0);
    const double se = std::sqrt(p * (1 - p) / draws);
    CHECK(std::abs(ones / double(draws) - p) < 4 * se);
  }

  TEST_CASE("invalid inputs are rejected") {
    Rng rng(0);
    const std::vector<double> w{1.0, 2.0};
    CHECK_THROWS_AS(quantize(w, 0, rng), InvalidParameter);
    const std::vector<double> nan{1.0, std::numeric_limits<double>::quiet_NaN()};
    CHECK_THROWS_AS(quantize(nan, 3, rng), InvalidInput);
    const std::vector<double> inf{std::numeric_limits<double>::infinity()};
    CHECK_THROWS_AS(quantize(inf, 3, rng), InvalidInput);
    CHECK_THROWS_AS(QuantizedUpdate(1.0F, {false}, {4}, 3), InvalidInput);
    CHECK_THROWS_AS(QuantizedUpdate(0.0F, {false}, {1}, 3), InvalidInput);
  }

  TEST_CASE("dequantize examples") {
    CHECK(dequantize(QuantizedUpdate::zero(3, 7)) == std::vector<double>(3, 0.0));
    CHECK(dequantize(QuantizedUpdate(5.0F, {false, true}, {3, 4}, 5)) == std::vector<double>{3.0, -4.0});
    CHECK(dequantize(QuantizedUpdate(2.0F, {false}, {1}, 2)) == std::vector<double>{1.0});
  }

  TEST_CASE("dequantized coordinates never exceed the norm") {
    Rng rng(5);
    std::normal_distribution<double> normal;
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<double> w(1 + trial % 17);
      for (auto& x : w) x = normal(rng);
      const auto q = quantize(w, 1 + trial % 9, rng);
      for (double x : dequantize(q)) CHECK(std::abs(x) <= q.norm());
    }
  }

  TEST_CASE("bit cost per update") {
    CHECK(bits_per_update(1, 1).total_bits == 34);
    CHECK(bits_per_update(10, 3).total_bits == 62);
    const auto c = bits_per_update(10, 15);
    CHECK(c.element_bits == 4);
    CHECK(c.total_bits == 82);
    CHECK(c.sign_bits == 10);
    CHECK(c.norm_bits == 32);
    for (std::uint32_t b = 1; b <= 32; ++b) {
      CHECK(bits_per_update(7, (std::uint64_t{1} << b) - 1).element_bits == b);
    }
  }

  TEST_CASE("cost is nondecreasing and the variance bound strictly decreasing in s") {
    for (std::uint64_t d : {1, 10, 1000}) {
      for (std::uint64_t s = 1; s < 5000; ++s) {
        CHECK(bits_per_update(d, s + 1).total_bits >= bits_per_update(d, s).total_bits);
        CHECK(variance_upper_bound(d, s + 1, 2.5) < variance_upper_bound(d, s, 2.5));
      }
    }
  }

  TEST_CASE("variance upper bound examples") {
    CHECK(variance_upper_bound(4, 2, 1.0) == 1.0);
    CHECK(variance_upper_bound(1, 1, 0.0) == 0.0);
    CHECK(variance_upper_bound(8, 4, 2.0) == 1.0);
  }

  TEST_CASE("exact variance examples") {
    CHECK(exact_variance(std::vector<double>{3.0, -4.0}, 5) == 0.0);
    CHECK(exact_variance(std::vector<double>{0.0, 0.0, 0.0}, 4) == 0.0);
    // 2 coordinates * ||w||^2 * p (1 - p) with p = 1/sqrt(2).
    const double p = 1.0 / std::sqrt(2.0);
    CHECK(exact_variance(std::vector<double>{1.0, 1.0}, 1) == doctest::Approx(2 * 2 * p * (1 - p)).epsilon(1e-6));
    CHECK(2 * 2 * p * (1 - p) == doctest::Approx(0.8284).epsilon(1e-4));
  }

  TEST_CASE("exact variance agrees with Monte Carlo") {
    Rng rng(77);
    std::normal_distribution<double> normal;
    std::vector<double> w(9);
    for (auto& x : w) x = normal(rng);
    for (std::uint32_t s : {1U, 2U, 7U}) {
      const int draws = 20000;
      double acc = 0.0;
      for (int k = 0; k < draws; ++k) {
        const auto back = dequantize(quantize(w, s, rng));
        for (std::size_t i = 0; i < w.size(); ++i) acc += (back[i] - w[i]) * (back[i] - w[i]);
      }
      CHECK(acc / draws == doctest::Approx(exact_variance(w, s)).epsilon(0.05));
    }
  }

  TEST_CASE("encoded length matches the bit count plus header") {
    Rng rng(9);
    std::vector<double> w(10);
    std::normal_distribution<double> normal;
    for (auto& x : w) x = normal(rng);
    const auto bytes = encode(quantize(w, 3, rng));
    CHECK(encoded_bit_length(10, 3) == 62 + kWireHeaderBits);
    CHECK(bytes.size() == (62 + kWireHeaderBits + 7) / 8);
  }

  TEST_CASE("decode inverts encode on random updates") {
    Rng rng(31337);
    for (int trial = 0; trial < 300; ++trial) {
      const auto q = random_update(rng);
      const auto bytes = encode(q);
      CHECK(bytes.size() == (encoded_bit_length(q.d(), q.s()) + 7) / 8);
      CHECK(decode(bytes, q.d()) == q);
    }
  }

  TEST_CASE("decode rejects malformed input") {
    const QuantizedUpdate q(5.0F, {false, true, false}, {3, 4, 0}, 5);
    const auto bytes = encode(q);

    SUBCASE("truncated by one byte") {
      std::vector<std::uint8_t> cut(bytes.begin(), bytes.end() - 1);
      CHECK_THROWS_AS(decode(cut, 3), DecodeError);
    }
    SUBCASE("trailing byte") {
      auto longer = bytes;
      longer.push_back(0);
      CHECK_THROWS_AS(decode(longer, 3), DecodeError);
    }
    SUBCASE("dimension mismatch") { CHECK_THROWS_AS(decode(bytes, 4), DecodeError); }
    SUBCASE("bad magic") {
      auto bad = bytes;
      bad[0] ^= 0xFF;
      CHECK_THROWS_AS(decode(bad, 3), DecodeError);
    }
    SUBCASE("bad version") {
      auto bad = bytes;
      bad[2] = 9;
      CHECK_THROWS_AS(decode(bad, 3), DecodeError);
    }
    SUBCASE("level above s") {
      // Level plane starts after header (88 bits), norm (32) and 3 sign bits;
      // set the first 3-bit level to 7 > s = 5.
      auto bad = bytes;
      const std::size_t start = 88 + 32 + 3;
      for (std::size_t bit = start; bit < start + 3; ++bit) bad[bit / 8] |= std::uint8_t(1U << (bit % 8));
      CHECK_THROWS_AS(decode(bad, 3), DecodeError);
    }
    SUBCASE("empty input") { CHECK_THROWS_AS(decode(std::vector<std::uint8_t>{}, 3), DecodeError); }
  }

  TEST_CASE("wire layout is little-endian and LSB-first") {
    const QuantizedUpdate q(2.0F, {true, false}, {1, 2}, 2);
    const auto bytes = encode(q);
    // 88 header + 32 norm + 2 sign + 2*2 level bits = 126 bits -> 16 bytes.
    REQUIRE(bytes.size() == 16);
    CHECK(bytes[0] == 'A');
    CHECK(bytes[1] == 'Q');
    CHECK(bytes[2] == kWireVersion);
    CHECK(bytes[3] == 2);  // s
    CHECK(bytes[7] == 2);  // d
    // 2.0f = 0x40000000
    CHECK(bytes[11] == 0x00);
    CHECK(bytes[14] == 0x40);
    // bits 120.. : sign(1,0) then levels 01, 10 -> 0b10_01_0_1 = 0x25
    CHECK(bytes[15] == 0x25);
  }
}
