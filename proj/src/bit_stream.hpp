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

#ifndef ADAQUANT_SRC_BIT_STREAM_HPP_
#define ADAQUANT_SRC_BIT_STREAM_HPP_

#include <cassert>
#include <cstdint>
#include <span>
#include <vector>

namespace adaquant::detail {

// LSB-first bit packer. Bit k of the stream lives in byte k / 8 at
// position k % 8; multi-bit values are written least significant bit first.
class BitWriter {
 public:
  explicit BitWriter(std::vector<std::uint8_t>& out) : out_(out) {}

  void put(std::uint64_t value, unsigned width) {
    assert(width <= 64);
    for (unsigned i = 0; i < width; ++i) {
      if (fill_ == 0) out_.push_back(0);
      if ((value >> i) & 1U) out_.back() |= static_cast<std::uint8_t>(1U << fill_);
      fill_ = (fill_ + 1) & 7U;
    }
  }

  void put_bytes_le(std::uint64_t value, unsigned n_bytes) { put(value, 8 * n_bytes); }

 private:
  std::vector<std::uint8_t>& out_;
  unsigned fill_ = 0;
};

class BitReader {
 public:
  explicit BitReader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint64_t bits_left() const { return 8 * in_.size() - pos_; }

  // Caller checks bits_left() first.
  std::uint64_t get(unsigned width) {
    assert(width <= 64 && width <= bits_left());
    std::uint64_t value = 0;
    for (unsigned i = 0; i < width; ++i, ++pos_) {
      const std::uint64_t bit = (in_[pos_ >> 3] >> (pos_ & 7U)) & 1U;
      value |= bit << i;
    }
    return value;
  }

 private:
  std::span<const std::uint8_t> in_;
  std::uint64_t pos_ = 0;
};

}  // namespace adaquant::detail

#endif  // ADAQUANT_SRC_BIT_STREAM_HPP_
