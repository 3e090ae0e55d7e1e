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

#ifndef ADAQUANT_RNG_HPP_
#define ADAQUANT_RNG_HPP_

#include <cstdint>
#include <random>

namespace adaquant {

using Rng = std::mt19937_64;

// Purpose tags keep the streams of one (client, round) pair independent.
enum class StreamTag : std::uint64_t {
  kDataset = 1,
  kPartition = 2,
  kInit = 3,
  kMinibatch = 4,
  kQuantize = 5,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Independent substream keyed by (master seed, purpose, client, round).
/// Adding clients or rounds never perturbs the draws of existing ones.
inline Rng substream(std::uint64_t master_seed, StreamTag tag,
                     std::uint64_t client = 0, std::uint64_t round = 0) {
  std::uint64_t h = splitmix64(master_seed);
  h = splitmix64(h ^ static_cast<std::uint64_t>(tag));
  h = splitmix64(h ^ client);
  h = splitmix64(h ^ (round + 0x5851F42D4C957F2DULL));
  std::seed_seq seq{static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
  return Rng(seq);
}

}  // namespace adaquant

#endif  // ADAQUANT_RNG_HPP_
