// Copyright 2026 The nbrank Authors
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

#ifndef NBRANK_RANDOM_HPP_
#define NBRANK_RANDOM_HPP_

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace nbrank {

// std::mt19937_64 output is fixed by the standard, but the standard
// distributions are not; these helpers keep seeded runs identical across
// standard library implementations.
using Rng = std::mt19937_64;

// Uniform integer in [0, n). Requires n > 0.
inline std::uint64_t UniformIndex(Rng& rng, std::uint64_t n) {
  const std::uint64_t limit = Rng::max() - (Rng::max() % n);
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

// Uniform real in [0, 1) with 53 bits of precision.
inline double UniformUnit(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

template <typename T>
void Shuffle(std::vector<T>& values, Rng& rng) {
  for (std::size_t i = values.size(); i > 1; --i) {
    std::swap(values[i - 1], values[UniformIndex(rng, i)]);
  }
}

}  // namespace nbrank

#endif  // NBRANK_RANDOM_HPP_
