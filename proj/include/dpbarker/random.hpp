// Copyright 2026 The dpbarker Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DPBARKER_RANDOM_HPP_
#define DPBARKER_RANDOM_HPP_

#include <cmath>
#include <cstdint>
#include <random>

namespace dpbarker {

// One deterministic stream per chain. Equal seeds give equal streams within a
// build; distributions come from the standard library.
using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

inline double standard_normal(Rng& rng) {
  return std::normal_distribution<double>(0.0, 1.0)(rng);
}

// Uniform on the open interval (0, 1).
inline double uniform_open(Rng& rng) {
  double u;
  do {
    u = std::generate_canonical<double, 53>(rng);
  } while (u <= 0.0);
  return u;
}

inline double standard_logistic(Rng& rng) {
  const double u = uniform_open(rng);
  return std::log(u) - std::log1p(-u);
}

}  // namespace dpbarker

#endif  // DPBARKER_RANDOM_HPP_
