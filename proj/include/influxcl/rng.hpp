// Copyright 2026 The influxcl Authors.
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

#pragma once

#include <cstdint>
#include <random>

namespace influxcl {

// splitmix64 finalizer; used to derive independent stream seeds from one
// user-facing seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  return Rng(mix_seed(seed, stream));
}

// Named streams so that, e.g., the bandit and the batch sampler never share
// draws.
namespace stream {
inline constexpr std::uint64_t kInit = 1;
inline constexpr std::uint64_t kOrder = 2;
inline constexpr std::uint64_t kBandit = 3;
inline constexpr std::uint64_t kRewardBatch = 4;
inline constexpr std::uint64_t kArnoldiStart = 5;
inline constexpr std::uint64_t kHvpSubsample = 6;
inline constexpr std::uint64_t kProjection = 7;
inline constexpr std::uint64_t kNoise = 8;
inline constexpr std::uint64_t kData = 9;
}  // namespace stream

}  // namespace influxcl
