/*
 * Copyright 2026 The coopsgd Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <random>

namespace coopsgd {

using Rng = std::mt19937_64;

// SplitMix64 finalizer.
constexpr std::uint64_t Mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Stream `stream` of the family rooted at `seed`. Streams are derived
// independently of each other, so adding stream n+1 leaves streams 0..n
// untouched.
inline Rng MakeStream(std::uint64_t seed, std::uint64_t stream) {
  return Rng(Mix64(Mix64(seed) ^ Mix64(stream + 0x632be59bd9b4e019ULL)));
}

// Stream tags for consumers other than per-worker gradient draws.
inline constexpr std::uint64_t kTimelineStream = 0x7100000000000000ULL;
inline constexpr std::uint64_t kDataStream = 0x7200000000000000ULL;

}  // namespace coopsgd
