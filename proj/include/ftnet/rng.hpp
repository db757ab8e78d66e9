// Copyright 2026 The ftnet Authors.
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

#include <cmath>
#include <cstdint>
#include <utility>

namespace ftnet {

/// SplitMix64 generator state.
///
/// One step advances `state` by the golden-ratio increment 0x9E3779B97F4A7C15
/// and returns the Stafford "mix13" finalizer of the new state:
///
///     z = state += 0x9E3779B97F4A7C15
///     z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
///     z = (z ^ (z >> 27)) * 0x94D049BB133111EB
///     return z ^ (z >> 31)
///
/// Uniform doubles take the top 53 bits: `(z >> 11) * 2^-53`, so every draw
/// lies in [0, 1) and is exactly representable.
struct RngState {
  std::uint64_t state = 0;

  friend bool operator==(const RngState&, const RngState&) = default;
};

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

/// The SplitMix64 output finalizer, also used as a stateless mixer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Raw 64-bit draw. Pure: returns the value and the successor state.
constexpr std::pair<std::uint64_t, RngState> next_u64(RngState s) noexcept {
  const std::uint64_t advanced = s.state + kGoldenGamma;
  return {mix64(advanced), RngState{advanced}};
}

/// Uniform draw in [0, 1) with 53 bits of mantissa.
constexpr std::pair<double, RngState> prng_next(RngState s) noexcept {
  auto [bits, succ] = next_u64(s);
  return {static_cast<double>(bits >> 11) * 0x1.0p-53, succ};
}

/// Derives an independent stream for (seed, epoch, index).
///
///     state = mix64(mix64(mix64(seed) ^ (epoch + G)) ^ (index + 2G))
///
/// with G the golden gamma. Distinct coordinates give unrelated streams, so
/// per-sample randomness never depends on the order samples are processed.
constexpr RngState derive(std::uint64_t seed, std::uint64_t epoch,
                          std::uint64_t index) noexcept {
  std::uint64_t h = mix64(seed);
  h = mix64(h ^ (epoch + kGoldenGamma));
  h = mix64(h ^ (index + 2 * kGoldenGamma));
  return RngState{h};
}

/// Stream tags keep shuffling, augmentation, dropout and initialization
/// streams apart when they share a user seed.
enum class Stream : std::uint64_t {
  shuffle = 0x53485546464c45ULL,
  augment = 0x4155474d454e54ULL,
  dropout = 0x44524f504f5554ULL,
  init = 0x494e4954ULL,
  split = 0x53504c4954ULL,
  synth = 0x53594e5448ULL,
};

constexpr RngState derive(Stream tag, std::uint64_t seed, std::uint64_t epoch,
                          std::uint64_t index) noexcept {
  return derive(seed ^ static_cast<std::uint64_t>(tag), epoch, index);
}

/// Mutable convenience wrapper over the pure step functions.
class Rng {
 public:
  explicit constexpr Rng(RngState s) noexcept : state_(s) {}

  double uniform() noexcept {
    auto [u, s] = prng_next(state_);
    state_ = s;
    return u;
  }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Multiply-shift on 53 bits; n must be > 0.
  std::uint64_t below(std::uint64_t n) noexcept {
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(n));
  }

  /// Standard normal via Box-Muller (cosine branch only, two draws per call).
  double normal() noexcept {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  RngState state() const noexcept { return state_; }

 private:
  RngState state_;
};

}  // namespace ftnet
