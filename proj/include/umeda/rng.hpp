//
// Copyright 2026 The UMEDA Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>

namespace umeda {

// Counter-based generator. Output i of a stream is
//
//   mix64(seed + i * 0x9E3779B97F4A7C15),   i = 1, 2, ...
//
// where mix64 is the SplitMix64 finalizer. This is the SplitMix64 sequence
// written in counter form, so a stream is a pure function of (seed, counter)
// and identical on every platform with 64-bit unsigned wraparound.
//
// Uniform doubles take the top 53 bits. Gaussian draws use the Box-Muller
// transform on two uniforms, returning the cosine branch first and caching
// the sine branch for the next call.
class Rng {
 public:
  explicit Rng(uint64_t seed) : seed_(seed) {}

  // Stream keyed by a seed and an ordered tuple of integers. Used to give
  // each (round, client) pair its own generator.
  static Rng Derive(uint64_t seed, std::initializer_list<uint64_t> keys) {
    uint64_t h = Mix64(seed ^ 0x6A09E667F3BCC909ULL);
    for (uint64_t k : keys) h = Mix64(h ^ Mix64(k + 0xBB67AE8584CAA73BULL));
    return Rng(h);
  }

  static constexpr uint64_t Mix64(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  uint64_t NextU64() { return Mix64(seed_ + (++counter_) * kGolden); }

  // Uniform on [0, 1).
  double Uniform() { return static_cast<double>(NextU64() >> 11) * 0x1.0p-53; }

  // Uniform integer on [0, n). Lemire-free modulo with rejection so the
  // result is exactly uniform.
  uint64_t UniformInt(uint64_t n) {
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
      x = NextU64();
    } while (x >= limit);
    return x % n;
  }

  double Normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    // 1 - U keeps the log argument in (0, 1].
    const double u1 = 1.0 - Uniform();
    const double u2 = Uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  // Marsaglia-Tsang. For shape < 1 uses Gamma(shape + 1) * U^(1/shape).
  double Gamma(double shape) {
    if (shape < 1.0) {
      const double u = 1.0 - Uniform();
      return Gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    while (true) {
      double x, v;
      do {
        x = Normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = 1.0 - Uniform();
      if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
    }
  }

  uint64_t seed() const { return seed_; }
  uint64_t counter() const { return counter_; }

 private:
  static constexpr uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

  uint64_t seed_;
  uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace umeda
