// Copyright 2026 The mlark Authors
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

#ifndef MLARK_RANDOM_H_
#define MLARK_RANDOM_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <random>

namespace mlark {

// Source of uniform 64-bit words. Shares, masks and noise all draw through
// this interface so tests can inject a seeded generator.
class RandomSource {
 public:
  virtual ~RandomSource() = default;

  virtual uint64_t NextU64() = 0;

  // Uniform on the open interval (0, 1); never returns 0 or 1.
  double UniformOpen();

  // Uniform on [0, 1).
  double UniformDouble();

  // Uniform integer in [0, bound). bound must be positive.
  uint64_t UniformBelow(uint64_t bound);

  bool Bernoulli(double p) { return UniformDouble() < p; }
};

// Operating-system CSPRNG (libsodium randombytes), buffered.
class SecureRandom final : public RandomSource {
 public:
  SecureRandom();
  uint64_t NextU64() override;

 private:
  std::array<uint64_t, 64> buffer_;
  size_t next_ = 64;
};

// Deterministic generator for tests and reproducible experiments.
class SeededRandom final : public RandomSource {
 public:
  explicit SeededRandom(uint64_t seed) : engine_(seed) {}
  uint64_t NextU64() override { return engine_(); }

  // Satisfies UniformRandomBitGenerator so std::shuffle can consume it.
  using result_type = uint64_t;
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }
  result_type operator()() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

// SplitMix64 finalizer; used to derive independent seeds from a parent seed.
constexpr uint64_t MixSeed(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr uint64_t DeriveSeed(uint64_t parent, uint64_t stream) {
  return MixSeed(parent ^ MixSeed(stream + 0x632be59bd9b4e019ULL));
}

// In-place Fisher-Yates shuffle driven by a RandomSource.
template <typename It>
void Shuffle(It first, It last, RandomSource& rng) {
  const auto n = static_cast<uint64_t>(last - first);
  for (uint64_t i = n; i > 1; --i) {
    const uint64_t j = rng.UniformBelow(i);
    std::swap(first[i - 1], first[j]);
  }
}

}  // namespace mlark

#endif  // MLARK_RANDOM_H_
