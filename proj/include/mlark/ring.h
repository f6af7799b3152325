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

#ifndef MLARK_RING_H_
#define MLARK_RING_H_

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "absl/status/statusor.h"
#include "mlark/random.h"

namespace mlark {

// The integer ring Z/mZ for a power-of-two modulus m. Elements are stored as
// the signed canonical representative in [-m/2, m/2).
//
// Because m divides 2^64, sums and products can be formed with wrapping
// uint64 arithmetic and reduced once at the end.
class RingSpec {
 public:
  static constexpr uint64_t kDefaultModulus = uint64_t{1} << 16;
  static constexpr uint64_t kMaxModulus = uint64_t{1} << 62;

  // Fails unless 2 <= modulus <= 2^62 and modulus is a power of two.
  static absl::StatusOr<RingSpec> Create(uint64_t modulus = kDefaultModulus);

  uint64_t modulus() const { return modulus_; }
  int64_t half() const { return static_cast<int64_t>(modulus_ / 2); }

  // Canonical representative of any integer (taken mod 2^64) in this ring.
  int64_t Reduce(uint64_t x) const;
  int64_t Reduce(int64_t x) const { return Reduce(static_cast<uint64_t>(x)); }

  bool IsCanonical(int64_t x) const { return x >= -half() && x < half(); }

  int64_t Add(int64_t a, int64_t b) const {
    return Reduce(static_cast<uint64_t>(a) + static_cast<uint64_t>(b));
  }
  int64_t Sub(int64_t a, int64_t b) const {
    return Reduce(static_cast<uint64_t>(a) - static_cast<uint64_t>(b));
  }
  int64_t Mul(int64_t a, int64_t b) const {
    return Reduce(static_cast<uint64_t>(a) * static_cast<uint64_t>(b));
  }

  // Uniform canonical element.
  int64_t Sample(RandomSource& rng) const { return Reduce(rng.NextU64()); }

  // Wraps a real number into [-m/2, m/2) modulo m; used when lifting noisy
  // partial sums back into the ring's range.
  double WrapReal(double x) const;

  friend bool operator==(const RingSpec&, const RingSpec&) = default;

 private:
  explicit RingSpec(uint64_t modulus) : modulus_(modulus) {}
  uint64_t modulus_;
};

struct Share {
  int64_t value = 0;
  int helper_index = 0;  // 0 or 1
  uint64_t modulus = RingSpec::kDefaultModulus;
};

// Splits v into (s0, s1) with s0 uniform and s0 + s1 = v (mod m).
std::pair<Share, Share> SecretShare(const RingSpec& ring, int64_t v,
                                    RandomSource& rng);

// (s0 + s1) mod m. Fails when the shares come from different rings or the
// same helper.
absl::StatusOr<int64_t> RecoverShares(const RingSpec& ring, const Share& s0,
                                      const Share& s1);

enum class MaskKind { kReal, kFake };

// Per-candidate multipliers for the two helpers. The constraint holds over the
// integers, not only mod m: real pairs sum to 1, fake pairs to 0.
struct MaskPair {
  int64_t mask_h0 = 0;
  int64_t mask_h1 = 0;
  MaskKind kind = MaskKind::kReal;

  int64_t ForHelper(int h) const { return h == 0 ? mask_h0 : mask_h1; }
};

MaskPair GenerateMaskPair(const RingSpec& ring, MaskKind kind,
                          RandomSource& rng);

// Helper-side partial of an inner product <v, w> where w arrives
// coordinate-wise additively shared: sum_j v_j * w_share_j (mod m).
int64_t PartialInnerProduct(const RingSpec& ring, std::span<const int64_t> v,
                            std::span<const int64_t> w_share);

// Shares every coordinate of w; returns the two share vectors.
std::pair<std::vector<int64_t>, std::vector<int64_t>> ShareVector(
    const RingSpec& ring, std::span<const int64_t> w, RandomSource& rng);

}  // namespace mlark

#endif  // MLARK_RING_H_
