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

#include "mlark/ring.h"

#include <bit>
#include <cmath>

#include "absl/strings/str_cat.h"

namespace mlark {

absl::StatusOr<RingSpec> RingSpec::Create(uint64_t modulus) {
  if (modulus < 2 || modulus > kMaxModulus || !std::has_single_bit(modulus)) {
    return absl::InvalidArgumentError(absl::StrCat(
        "ring modulus must be a power of two in [2, 2^62], got ", modulus));
  }
  return RingSpec(modulus);
}

int64_t RingSpec::Reduce(uint64_t x) const {
  const uint64_t r = x & (modulus_ - 1);
  return r >= modulus_ / 2 ? static_cast<int64_t>(r) - static_cast<int64_t>(modulus_)
                           : static_cast<int64_t>(r);
}

double RingSpec::WrapReal(double x) const {
  const double m = static_cast<double>(modulus_);
  const double h = m / 2;
  if (x >= -h && x < h) return x;
  double r = std::fmod(x + h, m);
  if (r < 0) r += m;
  return r - h;
}

std::pair<Share, Share> SecretShare(const RingSpec& ring, int64_t v,
                                    RandomSource& rng) {
  const int64_t s0 = ring.Sample(rng);
  const int64_t s1 = ring.Sub(v, s0);
  return {Share{s0, 0, ring.modulus()}, Share{s1, 1, ring.modulus()}};
}

absl::StatusOr<int64_t> RecoverShares(const RingSpec& ring, const Share& s0,
                                      const Share& s1) {
  if (s0.modulus != ring.modulus() || s1.modulus != ring.modulus()) {
    return absl::FailedPreconditionError("shares come from different rings");
  }
  if (s0.helper_index == s1.helper_index) {
    return absl::FailedPreconditionError("both shares belong to one helper");
  }
  return ring.Add(s0.value, s1.value);
}

MaskPair GenerateMaskPair(const RingSpec& ring, MaskKind kind,
                          RandomSource& rng) {
  const int64_t a0 = ring.Sample(rng);
  return MaskPair{a0, kind == MaskKind::kReal ? 1 - a0 : -a0, kind};
}

int64_t PartialInnerProduct(const RingSpec& ring, std::span<const int64_t> v,
                            std::span<const int64_t> w_share) {
  uint64_t acc = 0;
  const size_t n = std::min(v.size(), w_share.size());
  for (size_t j = 0; j < n; ++j) {
    acc += static_cast<uint64_t>(v[j]) * static_cast<uint64_t>(w_share[j]);
  }
  return ring.Reduce(acc);
}

std::pair<std::vector<int64_t>, std::vector<int64_t>> ShareVector(
    const RingSpec& ring, std::span<const int64_t> w, RandomSource& rng) {
  std::vector<int64_t> a(w.size()), b(w.size());
  for (size_t j = 0; j < w.size(); ++j) {
    auto [s0, s1] = SecretShare(ring, ring.Reduce(w[j]), rng);
    a[j] = s0.value;
    b[j] = s1.value;
  }
  return {std::move(a), std::move(b)};
}

}  // namespace mlark
