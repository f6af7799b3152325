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

#include "mlark/random.h"

#include <sodium.h>

#include <cassert>
#include <stdexcept>

namespace mlark {

double RandomSource::UniformOpen() {
  // 53 random bits centred in their bucket: (k + 0.5) / 2^53.
  const uint64_t bits = NextU64() >> 11;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

double RandomSource::UniformDouble() {
  return static_cast<double>(NextU64() >> 11) * 0x1.0p-53;
}

uint64_t RandomSource::UniformBelow(uint64_t bound) {
  assert(bound > 0);
  if ((bound & (bound - 1)) == 0) return NextU64() & (bound - 1);
  // Rejection sampling removes modulo bias.
  const uint64_t limit = ~uint64_t{0} - (~uint64_t{0} % bound);
  uint64_t x;
  do {
    x = NextU64();
  } while (x >= limit);
  return x % bound;
}

SecureRandom::SecureRandom() {
  if (sodium_init() < 0) throw std::runtime_error("libsodium init failed");
}

uint64_t SecureRandom::NextU64() {
  if (next_ == buffer_.size()) {
    randombytes_buf(buffer_.data(), sizeof(buffer_));
    next_ = 0;
  }
  return buffer_[next_++];
}

}  // namespace mlark
