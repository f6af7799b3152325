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

#ifndef MLARK_ENCODING_H_
#define MLARK_ENCODING_H_

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "absl/status/statusor.h"

namespace mlark {

// Idempotent libsodium initialisation.
void InitCrypto();

std::string Base64Encode(std::span<const uint8_t> bytes);
absl::StatusOr<std::vector<uint8_t>> Base64Decode(std::string_view text);

std::string HexEncode(std::span<const uint8_t> bytes);

inline std::span<const uint8_t> AsBytes(std::string_view s) {
  return {reinterpret_cast<const uint8_t*>(s.data()), s.size()};
}

// Shortest decimal string that parses back to exactly the same binary64.
std::string FormatDouble(double x);
absl::StatusOr<double> ParseDouble(std::string_view text);

uint32_t Crc32(std::span<const uint8_t> bytes);

// BLAKE2b-256 as lowercase hex.
std::string DigestHex(std::span<const uint8_t> bytes);

}  // namespace mlark

#endif  // MLARK_ENCODING_H_
