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

#ifndef MLARK_ENVELOPE_INTERNAL_H_
#define MLARK_ENVELOPE_INTERNAL_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace mlark::envelope_internal {

std::vector<uint8_t> DeriveKey(std::span<const uint8_t> shared,
                               std::span<const uint8_t> ephemeral_pk,
                               std::span<const uint8_t> recipient_pk);

std::vector<uint8_t> BoundAd(const std::string& key_id,
                             std::span<const uint8_t> ad);

}  // namespace mlark::envelope_internal

#endif  // MLARK_ENVELOPE_INTERNAL_H_
