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

#ifndef MLARK_ENVELOPE_OPEN_H_
#define MLARK_ENVELOPE_OPEN_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "mlark/envelope.h"

// Secret-key side of the envelope. Linked by the helper service only.

namespace mlark {

class HelperKeyPair {
 public:
  static HelperKeyPair Generate(std::string key_id);
  static absl::StatusOr<HelperKeyPair> FromBytes(std::string key_id,
                                                 std::vector<uint8_t> public_key,
                                                 std::vector<uint8_t> secret_key);

  // Key file: {"key_id", "public_key", "secret_key"} with base64 keys.
  static absl::StatusOr<HelperKeyPair> LoadFile(const std::string& path);
  absl::Status SaveFile(const std::string& path) const;

  const std::string& key_id() const { return key_id_; }
  PublicKey public_key() const { return {key_id_, public_key_}; }

  // Fails with kFailedPrecondition when sealed.key_id is not ours and with
  // kUnauthenticated when authentication fails.
  absl::StatusOr<std::vector<uint8_t>> Open(const SealedReport& sealed) const;

 private:
  HelperKeyPair() = default;
  std::string key_id_;
  std::vector<uint8_t> public_key_;
  std::vector<uint8_t> secret_key_;
};

}  // namespace mlark

#endif  // MLARK_ENVELOPE_OPEN_H_
