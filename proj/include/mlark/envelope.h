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

#ifndef MLARK_ENVELOPE_H_
#define MLARK_ENVELOPE_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "json.hpp"

// Public half of the report envelope: what browsers and the ad server see.
// Opening a report needs envelope_open.h, which only the helper links.
//
// Construction: ephemeral X25519 key agreement with the helper's public key,
// BLAKE2b-256 key derivation over (shared secret || ephemeral pk || recipient
// pk), then XChaCha20-Poly1305 with a random nonce. The authenticated data is
// key_id || 0x00 || ad, so a report cannot be rerouted to another key id.

namespace mlark {

inline constexpr size_t kPublicKeyBytes = 32;

struct PublicKey {
  std::string key_id;
  std::vector<uint8_t> bytes;
};

struct SealedReport {
  std::string key_id;
  std::vector<uint8_t> enc;  // ephemeral public key
  std::vector<uint8_t> ct;   // nonce || ciphertext || tag
  std::vector<uint8_t> ad;   // associated data, readable by anyone

  friend bool operator==(const SealedReport&, const SealedReport&) = default;
};

absl::StatusOr<SealedReport> Seal(const PublicKey& recipient,
                                  std::span<const uint8_t> plaintext,
                                  std::span<const uint8_t> associated_data);

// {key_id, enc, ct, ad} with base64 byte fields.
nlohmann::json SealedReportToJson(const SealedReport& r);
absl::StatusOr<SealedReport> SealedReportFromJson(const nlohmann::json& j);

nlohmann::json PublicKeyToJson(const PublicKey& k);
absl::StatusOr<PublicKey> PublicKeyFromJson(const nlohmann::json& j);

// Associated data carried in clear next to the ciphertext. The ad server uses
// it to route reports by policy and job kind.
struct ReportHeader {
  std::string policy_id;
  int schema_version = 1;
  std::string job_kind = "any";  // aggregate | gradient | any
  std::string nonce;             // per-report hex nonce
};

std::vector<uint8_t> EncodeReportHeader(const ReportHeader& h);
absl::StatusOr<ReportHeader> DecodeReportHeader(std::span<const uint8_t> ad);

}  // namespace mlark

#endif  // MLARK_ENVELOPE_H_
