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

#include "mlark/envelope.h"

#include <sodium.h>

#include "absl/strings/str_cat.h"
#include "mlark/encoding.h"
#include "mlark/envelope_internal.h"
#include "mlark/status.h"

namespace mlark {
namespace envelope_internal {

std::vector<uint8_t> DeriveKey(std::span<const uint8_t> shared,
                               std::span<const uint8_t> ephemeral_pk,
                               std::span<const uint8_t> recipient_pk) {
  std::vector<uint8_t> key(crypto_aead_xchacha20poly1305_ietf_KEYBYTES);
  crypto_generichash_state st;
  crypto_generichash_init(&st, nullptr, 0, key.size());
  crypto_generichash_update(&st, shared.data(), shared.size());
  crypto_generichash_update(&st, ephemeral_pk.data(), ephemeral_pk.size());
  crypto_generichash_update(&st, recipient_pk.data(), recipient_pk.size());
  crypto_generichash_final(&st, key.data(), key.size());
  return key;
}

std::vector<uint8_t> BoundAd(const std::string& key_id,
                             std::span<const uint8_t> ad) {
  std::vector<uint8_t> out(key_id.begin(), key_id.end());
  out.push_back(0);
  out.insert(out.end(), ad.begin(), ad.end());
  return out;
}

}  // namespace envelope_internal

absl::StatusOr<SealedReport> Seal(const PublicKey& recipient,
                                  std::span<const uint8_t> plaintext,
                                  std::span<const uint8_t> associated_data) {
  InitCrypto();
  if (recipient.bytes.size() != crypto_box_PUBLICKEYBYTES) {
    return absl::InvalidArgumentError(absl::StrCat(
        "malformed public key for ", recipient.key_id, ": ",
        recipient.bytes.size(), " bytes"));
  }
  std::vector<uint8_t> epk(crypto_box_PUBLICKEYBYTES);
  std::vector<uint8_t> esk(crypto_box_SECRETKEYBYTES);
  crypto_box_keypair(epk.data(), esk.data());
  std::vector<uint8_t> shared(crypto_scalarmult_BYTES);
  const int rc =
      crypto_scalarmult(shared.data(), esk.data(), recipient.bytes.data());
  sodium_memzero(esk.data(), esk.size());
  if (rc != 0) {
    return absl::InvalidArgumentError(
        absl::StrCat("public key for ", recipient.key_id, " is degenerate"));
  }
  auto key = envelope_internal::DeriveKey(shared, epk, recipient.bytes);
  sodium_memzero(shared.data(), shared.size());

  const auto aad = envelope_internal::BoundAd(recipient.key_id, associated_data);
  constexpr size_t kNonce = crypto_aead_xchacha20poly1305_ietf_NPUBBYTES;
  SealedReport out;
  out.key_id = recipient.key_id;
  out.enc = std::move(epk);
  out.ad.assign(associated_data.begin(), associated_data.end());
  out.ct.resize(kNonce + plaintext.size() +
                crypto_aead_xchacha20poly1305_ietf_ABYTES);
  randombytes_buf(out.ct.data(), kNonce);
  unsigned long long clen = 0;
  crypto_aead_xchacha20poly1305_ietf_encrypt(
      out.ct.data() + kNonce, &clen, plaintext.data(), plaintext.size(),
      aad.data(), aad.size(), nullptr, out.ct.data(), key.data());
  sodium_memzero(key.data(), key.size());
  out.ct.resize(kNonce + clen);
  return out;
}

nlohmann::json SealedReportToJson(const SealedReport& r) {
  return {{"key_id", r.key_id},
          {"enc", Base64Encode(r.enc)},
          {"ct", Base64Encode(r.ct)},
          {"ad", Base64Encode(r.ad)}};
}

absl::StatusOr<SealedReport> SealedReportFromJson(const nlohmann::json& j) {
  if (!j.is_object()) return absl::InvalidArgumentError("sealed report is not an object");
  for (const char* field : {"key_id", "enc", "ct", "ad"}) {
    if (!j.contains(field) || !j.at(field).is_string()) {
      return absl::InvalidArgumentError(
          absl::StrCat("sealed report lacks string field '", field, "'"));
    }
  }
  SealedReport r;
  r.key_id = j.at("key_id").get<std::string>();
  MLARK_ASSIGN_OR_RETURN(r.enc, Base64Decode(j.at("enc").get<std::string>()));
  MLARK_ASSIGN_OR_RETURN(r.ct, Base64Decode(j.at("ct").get<std::string>()));
  MLARK_ASSIGN_OR_RETURN(r.ad, Base64Decode(j.at("ad").get<std::string>()));
  return r;
}

nlohmann::json PublicKeyToJson(const PublicKey& k) {
  return {{"key_id", k.key_id}, {"public_key", Base64Encode(k.bytes)}};
}

absl::StatusOr<PublicKey> PublicKeyFromJson(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("key_id") || !j.contains("public_key")) {
    return absl::InvalidArgumentError("public key document lacks fields");
  }
  PublicKey k;
  k.key_id = j.at("key_id").get<std::string>();
  MLARK_ASSIGN_OR_RETURN(k.bytes,
                         Base64Decode(j.at("public_key").get<std::string>()));
  if (k.bytes.size() != kPublicKeyBytes) {
    return absl::InvalidArgumentError("public key has the wrong length");
  }
  return k;
}

std::vector<uint8_t> EncodeReportHeader(const ReportHeader& h) {
  const std::string s = nlohmann::json{{"policy_id", h.policy_id},
                                       {"schema", h.schema_version},
                                       {"job_kind", h.job_kind},
                                       {"nonce", h.nonce}}
                            .dump();
  return {s.begin(), s.end()};
}

absl::StatusOr<ReportHeader> DecodeReportHeader(std::span<const uint8_t> ad) {
  const auto j = nlohmann::json::parse(ad.begin(), ad.end(), nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    return absl::InvalidArgumentError("associated data is not a JSON object");
  }
  ReportHeader h;
  try {
    h.policy_id = j.at("policy_id").get<std::string>();
    h.schema_version = j.at("schema").get<int>();
    h.job_kind = j.value("job_kind", std::string("any"));
    h.nonce = j.value("nonce", std::string());
  } catch (const nlohmann::json::exception& e) {
    return absl::InvalidArgumentError(absl::StrCat("bad report header: ", e.what()));
  }
  return h;
}

}  // namespace mlark
