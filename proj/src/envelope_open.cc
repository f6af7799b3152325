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

#include "mlark/envelope_open.h"

#include <sodium.h>

#include <fstream>

#include "absl/strings/str_cat.h"
#include "mlark/encoding.h"
#include "mlark/envelope_internal.h"
#include "mlark/status.h"
#include "json.hpp"

namespace mlark {

HelperKeyPair HelperKeyPair::Generate(std::string key_id) {
  InitCrypto();
  HelperKeyPair kp;
  kp.key_id_ = std::move(key_id);
  kp.public_key_.resize(crypto_box_PUBLICKEYBYTES);
  kp.secret_key_.resize(crypto_box_SECRETKEYBYTES);
  crypto_box_keypair(kp.public_key_.data(), kp.secret_key_.data());
  return kp;
}

absl::StatusOr<HelperKeyPair> HelperKeyPair::FromBytes(
    std::string key_id, std::vector<uint8_t> public_key,
    std::vector<uint8_t> secret_key) {
  InitCrypto();
  if (key_id.empty()) return absl::InvalidArgumentError("empty key_id");
  if (public_key.size() != crypto_box_PUBLICKEYBYTES ||
      secret_key.size() != crypto_box_SECRETKEYBYTES) {
    return absl::InvalidArgumentError("key material has the wrong length");
  }
  std::vector<uint8_t> derived(crypto_box_PUBLICKEYBYTES);
  crypto_scalarmult_base(derived.data(), secret_key.data());
  if (derived != public_key) {
    return absl::InvalidArgumentError("public key does not match secret key");
  }
  HelperKeyPair kp;
  kp.key_id_ = std::move(key_id);
  kp.public_key_ = std::move(public_key);
  kp.secret_key_ = std::move(secret_key);
  return kp;
}

absl::StatusOr<HelperKeyPair> HelperKeyPair::LoadFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) return absl::NotFoundError(absl::StrCat("cannot open key file ", path));
  const auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("key_id") ||
      !j.contains("public_key") || !j.contains("secret_key")) {
    return absl::InvalidArgumentError(absl::StrCat(path, ": malformed key file"));
  }
  MLARK_ASSIGN_OR_RETURN(auto pk, Base64Decode(j.at("public_key").get<std::string>()));
  MLARK_ASSIGN_OR_RETURN(auto sk, Base64Decode(j.at("secret_key").get<std::string>()));
  return FromBytes(j.at("key_id").get<std::string>(), std::move(pk), std::move(sk));
}

absl::Status HelperKeyPair::SaveFile(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) return absl::InternalError(absl::StrCat("cannot write ", path));
  out << nlohmann::json{{"key_id", key_id_},
                        {"public_key", Base64Encode(public_key_)},
                        {"secret_key", Base64Encode(secret_key_)}}
             .dump(2)
      << "\n";
  return out ? absl::OkStatus()
             : absl::InternalError(absl::StrCat("cannot write ", path));
}

absl::StatusOr<std::vector<uint8_t>> HelperKeyPair::Open(
    const SealedReport& sealed) const {
  if (sealed.key_id != key_id_) {
    return absl::FailedPreconditionError(absl::StrCat(
        "report addressed to key '", sealed.key_id, "', this helper holds '",
        key_id_, "'"));
  }
  constexpr size_t kNonce = crypto_aead_xchacha20poly1305_ietf_NPUBBYTES;
  constexpr size_t kTag = crypto_aead_xchacha20poly1305_ietf_ABYTES;
  if (sealed.enc.size() != crypto_box_PUBLICKEYBYTES ||
      sealed.ct.size() < kNonce + kTag) {
    return absl::UnauthenticatedError("sealed report is malformed");
  }
  std::vector<uint8_t> shared(crypto_scalarmult_BYTES);
  if (crypto_scalarmult(shared.data(), secret_key_.data(), sealed.enc.data()) != 0) {
    return absl::UnauthenticatedError("degenerate encapsulated key");
  }
  auto key = envelope_internal::DeriveKey(shared, sealed.enc, public_key_);
  sodium_memzero(shared.data(), shared.size());
  const auto aad = envelope_internal::BoundAd(sealed.key_id, sealed.ad);
  std::vector<uint8_t> plain(sealed.ct.size() - kNonce - kTag);
  unsigned long long plen = 0;
  const int rc = crypto_aead_xchacha20poly1305_ietf_decrypt(
      plain.data(), &plen, nullptr, sealed.ct.data() + kNonce,
      sealed.ct.size() - kNonce, aad.data(), aad.size(), sealed.ct.data(),
      key.data());
  sodium_memzero(key.data(), key.size());
  if (rc != 0) return absl::UnauthenticatedError("authentication failed");
  plain.resize(plen);
  return plain;
}

}  // namespace mlark
