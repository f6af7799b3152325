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

#include "mlark/privacy.h"

#include <sodium.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "absl/strings/ascii.h"
#include "absl/strings/str_cat.h"
#include "mlark/encoding.h"
#include "mlark/status.h"

namespace mlark {

std::string_view DpModeName(DpMode mode) {
  switch (mode) {
    case DpMode::kGlobal:
      return "global";
    case DpMode::kLocal:
      return "local";
    case DpMode::kOff:
      return "off";
  }
  return "off";
}

absl::StatusOr<DpMode> ParseDpMode(std::string_view name) {
  if (name == "global") return DpMode::kGlobal;
  if (name == "local") return DpMode::kLocal;
  if (name == "off") return DpMode::kOff;
  return absl::InvalidArgumentError(absl::StrCat("unknown dp_mode '", std::string(name), "'"));
}

absl::Status PrivacyPolicy::Validate(bool test_mode) const {
  if (policy_id.empty()) return absl::InvalidArgumentError("empty policy_id");
  if (k_anonymity < 1) {
    return absl::InvalidArgumentError("k_anonymity must be >= 1");
  }
  auto positive = [](double x) { return x > 0 && !std::isnan(x); };
  if (!positive(epsilon) || !positive(value_sensitivity) ||
      !positive(gradient_bound) || !positive(feature_sensitivity)) {
    return absl::InvalidArgumentError(absl::StrCat(
        "policy ", policy_id,
        ": epsilon, sensitivities and gradient bound must be positive"));
  }
  if (dp_mode == DpMode::kOff && !test_mode) {
    return absl::FailedPreconditionError(
        absl::StrCat("policy ", policy_id, ": dp_mode off requires test mode"));
  }
  MLARK_RETURN_IF_ERROR(RingSpec::Create(ring_modulus).status());
  return absl::OkStatus();
}

bool PrivacyPolicy::HasSideInfoKey(std::string_view key) const {
  return std::find(side_info_keys.begin(), side_info_keys.end(), key) !=
         side_info_keys.end();
}

nlohmann::json ExtendedRealToJson(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return x;
}

absl::StatusOr<double> JsonToExtendedReal(const nlohmann::json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const std::string s = absl::AsciiStrToLower(j.get<std::string>());
    if (s == "inf" || s == "infinity" || s == "+inf") {
      return std::numeric_limits<double>::infinity();
    }
    if (s == "-inf" || s == "-infinity") {
      return -std::numeric_limits<double>::infinity();
    }
  }
  return absl::InvalidArgumentError(
      absl::StrCat("expected a number or \"inf\", got ", j.dump()));
}

nlohmann::json PolicyToJson(const PrivacyPolicy& p) {
  return {{"policy_id", p.policy_id},
          {"k", p.k_anonymity},
          {"epsilon", ExtendedRealToJson(p.epsilon)},
          {"value_sensitivity", ExtendedRealToJson(p.value_sensitivity)},
          {"gradient_bound", ExtendedRealToJson(p.gradient_bound)},
          {"feature_sensitivity", ExtendedRealToJson(p.feature_sensitivity)},
          {"dp_mode", DpModeName(p.dp_mode)},
          {"ring_modulus", p.ring_modulus},
          {"side_info_keys", p.side_info_keys}};
}

absl::StatusOr<PrivacyPolicy> PolicyFromJson(const nlohmann::json& j) {
  if (!j.is_object()) return absl::InvalidArgumentError("policy is not an object");
  PrivacyPolicy p;
  try {
    p.policy_id = j.at("policy_id").get<std::string>();
    p.k_anonymity = j.at("k").get<int64_t>();
    MLARK_ASSIGN_OR_RETURN(p.epsilon, JsonToExtendedReal(j.at("epsilon")));
    MLARK_ASSIGN_OR_RETURN(p.value_sensitivity,
                           JsonToExtendedReal(j.at("value_sensitivity")));
    MLARK_ASSIGN_OR_RETURN(p.gradient_bound,
                           JsonToExtendedReal(j.at("gradient_bound")));
    MLARK_ASSIGN_OR_RETURN(p.feature_sensitivity,
                           JsonToExtendedReal(j.at("feature_sensitivity")));
    MLARK_ASSIGN_OR_RETURN(p.dp_mode,
                           ParseDpMode(j.at("dp_mode").get<std::string>()));
    p.ring_modulus = j.value("ring_modulus", RingSpec::kDefaultModulus);
    if (j.contains("side_info_keys")) {
      p.side_info_keys = j.at("side_info_keys").get<std::vector<std::string>>();
    }
  } catch (const nlohmann::json::exception& e) {
    return absl::InvalidArgumentError(absl::StrCat("bad policy: ", e.what()));
  }
  return p;
}

absl::StatusOr<PolicyRegistry> PolicyRegistry::FromJson(
    const nlohmann::json& doc, bool test_mode,
    std::span<const uint8_t> verify_key) {
  const nlohmann::json* list = &doc;
  if (doc.is_object()) {
    if (!doc.contains("policies")) {
      return absl::InvalidArgumentError("registry lacks \"policies\"");
    }
    list = &doc.at("policies");
    if (!verify_key.empty()) {
      if (verify_key.size() != crypto_sign_PUBLICKEYBYTES) {
        return absl::InvalidArgumentError("bad registry verification key");
      }
      if (!doc.contains("signature") || !doc.at("signature").is_string()) {
        return absl::PermissionDeniedError("registry is not signed");
      }
      auto sig = Base64Decode(doc.at("signature").get<std::string>());
      const std::string msg = list->dump();
      if (!sig.ok() || sig->size() != crypto_sign_BYTES ||
          crypto_sign_verify_detached(
              sig->data(), reinterpret_cast<const unsigned char*>(msg.data()),
              msg.size(), verify_key.data()) != 0) {
        return absl::PermissionDeniedError("registry signature is invalid");
      }
    }
  } else if (!verify_key.empty()) {
    return absl::PermissionDeniedError("registry is not signed");
  }
  if (!list->is_array()) {
    return absl::InvalidArgumentError("\"policies\" must be an array");
  }
  PolicyRegistry registry;
  for (const auto& item : *list) {
    MLARK_ASSIGN_OR_RETURN(PrivacyPolicy p, PolicyFromJson(item));
    MLARK_RETURN_IF_ERROR(registry.Add(std::move(p), test_mode));
  }
  return registry;
}

absl::StatusOr<PolicyRegistry> PolicyRegistry::LoadFile(
    const std::string& path, bool test_mode,
    std::span<const uint8_t> verify_key) {
  std::ifstream in(path);
  if (!in) return absl::NotFoundError(absl::StrCat("cannot open ", path));
  nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
  if (doc.is_discarded()) {
    return absl::InvalidArgumentError(absl::StrCat(path, ": invalid JSON"));
  }
  return FromJson(doc, test_mode, verify_key);
}

absl::Status PolicyRegistry::Add(PrivacyPolicy policy, bool test_mode) {
  MLARK_RETURN_IF_ERROR(policy.Validate(test_mode));
  const std::string id = policy.policy_id;
  if (!policies_.emplace(id, std::move(policy)).second) {
    return absl::InvalidArgumentError(absl::StrCat("duplicate policy ", id));
  }
  return absl::OkStatus();
}

absl::StatusOr<PrivacyPolicy> PolicyRegistry::Find(
    std::string_view policy_id) const {
  auto it = policies_.find(policy_id);
  if (it == policies_.end()) {
    return absl::NotFoundError(absl::StrCat("unknown policy '", std::string(policy_id), "'"));
  }
  return it->second;
}

nlohmann::json PolicyRegistry::ToJson() const {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& [id, p] : policies_) list.push_back(PolicyToJson(p));
  return {{"policies", std::move(list)}};
}

nlohmann::json PolicyRegistry::Sign(const nlohmann::json& unsigned_doc,
                                    std::span<const uint8_t> secret_key) {
  nlohmann::json doc = unsigned_doc;
  const std::string msg = doc.at("policies").dump();
  std::vector<uint8_t> sig(crypto_sign_BYTES);
  crypto_sign_detached(sig.data(), nullptr,
                       reinterpret_cast<const unsigned char*>(msg.data()),
                       msg.size(), secret_key.data());
  doc["signature"] = Base64Encode(sig);
  return doc;
}

absl::StatusOr<QuantizationGrid> QuantizationGrid::Create(double delta_max,
                                                          int bucket_count) {
  if (!(delta_max > 0) || !std::isfinite(delta_max) || bucket_count < 1) {
    return absl::InvalidArgumentError(
        "quantization grid needs delta_max > 0 and bucket_count >= 1");
  }
  return QuantizationGrid{delta_max, bucket_count};
}

double QuantizationGrid::boundary(int i) const {
  if (i >= bucket_count) return delta_max;
  return delta_max * i / bucket_count;
}

double LaplaceQuantile(double scale, double u) {
  if (u == 0.5) return 0.0;
  // 2u and 2 - 2u are exact, so both tails keep full relative precision.
  return u < 0.5 ? scale * std::log(2 * u) : -scale * std::log(2 - 2 * u);
}

absl::StatusOr<double> LaplaceSample(double scale, RandomSource& rng) {
  if (!(scale > 0)) {
    return absl::InvalidArgumentError(
        absl::StrCat("Laplace scale must be positive, got ", scale));
  }
  if (std::isinf(scale)) {
    return absl::InvalidArgumentError("Laplace scale must be finite");
  }
  return LaplaceQuantile(scale, rng.UniformOpen());
}

GateResult KAnonymityGate(int64_t record_count, const PrivacyPolicy& policy) {
  return record_count < policy.k_anonymity ? GateResult::kBlocked
                                           : GateResult::kPass;
}

namespace {

// Returns lo with probability (hi - y) / (hi - lo), else hi.
double RoundBetween(double y, double lo, double hi, RandomSource& rng) {
  if (hi <= lo) return lo;
  const double p_lo = (hi - y) / (hi - lo);
  return rng.UniformDouble() < p_lo ? lo : hi;
}

}  // namespace

absl::StatusOr<int64_t> QuantizeLabel(double y, const QuantizationGrid& grid,
                                      RandomSource& rng) {
  if (!(y >= 0 && y <= grid.delta_max)) {
    return absl::OutOfRangeError(absl::StrCat(
        "label ", y, " outside [0, ", grid.delta_max, "]"));
  }
  int i = static_cast<int>(std::floor(y / grid.step()));
  i = std::clamp(i, 0, grid.bucket_count - 1);
  double lo = grid.boundary(i);
  double hi = grid.boundary(i + 1);
  // Floating error in the boundary computation can leave y a hair outside.
  if (y < lo) lo = y;
  if (y > hi) hi = y;
  double q = RoundBetween(y, lo, hi, rng);
  if (q != std::floor(q)) q = RoundBetween(q, std::floor(q), std::ceil(q), rng);
  return static_cast<int64_t>(q);
}

double PerturbFeature(uint8_t x, double scale, RandomSource& rng) {
  return static_cast<double>(x) + LaplaceQuantile(scale, rng.UniformOpen());
}

std::vector<uint8_t> NoiseFeatures(std::span<const uint8_t> x,
                                   const PrivacyPolicy& policy,
                                   RandomSource& rng) {
  std::vector<uint8_t> out(x.begin(), x.end());
  if (policy.dp_mode == DpMode::kOff || std::isinf(policy.epsilon)) return out;
  const double scale = policy.feature_sensitivity / policy.epsilon;
  for (auto& v : out) {
    const double noisy = std::nearbyint(PerturbFeature(v, scale, rng));
    v = static_cast<uint8_t>(std::clamp(noisy, 0.0, 255.0));
  }
  return out;
}

std::string_view ClipSemanticsName(ClipSemantics c) {
  return c == ClipSemantics::kVerbatim ? "verbatim" : "scaled";
}

absl::StatusOr<ClipSemantics> ParseClipSemantics(std::string_view name) {
  if (name == "verbatim") return ClipSemantics::kVerbatim;
  if (name == "scaled") return ClipSemantics::kScaled;
  return absl::InvalidArgumentError(
      absl::StrCat("unknown clip_semantics '", std::string(name), "'"));
}

double ClipScale(double norm, double bound, ClipSemantics semantics) {
  if (std::isinf(bound)) return 1.0;
  if (semantics == ClipSemantics::kVerbatim) return 1.0 / std::max(bound, norm);
  return norm > bound ? bound / norm : 1.0;
}

double ClippedNormBound(double bound, ClipSemantics semantics) {
  if (std::isinf(bound)) return bound;
  return semantics == ClipSemantics::kVerbatim ? 1.0 : bound;
}

}  // namespace mlark
