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

#ifndef MLARK_PRIVACY_H_
#define MLARK_PRIVACY_H_

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "absl/status/statusor.h"
#include "mlark/random.h"
#include "mlark/ring.h"
#include "json.hpp"

namespace mlark {

enum class DpMode { kGlobal, kLocal, kOff };

std::string_view DpModeName(DpMode mode);
absl::StatusOr<DpMode> ParseDpMode(std::string_view name);

// Publicly declared privacy parameters for one ad server / use case.
// epsilon and gradient_bound may be +infinity (no noise / no clipping).
struct PrivacyPolicy {
  std::string policy_id;
  int64_t k_anonymity = 1;
  double epsilon = 1.0;
  double value_sensitivity = 1.0;    // Delta_y
  double gradient_bound = 1.0;       // psi
  double feature_sensitivity = 1.0;  // Delta, per coordinate for local DP
  DpMode dp_mode = DpMode::kGlobal;
  uint64_t ring_modulus = RingSpec::kDefaultModulus;
  // side_info keys the helpers accept in group-by and filter predicates.
  std::vector<std::string> side_info_keys = {"campaign", "region"};

  // Checks the numeric invariants. dp_mode off is refused unless test_mode.
  absl::Status Validate(bool test_mode) const;

  bool HasSideInfoKey(std::string_view key) const;
};

nlohmann::json PolicyToJson(const PrivacyPolicy& policy);
absl::StatusOr<PrivacyPolicy> PolicyFromJson(const nlohmann::json& j);

// Reads a JSON number, or one of the strings "inf"/"infinity".
absl::StatusOr<double> JsonToExtendedReal(const nlohmann::json& j);
nlohmann::json ExtendedRealToJson(double x);

// Static policy registry document: {"policies": [...], "signature": ...}.
// The signature (Ed25519 over the compact dump of "policies") is optional;
// when a verifying key is supplied it becomes mandatory.
class PolicyRegistry {
 public:
  PolicyRegistry() = default;

  static absl::StatusOr<PolicyRegistry> FromJson(
      const nlohmann::json& doc, bool test_mode,
      std::span<const uint8_t> verify_key = {});
  static absl::StatusOr<PolicyRegistry> LoadFile(
      const std::string& path, bool test_mode,
      std::span<const uint8_t> verify_key = {});

  absl::Status Add(PrivacyPolicy policy, bool test_mode);
  absl::StatusOr<PrivacyPolicy> Find(std::string_view policy_id) const;
  const std::map<std::string, PrivacyPolicy, std::less<>>& policies() const {
    return policies_;
  }

  nlohmann::json ToJson() const;
  // Attaches an Ed25519 signature produced with the 64-byte secret key.
  static nlohmann::json Sign(const nlohmann::json& unsigned_doc,
                             std::span<const uint8_t> secret_key);

 private:
  std::map<std::string, PrivacyPolicy, std::less<>> policies_;
};

struct QuantizationGrid {
  double delta_max = 1.0;
  int bucket_count = 1;

  static absl::StatusOr<QuantizationGrid> Create(double delta_max,
                                                 int bucket_count);
  double step() const { return delta_max / bucket_count; }
  double boundary(int i) const;
};

// One draw from Laplace(0, scale) by inverse CDF on an open-interval uniform.
absl::StatusOr<double> LaplaceSample(double scale, RandomSource& rng);
// Inverse CDF of Laplace(0, scale) at u in (0, 1).
double LaplaceQuantile(double scale, double u);

enum class GateResult { kPass, kBlocked };

// Blocked iff record_count < k.
GateResult KAnonymityGate(int64_t record_count, const PrivacyPolicy& policy);

// Randomised rounding onto the grid, repeated until the result is an integer.
// E[result] = y.
absl::StatusOr<int64_t> QuantizeLabel(double y, const QuantizationGrid& grid,
                                      RandomSource& rng);

// x + Laplace(0, scale) before rounding/clamping.
double PerturbFeature(uint8_t x, double scale, RandomSource& rng);

// Local-DP feature noise: Laplace(0, Delta/epsilon) per coordinate, rounded to
// nearest and clamped to [0, 255]. Returns x unchanged when dp_mode is off or
// epsilon is infinite.
std::vector<uint8_t> NoiseFeatures(std::span<const uint8_t> x,
                                   const PrivacyPolicy& policy,
                                   RandomSource& rng);

// How a per-sample gradient G is bounded before masking.
//   kVerbatim: G / max(psi, |G|)        (norm <= 1)
//   kScaled:   G * min(1, psi / |G|)    (norm <= psi)
// |G| is the Euclidean norm. An infinite psi disables clipping in both modes.
enum class ClipSemantics { kVerbatim, kScaled };

std::string_view ClipSemanticsName(ClipSemantics c);
absl::StatusOr<ClipSemantics> ParseClipSemantics(std::string_view name);

// Factor that multiplies G.
double ClipScale(double norm, double bound, ClipSemantics semantics);

// Largest Euclidean norm a clipped per-sample gradient can have; the
// per-coordinate Laplace scale for gradient sums is this over epsilon.
double ClippedNormBound(double bound, ClipSemantics semantics);

}  // namespace mlark

#endif  // MLARK_PRIVACY_H_
