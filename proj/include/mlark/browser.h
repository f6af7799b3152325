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

#ifndef MLARK_BROWSER_H_
#define MLARK_BROWSER_H_

#include <array>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "mlark/envelope.h"
#include "mlark/model.h"
#include "mlark/privacy.h"
#include "mlark/random.h"
#include "mlark/record.h"
#include "mlark/ring.h"

namespace mlark {

// Labels are the integers [0, num_classes).
struct LabelSpace {
  int num_classes = 2;
};

enum class FakeFeatureSource { kResamplePool, kRandomBytes };

struct BrowserConfig {
  // Extra emission delay, uniform in [0, delay_window_seconds].
  double delay_window_seconds = 60.0;
  // Probability of injecting one fake record per real record.
  double fake_rate = 0.5;
  FakeFeatureSource fake_features = FakeFeatureSource::kResamplePool;
  size_t feature_pool_size = 64;
  // Set for real-valued conversions; values are quantized onto it.
  std::optional<QuantizationGrid> label_grid;
  // Associated-data hint telling the ad server what the record may feed.
  std::string job_kind = "any";
};

struct PendingAttribution {
  std::string impression_id;
  std::vector<uint8_t> features;
  double expiry = 0;  // simulated seconds
  std::optional<double> conversion_value;
  std::map<std::string, std::string> side_info;
};

struct FinalizedLabel {
  int64_t label = 0;
  double emit_time = 0;
};

// Conversion label if one was recorded (quantized onto config.label_grid when
// set), else the default 0. Fails if called before expiry with no conversion.
absl::StatusOr<FinalizedLabel> FinalizeAttribution(const PendingAttribution& p,
                                                   double now,
                                                   const BrowserConfig& config,
                                                   RandomSource& rng);

// Two candidate labels in random order with masks aligned to them. Nothing in
// the record says which candidate (if any) is real.
struct MaskedRecord {
  std::string policy_id;
  std::string record_id;
  std::vector<uint8_t> features;
  std::array<int64_t, 2> candidate_labels{};
  std::array<int64_t, 2> masks_h0{};
  std::array<int64_t, 2> masks_h1{};
  std::map<std::string, std::string> side_info;

  // The plaintext helper h decrypts.
  PlaintextRecord ForHelper(int h) const;
};

// Fake label for a real label: uniform over the space minus the real label,
// restricted so that one candidate is 0. When real != 0 that forces fake = 0.
absl::StatusOr<int64_t> DrawFakeLabel(int64_t real_label,
                                      const LabelSpace& space,
                                      RandomSource& rng);

absl::StatusOr<MaskedRecord> BuildMaskedRecord(
    std::span<const uint8_t> features, int64_t real_label,
    const PrivacyPolicy& policy, const LabelSpace& space,
    std::map<std::string, std::string> side_info, RandomSource& rng);

// A record whose candidates all carry fake masks; net contribution 0.
absl::StatusOr<MaskedRecord> BuildFakeRecord(
    std::span<const std::vector<uint8_t>> feature_pool, size_t feature_dim,
    const PrivacyPolicy& policy, const LabelSpace& space,
    const BrowserConfig& config, std::map<std::string, std::string> side_info,
    RandomSource& rng);

// Applies local-DP feature noise once (when policy.dp_mode is local), then
// seals each helper's plaintext under that helper's key.
absl::StatusOr<ReportPair> EmitReportPair(const MaskedRecord& record,
                                          const std::array<PublicKey, 2>& keys,
                                          const PrivacyPolicy& policy,
                                          std::string_view job_kind,
                                          RandomSource& rng);

// One upload. `truth` is set for real records and lets experiments compare
// against training on the plaintext; it never leaves the harness.
struct Emission {
  ReportPair pair;
  double emit_time = 0;
  bool is_fake = false;
  std::optional<Sample> truth;
};

// One simulated browser: tracks impressions, finalizes them at expiry or on
// conversion, injects fakes, and emits sealed pairs.
class BrowserEmulator {
 public:
  BrowserEmulator(PrivacyPolicy policy, LabelSpace space,
                  std::array<PublicKey, 2> keys, BrowserConfig config,
                  uint64_t seed);
  // Uses the OS CSPRNG.
  BrowserEmulator(PrivacyPolicy policy, LabelSpace space,
                  std::array<PublicKey, 2> keys, BrowserConfig config);

  void RecordImpression(PendingAttribution p);
  absl::Status RecordConversion(const std::string& impression_id, double value);

  // Finalizes everything expired or converted by `now`.
  absl::StatusOr<std::vector<Emission>> Advance(double now);
  // Finalizes everything regardless of expiry.
  absl::StatusOr<std::vector<Emission>> Flush(double now);

  size_t pending() const { return pending_.size(); }

 private:
  absl::Status FinalizeOne(const PendingAttribution& p, double now,
                           std::vector<Emission>& out);

  PrivacyPolicy policy_;
  LabelSpace space_;
  std::array<PublicKey, 2> keys_;
  BrowserConfig config_;
  std::unique_ptr<RandomSource> rng_;
  std::map<std::string, PendingAttribution> pending_;
  std::deque<std::vector<uint8_t>> pool_;
};

std::string RandomRecordId(RandomSource& rng);

}  // namespace mlark

#endif  // MLARK_BROWSER_H_
