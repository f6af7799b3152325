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

#include "mlark/browser.h"

#include <cmath>

#include "absl/strings/str_cat.h"
#include "mlark/encoding.h"
#include "mlark/status.h"

namespace mlark {

std::string RandomRecordId(RandomSource& rng) {
  uint8_t id[16];
  for (int i = 0; i < 2; ++i) {
    const uint64_t w = rng.NextU64();
    for (int b = 0; b < 8; ++b) id[i * 8 + b] = static_cast<uint8_t>(w >> (8 * b));
  }
  return HexEncode(id);
}

absl::StatusOr<FinalizedLabel> FinalizeAttribution(const PendingAttribution& p,
                                                   double now,
                                                   const BrowserConfig& config,
                                                   RandomSource& rng) {
  if (!p.conversion_value.has_value() && now < p.expiry) {
    return absl::FailedPreconditionError(absl::StrCat(
        "impression ", p.impression_id, " has not expired yet"));
  }
  FinalizedLabel out;
  if (p.conversion_value.has_value()) {
    const double v = *p.conversion_value;
    if (config.label_grid.has_value()) {
      MLARK_ASSIGN_OR_RETURN(out.label, QuantizeLabel(v, *config.label_grid, rng));
    } else if (v == std::floor(v)) {
      out.label = static_cast<int64_t>(v);
    } else {
      return absl::InvalidArgumentError(absl::StrCat(
          "real-valued conversion ", v, " needs a quantization grid"));
    }
  }
  out.emit_time = now + rng.UniformDouble() * config.delay_window_seconds;
  return out;
}

PlaintextRecord MaskedRecord::ForHelper(int h) const {
  PlaintextRecord r;
  r.policy_id = policy_id;
  r.record_id = record_id;
  r.features = features;
  r.labels.assign(candidate_labels.begin(), candidate_labels.end());
  const auto& masks = h == 0 ? masks_h0 : masks_h1;
  r.masks.assign(masks.begin(), masks.end());
  r.side_info = side_info;
  return r;
}

absl::StatusOr<int64_t> DrawFakeLabel(int64_t real_label,
                                      const LabelSpace& space,
                                      RandomSource& rng) {
  if (space.num_classes < 2) {
    return absl::InvalidArgumentError(
        "label space of size 1 leaves no room for a fake label");
  }
  if (real_label < 0 || real_label >= space.num_classes) {
    return absl::InvalidArgumentError(absl::StrCat(
        "label ", real_label, " outside [0, ", space.num_classes, ")"));
  }
  if (real_label != 0) return 0;
  return 1 + static_cast<int64_t>(rng.UniformBelow(space.num_classes - 1));
}

namespace {

MaskedRecord Assemble(std::string policy_id, std::string record_id,
                      std::span<const uint8_t> features, int64_t first_label,
                      int64_t second_label, MaskKind first_kind,
                      MaskKind second_kind, const RingSpec& ring,
                      std::map<std::string, std::string> side_info,
                      RandomSource& rng) {
  const MaskPair m_first = GenerateMaskPair(ring, first_kind, rng);
  const MaskPair m_second = GenerateMaskPair(ring, second_kind, rng);
  MaskedRecord r;
  r.policy_id = std::move(policy_id);
  r.record_id = std::move(record_id);
  r.features.assign(features.begin(), features.end());
  r.side_info = std::move(side_info);
  // Random order; masks follow their labels.
  const bool swap = rng.Bernoulli(0.5);
  const int a = swap ? 1 : 0;
  const int b = 1 - a;
  r.candidate_labels[a] = first_label;
  r.masks_h0[a] = m_first.mask_h0;
  r.masks_h1[a] = m_first.mask_h1;
  r.candidate_labels[b] = second_label;
  r.masks_h0[b] = m_second.mask_h0;
  r.masks_h1[b] = m_second.mask_h1;
  return r;
}

}  // namespace

absl::StatusOr<MaskedRecord> BuildMaskedRecord(
    std::span<const uint8_t> features, int64_t real_label,
    const PrivacyPolicy& policy, const LabelSpace& space,
    std::map<std::string, std::string> side_info, RandomSource& rng) {
  MLARK_ASSIGN_OR_RETURN(const RingSpec ring, RingSpec::Create(policy.ring_modulus));
  MLARK_ASSIGN_OR_RETURN(const int64_t fake, DrawFakeLabel(real_label, space, rng));
  return Assemble(policy.policy_id, RandomRecordId(rng), features, real_label,
                  fake, MaskKind::kReal, MaskKind::kFake, ring,
                  std::move(side_info), rng);
}

absl::StatusOr<MaskedRecord> BuildFakeRecord(
    std::span<const std::vector<uint8_t>> feature_pool, size_t feature_dim,
    const PrivacyPolicy& policy, const LabelSpace& space,
    const BrowserConfig& config, std::map<std::string, std::string> side_info,
    RandomSource& rng) {
  MLARK_ASSIGN_OR_RETURN(const RingSpec ring, RingSpec::Create(policy.ring_modulus));
  std::vector<uint8_t> features;
  if (config.fake_features == FakeFeatureSource::kResamplePool &&
      !feature_pool.empty()) {
    features = feature_pool[rng.UniformBelow(feature_pool.size())];
  } else {
    features.resize(feature_dim);
    for (auto& b : features) b = static_cast<uint8_t>(rng.UniformBelow(256));
  }
  // Same label distribution as a real record, but no candidate is real.
  if (space.num_classes < 2) {
    return absl::InvalidArgumentError("label space of size 1");
  }
  const auto pseudo = static_cast<int64_t>(rng.UniformBelow(space.num_classes));
  MLARK_ASSIGN_OR_RETURN(const int64_t other, DrawFakeLabel(pseudo, space, rng));
  return Assemble(policy.policy_id, RandomRecordId(rng), features, pseudo, other,
                  MaskKind::kFake, MaskKind::kFake, ring, std::move(side_info),
                  rng);
}

absl::StatusOr<ReportPair> EmitReportPair(const MaskedRecord& record,
                                          const std::array<PublicKey, 2>& keys,
                                          const PrivacyPolicy& policy,
                                          std::string_view job_kind,
                                          RandomSource& rng) {
  MaskedRecord noised = record;
  if (policy.dp_mode == DpMode::kLocal) {
    noised.features = NoiseFeatures(record.features, policy, rng);
  }
  ReportHeader header;
  header.policy_id = policy.policy_id;
  header.job_kind = std::string(job_kind);
  header.nonce = RandomRecordId(rng);
  const auto ad = EncodeReportHeader(header);
  ReportPair pair;
  MLARK_ASSIGN_OR_RETURN(pair.sealed_h0,
                         Seal(keys[0], EncodeRecord(noised.ForHelper(0)), ad));
  MLARK_ASSIGN_OR_RETURN(pair.sealed_h1,
                         Seal(keys[1], EncodeRecord(noised.ForHelper(1)), ad));
  return pair;
}

BrowserEmulator::BrowserEmulator(PrivacyPolicy policy, LabelSpace space,
                                 std::array<PublicKey, 2> keys,
                                 BrowserConfig config, uint64_t seed)
    : policy_(std::move(policy)),
      space_(space),
      keys_(std::move(keys)),
      config_(std::move(config)),
      rng_(std::make_unique<SeededRandom>(seed)) {}

BrowserEmulator::BrowserEmulator(PrivacyPolicy policy, LabelSpace space,
                                 std::array<PublicKey, 2> keys,
                                 BrowserConfig config)
    : policy_(std::move(policy)),
      space_(space),
      keys_(std::move(keys)),
      config_(std::move(config)),
      rng_(std::make_unique<SecureRandom>()) {}

void BrowserEmulator::RecordImpression(PendingAttribution p) {
  const std::string id = p.impression_id;
  pending_.insert_or_assign(id, std::move(p));
}

absl::Status BrowserEmulator::RecordConversion(const std::string& impression_id,
                                               double value) {
  auto it = pending_.find(impression_id);
  if (it == pending_.end()) {
    return absl::NotFoundError(absl::StrCat("no pending impression ", impression_id));
  }
  it->second.conversion_value = value;
  return absl::OkStatus();
}

absl::Status BrowserEmulator::FinalizeOne(const PendingAttribution& p,
                                          double now,
                                          std::vector<Emission>& out) {
  MLARK_ASSIGN_OR_RETURN(const FinalizedLabel fin,
                         FinalizeAttribution(p, now, config_, *rng_));
  MLARK_ASSIGN_OR_RETURN(MaskedRecord record,
                         BuildMaskedRecord(p.features, fin.label, policy_, space_,
                                           p.side_info, *rng_));
  Emission real;
  MLARK_ASSIGN_OR_RETURN(real.pair, EmitReportPair(record, keys_, policy_,
                                                   config_.job_kind, *rng_));
  real.emit_time = fin.emit_time;
  real.truth = Sample{p.features, fin.label};
  out.push_back(std::move(real));

  pool_.push_back(p.features);
  while (pool_.size() > config_.feature_pool_size) pool_.pop_front();

  if (config_.fake_rate > 0 && rng_->Bernoulli(config_.fake_rate)) {
    const std::vector<std::vector<uint8_t>> pool(pool_.begin(), pool_.end());
    MLARK_ASSIGN_OR_RETURN(
        MaskedRecord fake,
        BuildFakeRecord(pool, p.features.size(), policy_, space_, config_,
                        p.side_info, *rng_));
    Emission e;
    MLARK_ASSIGN_OR_RETURN(e.pair, EmitReportPair(fake, keys_, policy_,
                                                  config_.job_kind, *rng_));
    e.emit_time = now + rng_->UniformDouble() * config_.delay_window_seconds;
    e.is_fake = true;
    out.push_back(std::move(e));
  }
  return absl::OkStatus();
}

absl::StatusOr<std::vector<Emission>> BrowserEmulator::Advance(double now) {
  std::vector<Emission> out;
  for (auto it = pending_.begin(); it != pending_.end();) {
    if (it->second.conversion_value.has_value() || now >= it->second.expiry) {
      MLARK_RETURN_IF_ERROR(FinalizeOne(it->second, now, out));
      it = pending_.erase(it);
    } else {
      ++it;
    }
  }
  return out;
}

absl::StatusOr<std::vector<Emission>> BrowserEmulator::Flush(double now) {
  for (auto& [id, p] : pending_) p.expiry = std::min(p.expiry, now);
  return Advance(now);
}

}  // namespace mlark
