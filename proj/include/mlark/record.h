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

#ifndef MLARK_RECORD_H_
#define MLARK_RECORD_H_

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "mlark/envelope.h"
#include "json.hpp"

namespace mlark {

inline constexpr int kRecordSchemaVersion = 1;

// What one helper decrypts. The two halves of a report pair are identical
// except for `masks`, which carries that helper's mask column aligned with
// `labels`. record_id is random and shared by both halves; helpers fold it
// into the digest the ad server reconciles.
//
// JSON: {v, policy_id, record_id, features: [int], labels: [int],
//        masks: [int64], side_info: {k: v}}
struct PlaintextRecord {
  int v = kRecordSchemaVersion;
  std::string policy_id;
  std::string record_id;
  std::vector<uint8_t> features;
  std::vector<int64_t> labels;
  std::vector<int64_t> masks;
  std::map<std::string, std::string> side_info;

  friend bool operator==(const PlaintextRecord&, const PlaintextRecord&) = default;
};

nlohmann::json RecordToJson(const PlaintextRecord& r);
absl::StatusOr<PlaintextRecord> RecordFromJson(const nlohmann::json& j);

std::vector<uint8_t> EncodeRecord(const PlaintextRecord& r);
absl::StatusOr<PlaintextRecord> DecodeRecord(std::span<const uint8_t> bytes);

// The two sealed halves a browser uploads for one record.
struct ReportPair {
  SealedReport sealed_h0;
  SealedReport sealed_h1;

  const SealedReport& half(int h) const { return h == 0 ? sealed_h0 : sealed_h1; }

  friend bool operator==(const ReportPair&, const ReportPair&) = default;
};

nlohmann::json ReportPairToJson(const ReportPair& p);
absl::StatusOr<ReportPair> ReportPairFromJson(const nlohmann::json& j);

}  // namespace mlark

#endif  // MLARK_RECORD_H_
