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

#include "mlark/record.h"

#include "absl/strings/str_cat.h"
#include "mlark/status.h"

namespace mlark {

nlohmann::json RecordToJson(const PlaintextRecord& r) {
  nlohmann::json features = nlohmann::json::array();
  for (uint8_t b : r.features) features.push_back(int{b});
  return {{"v", r.v},
          {"policy_id", r.policy_id},
          {"record_id", r.record_id},
          {"features", std::move(features)},
          {"labels", r.labels},
          {"masks", r.masks},
          {"side_info", r.side_info}};
}

absl::StatusOr<PlaintextRecord> RecordFromJson(const nlohmann::json& j) {
  if (!j.is_object()) return absl::InvalidArgumentError("record is not an object");
  PlaintextRecord r;
  try {
    r.v = j.at("v").get<int>();
    if (r.v != kRecordSchemaVersion) {
      return absl::InvalidArgumentError(
          absl::StrCat("unsupported record schema v", r.v));
    }
    r.policy_id = j.at("policy_id").get<std::string>();
    r.record_id = j.value("record_id", std::string());
    for (const auto& f : j.at("features")) {
      const int v = f.get<int>();
      if (v < 0 || v > 255) {
        return absl::InvalidArgumentError("feature outside [0, 255]");
      }
      r.features.push_back(static_cast<uint8_t>(v));
    }
    r.labels = j.at("labels").get<std::vector<int64_t>>();
    r.masks = j.at("masks").get<std::vector<int64_t>>();
    if (j.contains("side_info")) {
      r.side_info = j.at("side_info").get<std::map<std::string, std::string>>();
    }
  } catch (const nlohmann::json::exception& e) {
    return absl::InvalidArgumentError(absl::StrCat("bad record: ", e.what()));
  }
  if (r.labels.empty() || r.labels.size() != r.masks.size()) {
    return absl::InvalidArgumentError("labels and masks must align");
  }
  return r;
}

std::vector<uint8_t> EncodeRecord(const PlaintextRecord& r) {
  const std::string s = RecordToJson(r).dump();
  return {s.begin(), s.end()};
}

absl::StatusOr<PlaintextRecord> DecodeRecord(std::span<const uint8_t> bytes) {
  const auto j = nlohmann::json::parse(bytes.begin(), bytes.end(), nullptr, false);
  if (j.is_discarded()) return absl::InvalidArgumentError("record is not JSON");
  return RecordFromJson(j);
}

nlohmann::json ReportPairToJson(const ReportPair& p) {
  return {{"sealed_h0", SealedReportToJson(p.sealed_h0)},
          {"sealed_h1", SealedReportToJson(p.sealed_h1)}};
}

absl::StatusOr<ReportPair> ReportPairFromJson(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("sealed_h0") || !j.contains("sealed_h1")) {
    return absl::InvalidArgumentError("report pair needs sealed_h0 and sealed_h1");
  }
  ReportPair p;
  MLARK_ASSIGN_OR_RETURN(p.sealed_h0, SealedReportFromJson(j.at("sealed_h0")));
  MLARK_ASSIGN_OR_RETURN(p.sealed_h1, SealedReportFromJson(j.at("sealed_h1")));
  return p;
}

}  // namespace mlark
