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

#ifndef MLARK_REPORT_STORE_H_
#define MLARK_REPORT_STORE_H_

#include <cstdint>
#include <cstdio>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "mlark/envelope.h"
#include "mlark/record.h"

namespace mlark {

// One ingested upload. Everything here is either ciphertext or read from the
// cleartext associated data.
struct StoredReport {
  uint64_t receipt = 0;
  std::string policy_id;
  std::string job_kind;
  double arrival_time = 0;  // seconds since the Unix epoch
  // Hash of (policy_id, job_kind); used to bucket reports for batching.
  std::string routing_key;
  ReportPair pair;
};

// Append-only log of report pairs.
//
// On disk (reports.log in the store directory) each record is a frame
//   u32 payload_length | u32 crc32(payload) | payload (JSON)
// with little-endian integers. Opening a store replays frames up to the first
// one that is short or fails its CRC and truncates the file there, so a crash
// mid-append loses at most the record being written.
//
// Duplicate submissions are stored twice.
class ReportStore {
 public:
  static std::unique_ptr<ReportStore> InMemory();
  static absl::StatusOr<std::unique_ptr<ReportStore>> Open(const std::string& dir,
                                                           bool fsync = true);
  ~ReportStore();

  // Validates the pair's cleartext headers and appends it. Receipts start at 1
  // and increase by one per append.
  absl::StatusOr<uint64_t> Append(const ReportPair& pair);

  // Immutable view of every report appended so far.
  using Snapshot = std::vector<std::shared_ptr<const StoredReport>>;
  Snapshot snapshot() const;
  size_t size() const;

  // Bytes discarded from the tail of the log by the last Open().
  uint64_t recovered_truncation() const { return truncated_bytes_; }

  static std::string RoutingKey(std::string_view policy_id,
                                std::string_view job_kind);

 private:
  ReportStore() = default;
  absl::Status Replay(const std::string& path);

  mutable std::mutex mu_;
  Snapshot reports_;
  std::FILE* log_ = nullptr;
  bool fsync_ = true;
  uint64_t truncated_bytes_ = 0;
};

// Frame helpers, exposed for recovery tests.
std::vector<uint8_t> EncodeFrame(std::string_view payload);
nlohmann::json StoredReportToJson(const StoredReport& r);
absl::StatusOr<StoredReport> StoredReportFromJson(const nlohmann::json& j);

}  // namespace mlark

#endif  // MLARK_REPORT_STORE_H_
