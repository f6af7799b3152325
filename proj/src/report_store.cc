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

#include "mlark/report_store.h"

#include <unistd.h>

#include <chrono>
#include <filesystem>
#include <fstream>

#include "absl/strings/str_cat.h"
#include "mlark/encoding.h"
#include "mlark/status.h"

namespace mlark {

namespace {

constexpr char kLogName[] = "reports.log";
constexpr uint32_t kMaxFrame = 1u << 30;

void PutU32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

uint32_t GetU32(const uint8_t* p) {
  return uint32_t{p[0]} | uint32_t{p[1]} << 8 | uint32_t{p[2]} << 16 |
         uint32_t{p[3]} << 24;
}

double NowSeconds() {
  return std::chrono::duration<double>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

}  // namespace

std::vector<uint8_t> EncodeFrame(std::string_view payload) {
  std::vector<uint8_t> out;
  out.reserve(payload.size() + 8);
  PutU32(out, static_cast<uint32_t>(payload.size()));
  PutU32(out, Crc32(AsBytes(payload)));
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

std::string ReportStore::RoutingKey(std::string_view policy_id,
                                    std::string_view job_kind) {
  return DigestHex(AsBytes(absl::StrCat(std::string(policy_id), "\n",
                                        std::string(job_kind))))
      .substr(0, 16);
}

nlohmann::json StoredReportToJson(const StoredReport& r) {
  return {{"receipt", r.receipt},           {"policy_id", r.policy_id},
          {"job_kind", r.job_kind},         {"arrival_time", r.arrival_time},
          {"routing_key", r.routing_key},   {"pair", ReportPairToJson(r.pair)}};
}

absl::StatusOr<StoredReport> StoredReportFromJson(const nlohmann::json& j) {
  StoredReport r;
  try {
    r.receipt = j.at("receipt").get<uint64_t>();
    r.policy_id = j.at("policy_id").get<std::string>();
    r.job_kind = j.at("job_kind").get<std::string>();
    r.arrival_time = j.at("arrival_time").get<double>();
    r.routing_key = j.at("routing_key").get<std::string>();
    MLARK_ASSIGN_OR_RETURN(r.pair, ReportPairFromJson(j.at("pair")));
  } catch (const nlohmann::json::exception& e) {
    return absl::DataLossError(absl::StrCat("stored report: ", e.what()));
  }
  return r;
}

std::unique_ptr<ReportStore> ReportStore::InMemory() {
  return std::unique_ptr<ReportStore>(new ReportStore());
}

absl::StatusOr<std::unique_ptr<ReportStore>> ReportStore::Open(
    const std::string& dir, bool fsync) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    return absl::FailedPreconditionError(
        absl::StrCat("cannot create store directory ", dir, ": ", ec.message()));
  }
  std::unique_ptr<ReportStore> store(new ReportStore());
  store->fsync_ = fsync;
  const std::string path = (std::filesystem::path(dir) / kLogName).string();
  MLARK_RETURN_IF_ERROR(store->Replay(path));
  store->log_ = std::fopen(path.c_str(), "ab");
  if (store->log_ == nullptr) {
    return absl::FailedPreconditionError(absl::StrCat("cannot open ", path));
  }
  return store;
}

absl::Status ReportStore::Replay(const std::string& path) {
  if (!std::filesystem::exists(path)) return absl::OkStatus();
  std::ifstream in(path, std::ios::binary);
  std::vector<uint8_t> data((std::istreambuf_iterator<char>(in)),
                            std::istreambuf_iterator<char>());
  size_t pos = 0;
  while (data.size() - pos >= 8) {
    const uint32_t len = GetU32(&data[pos]);
    const uint32_t crc = GetU32(&data[pos + 4]);
    if (len > kMaxFrame || data.size() - pos - 8 < len) break;
    std::span<const uint8_t> payload(&data[pos + 8], len);
    if (Crc32(payload) != crc) break;
    auto j = nlohmann::json::parse(payload.begin(), payload.end(), nullptr, false);
    if (j.is_discarded()) break;
    auto report = StoredReportFromJson(j);
    if (!report.ok()) break;
    reports_.push_back(std::make_shared<const StoredReport>(*std::move(report)));
    pos += 8 + len;
  }
  truncated_bytes_ = data.size() - pos;
  if (truncated_bytes_ > 0) {
    std::error_code ec;
    std::filesystem::resize_file(path, pos, ec);
    if (ec) {
      return absl::DataLossError(
          absl::StrCat("cannot truncate damaged tail of ", path, ": ", ec.message()));
    }
  }
  return absl::OkStatus();
}

ReportStore::~ReportStore() {
  if (log_ != nullptr) std::fclose(log_);
}

absl::StatusOr<uint64_t> ReportStore::Append(const ReportPair& pair) {
  if (pair.sealed_h0.ad != pair.sealed_h1.ad) {
    return absl::InvalidArgumentError("report halves carry different headers");
  }
  if (pair.sealed_h0.key_id == pair.sealed_h1.key_id) {
    return absl::InvalidArgumentError("both halves are sealed for the same key");
  }
  for (const SealedReport* s : {&pair.sealed_h0, &pair.sealed_h1}) {
    if (s->enc.size() != kPublicKeyBytes || s->ct.empty()) {
      return absl::InvalidArgumentError("malformed sealed report");
    }
  }
  MLARK_ASSIGN_OR_RETURN(ReportHeader header, DecodeReportHeader(pair.sealed_h0.ad));

  auto report = std::make_shared<StoredReport>();
  report->policy_id = header.policy_id;
  report->job_kind = header.job_kind;
  report->arrival_time = NowSeconds();
  report->routing_key = RoutingKey(header.policy_id, header.job_kind);
  report->pair = pair;

  std::lock_guard<std::mutex> lock(mu_);
  report->receipt = reports_.size() + 1;
  if (log_ != nullptr) {
    const auto frame = EncodeFrame(StoredReportToJson(*report).dump());
    if (std::fwrite(frame.data(), 1, frame.size(), log_) != frame.size() ||
        std::fflush(log_) != 0 || (fsync_ && ::fsync(::fileno(log_)) != 0)) {
      return absl::InternalError("report log write failed");
    }
  }
  reports_.push_back(std::move(report));
  return reports_.back()->receipt;
}

ReportStore::Snapshot ReportStore::snapshot() const {
  std::lock_guard<std::mutex> lock(mu_);
  return reports_;
}

size_t ReportStore::size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return reports_.size();
}

}  // namespace mlark
