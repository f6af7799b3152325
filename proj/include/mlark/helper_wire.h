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

#ifndef MLARK_HELPER_WIRE_H_
#define MLARK_HELPER_WIRE_H_

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "mlark/envelope.h"
#include "mlark/model.h"
#include "mlark/privacy.h"
#include "json.hpp"

// Request/response types shared by the helper service and its callers, plus
// the client interface the ad server dispatches through.
//
// HTTP endpoints (helper):
//   GET  /v1/public-key        -> {key_id, public_key}
//   GET  /v1/policy/{id}       -> policy document
//   POST /v1/aggregate         HelperRequest -> HelperResponse
//   POST /v1/group-by          HelperRequest -> HelperResponse
//   POST /v1/gradient          HelperRequest -> HelperResponse

namespace mlark {

enum class JobKind { kAggregate, kGroupBy, kGradient };

std::string_view JobKindName(JobKind kind);
absl::StatusOr<JobKind> ParseJobKind(std::string_view name);

// Per-candidate value a summation job multiplies by the mask.
enum class ValueFn { kLabel, kCount };

struct HelperRequest {
  JobKind job_kind = JobKind::kAggregate;
  std::string policy_id;
  std::vector<SealedReport> reports;

  // aggregate / group_by
  ValueFn value_fn = ValueFn::kLabel;
  // group_by: partition key and equality filter over side_info.
  std::string group_by;
  std::map<std::string, std::string> filter;

  // gradient
  std::vector<uint8_t> model_blob;
  LossSpec loss;
  std::optional<uint64_t> shared_seed;
};

struct HelperResponse {
  JobKind job_kind = JobKind::kAggregate;
  double scalar = 0;                      // aggregate
  std::map<std::string, double> groups;   // group_by
  GradientVector gradient;                // gradient
  int64_t records_used = 0;
  bool blocked = false;
  // BLAKE2b over the job parameters and the record ids used, in order.
  std::string records_digest;
  // Request indices this helper could not decrypt or parse.
  std::vector<int64_t> dropped;
  double compute_ms = 0;
};

nlohmann::json HelperRequestToJson(const HelperRequest& r);
absl::StatusOr<HelperRequest> HelperRequestFromJson(const nlohmann::json& j);
// Gradient entries are emitted as shortest round-trip decimal strings.
nlohmann::json HelperResponseToJson(const HelperResponse& r);
absl::StatusOr<HelperResponse> HelperResponseFromJson(const nlohmann::json& j);

std::string EndpointFor(JobKind kind);

// Digest both helpers compute over the records they used, so the ad server can
// detect misaligned halves without seeing any plaintext.
std::string RecordsDigest(JobKind kind, std::string_view policy_id,
                          std::optional<uint64_t> shared_seed,
                          std::span<const std::string> record_ids);

class HelperClient {
 public:
  virtual ~HelperClient() = default;
  virtual absl::StatusOr<HelperResponse> Call(const HelperRequest& request) = 0;
  virtual absl::StatusOr<PublicKey> FetchPublicKey() = 0;
  virtual absl::StatusOr<PrivacyPolicy> FetchPolicy(const std::string& id) = 0;
};

struct HttpClientOptions {
  int attempts = 3;
  int retry_backoff_ms = 100;
  int connect_timeout_s = 5;
  int read_timeout_s = 600;
};

// Talks to a helper at base_url (http://host:port). Connection failures are
// retried, then surface as kUnavailable.
class HttpHelperClient final : public HelperClient {
 public:
  explicit HttpHelperClient(std::string base_url, HttpClientOptions options = {});
  ~HttpHelperClient() override;

  absl::StatusOr<HelperResponse> Call(const HelperRequest& request) override;
  absl::StatusOr<PublicKey> FetchPublicKey() override;
  absl::StatusOr<PrivacyPolicy> FetchPolicy(const std::string& id) override;

 private:
  absl::StatusOr<nlohmann::json> Get(const std::string& path);
  absl::StatusOr<nlohmann::json> Post(const std::string& path,
                                      const std::string& body);
  absl::StatusOr<nlohmann::json> Send(const std::string& path,
                                      const std::optional<std::string>& body);

  std::string base_url_;
  HttpClientOptions options_;
};

// Maps an HTTP status from a helper to a Status code.
absl::Status StatusFromHttp(int http_status, const std::string& body);
int HttpStatusFor(const absl::Status& status);

}  // namespace mlark

#endif  // MLARK_HELPER_WIRE_H_
