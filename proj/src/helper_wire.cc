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

#include "mlark/helper_wire.h"

#include <chrono>
#include <thread>

#include "absl/strings/str_cat.h"
#include "httplib.h"
#include "mlark/encoding.h"
#include "mlark/status.h"

namespace mlark {

std::string_view JobKindName(JobKind kind) {
  switch (kind) {
    case JobKind::kAggregate:
      return "aggregate";
    case JobKind::kGroupBy:
      return "group_by";
    case JobKind::kGradient:
      return "gradient";
  }
  return "aggregate";
}

absl::StatusOr<JobKind> ParseJobKind(std::string_view name) {
  if (name == "aggregate") return JobKind::kAggregate;
  if (name == "group_by") return JobKind::kGroupBy;
  if (name == "gradient") return JobKind::kGradient;
  return absl::InvalidArgumentError(absl::StrCat("unknown job_kind '", std::string(name), "'"));
}

std::string EndpointFor(JobKind kind) {
  switch (kind) {
    case JobKind::kAggregate:
      return "/v1/aggregate";
    case JobKind::kGroupBy:
      return "/v1/group-by";
    case JobKind::kGradient:
      return "/v1/gradient";
  }
  return "/v1/aggregate";
}

std::string RecordsDigest(JobKind kind, std::string_view policy_id,
                          std::optional<uint64_t> shared_seed,
                          std::span<const std::string> record_ids) {
  // Length-prefixed fields so no two id sequences collide.
  std::string buf;
  auto put = [&buf](std::string_view field) {
    absl::StrAppend(&buf, field.size(), ":", std::string(field));
  };
  put(JobKindName(kind));
  put(policy_id);
  put(shared_seed.has_value() ? absl::StrCat(*shared_seed) : "-");
  for (const auto& id : record_ids) put(id);
  return DigestHex(AsBytes(buf));
}

nlohmann::json HelperRequestToJson(const HelperRequest& r) {
  nlohmann::json reports = nlohmann::json::array();
  for (const auto& s : r.reports) reports.push_back(SealedReportToJson(s));
  nlohmann::json j = {{"job_kind", JobKindName(r.job_kind)},
                      {"policy_id", r.policy_id},
                      {"sealed_reports", std::move(reports)}};
  if (r.job_kind != JobKind::kGradient) {
    j["value_fn"] = r.value_fn == ValueFn::kCount ? "count" : "label";
  }
  if (r.job_kind == JobKind::kGroupBy) {
    j["group_by"] = r.group_by;
    j["filter"] = r.filter;
  }
  if (r.job_kind == JobKind::kGradient) {
    j["model"] = Base64Encode(r.model_blob);
    j["loss"] = {{"kind", LossKindName(r.loss.kind)},
                 {"num_classes", r.loss.num_classes}};
  }
  if (r.shared_seed.has_value()) j["shared_seed"] = *r.shared_seed;
  return j;
}

absl::StatusOr<HelperRequest> HelperRequestFromJson(const nlohmann::json& j) {
  if (!j.is_object()) return absl::InvalidArgumentError("request is not an object");
  HelperRequest r;
  try {
    MLARK_ASSIGN_OR_RETURN(r.job_kind,
                           ParseJobKind(j.at("job_kind").get<std::string>()));
    r.policy_id = j.at("policy_id").get<std::string>();
    for (const auto& s : j.at("sealed_reports")) {
      MLARK_ASSIGN_OR_RETURN(SealedReport sealed, SealedReportFromJson(s));
      r.reports.push_back(std::move(sealed));
    }
    const std::string value_fn = j.value("value_fn", std::string("label"));
    if (value_fn == "count") {
      r.value_fn = ValueFn::kCount;
    } else if (value_fn != "label") {
      return absl::InvalidArgumentError(
          absl::StrCat("unknown value_fn '", value_fn, "'"));
    }
    if (r.job_kind == JobKind::kGroupBy) {
      r.group_by = j.at("group_by").get<std::string>();
      if (j.contains("filter")) {
        r.filter = j.at("filter").get<std::map<std::string, std::string>>();
      }
    }
    if (r.job_kind == JobKind::kGradient) {
      MLARK_ASSIGN_OR_RETURN(r.model_blob,
                             Base64Decode(j.at("model").get<std::string>()));
      const auto& loss = j.at("loss");
      MLARK_ASSIGN_OR_RETURN(r.loss.kind,
                             ParseLossKind(loss.at("kind").get<std::string>()));
      r.loss.num_classes = loss.at("num_classes").get<int>();
    }
    if (j.contains("shared_seed")) {
      r.shared_seed = j.at("shared_seed").get<uint64_t>();
    }
  } catch (const nlohmann::json::exception& e) {
    return absl::InvalidArgumentError(absl::StrCat("bad request: ", e.what()));
  }
  return r;
}

nlohmann::json HelperResponseToJson(const HelperResponse& r) {
  nlohmann::json j = {{"job_kind", JobKindName(r.job_kind)},
                      {"records_used", r.records_used},
                      {"blocked", r.blocked},
                      {"records_digest", r.records_digest},
                      {"dropped", r.dropped},
                      {"compute_ms", r.compute_ms}};
  switch (r.job_kind) {
    case JobKind::kAggregate:
      j["partial_result"] = FormatDouble(r.scalar);
      break;
    case JobKind::kGroupBy: {
      nlohmann::json groups = nlohmann::json::object();
      for (const auto& [k, v] : r.groups) groups[k] = FormatDouble(v);
      j["partial_result"] = std::move(groups);
      break;
    }
    case JobKind::kGradient: {
      nlohmann::json values = nlohmann::json::array();
      for (double v : r.gradient.values) values.push_back(FormatDouble(v));
      j["partial_result"] = std::move(values);
      break;
    }
  }
  return j;
}

namespace {

absl::StatusOr<double> NumberOrString(const nlohmann::json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) return ParseDouble(j.get<std::string>());
  return absl::InvalidArgumentError("expected a number");
}

}  // namespace

absl::StatusOr<HelperResponse> HelperResponseFromJson(const nlohmann::json& j) {
  if (!j.is_object()) return absl::InvalidArgumentError("response is not an object");
  HelperResponse r;
  try {
    MLARK_ASSIGN_OR_RETURN(r.job_kind,
                           ParseJobKind(j.at("job_kind").get<std::string>()));
    r.records_used = j.at("records_used").get<int64_t>();
    r.blocked = j.at("blocked").get<bool>();
    r.records_digest = j.value("records_digest", std::string());
    if (j.contains("dropped")) r.dropped = j.at("dropped").get<std::vector<int64_t>>();
    r.compute_ms = j.value("compute_ms", 0.0);
    const auto& partial = j.at("partial_result");
    switch (r.job_kind) {
      case JobKind::kAggregate: {
        MLARK_ASSIGN_OR_RETURN(r.scalar, NumberOrString(partial));
        break;
      }
      case JobKind::kGroupBy:
        for (const auto& [k, v] : partial.items()) {
          MLARK_ASSIGN_OR_RETURN(r.groups[k], NumberOrString(v));
        }
        break;
      case JobKind::kGradient: {
        r.gradient.values.reserve(partial.size());
        for (const auto& v : partial) {
          MLARK_ASSIGN_OR_RETURN(double x, NumberOrString(v));
          r.gradient.values.push_back(x);
        }
        break;
      }
    }
  } catch (const nlohmann::json::exception& e) {
    return absl::InvalidArgumentError(absl::StrCat("bad response: ", e.what()));
  }
  return r;
}

absl::Status StatusFromHttp(int http_status, const std::string& body) {
  std::string message = body;
  const auto j = nlohmann::json::parse(body, nullptr, false);
  if (!j.is_discarded() && j.is_object() && j.contains("error")) {
    message = j.at("error").get<std::string>();
  }
  switch (http_status) {
    case 400:
      return absl::InvalidArgumentError(message);
    case 403:
      return absl::PermissionDeniedError(message);
    case 404:
      return absl::NotFoundError(message);
    case 409:
      return absl::DataLossError(message);
    case 412:
    case 422:
      return absl::FailedPreconditionError(message);
    case 503:
      return absl::UnavailableError(message);
    default:
      return absl::InternalError(absl::StrCat("HTTP ", http_status, ": ", message));
  }
}

int HttpStatusFor(const absl::Status& status) {
  switch (status.code()) {
    case absl::StatusCode::kOk:
      return 200;
    case absl::StatusCode::kInvalidArgument:
    case absl::StatusCode::kOutOfRange:
      return 400;
    case absl::StatusCode::kPermissionDenied:
    case absl::StatusCode::kUnauthenticated:
      return 403;
    case absl::StatusCode::kNotFound:
      return 404;
    case absl::StatusCode::kDataLoss:
      return 409;
    case absl::StatusCode::kFailedPrecondition:
      return 422;
    case absl::StatusCode::kUnavailable:
      return 503;
    default:
      return 500;
  }
}

HttpHelperClient::HttpHelperClient(std::string base_url, HttpClientOptions options)
    : base_url_(std::move(base_url)), options_(options) {}

HttpHelperClient::~HttpHelperClient() = default;

absl::StatusOr<nlohmann::json> HttpHelperClient::Get(const std::string& path) {
  return Send(path, std::nullopt);
}

absl::StatusOr<nlohmann::json> HttpHelperClient::Post(const std::string& path,
                                                      const std::string& body) {
  return Send(path, body);
}

absl::StatusOr<nlohmann::json> HttpHelperClient::Send(
    const std::string& path, const std::optional<std::string>& body) {
  httplib::Client client(base_url_);
  client.set_connection_timeout(options_.connect_timeout_s, 0);
  client.set_read_timeout(options_.read_timeout_s, 0);
  client.set_write_timeout(options_.read_timeout_s, 0);
  std::string last_error = "no attempt made";
  for (int attempt = 0; attempt < std::max(1, options_.attempts); ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(
          std::chrono::milliseconds(options_.retry_backoff_ms * attempt));
    }
    auto res = body.has_value() ? client.Post(path, *body, "application/json")
                                : client.Get(path);
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) return StatusFromHttp(res->status, res->body);
    auto j = nlohmann::json::parse(res->body, nullptr, false);
    if (j.is_discarded()) {
      return absl::InternalError(absl::StrCat(base_url_, path, ": invalid JSON reply"));
    }
    return j;
  }
  return absl::UnavailableError(
      absl::StrCat("helper ", base_url_, " unreachable: ", last_error));
}

absl::StatusOr<HelperResponse> HttpHelperClient::Call(const HelperRequest& request) {
  MLARK_ASSIGN_OR_RETURN(
      auto j, Post(EndpointFor(request.job_kind), HelperRequestToJson(request).dump()));
  return HelperResponseFromJson(j);
}

absl::StatusOr<PublicKey> HttpHelperClient::FetchPublicKey() {
  MLARK_ASSIGN_OR_RETURN(auto j, Get("/v1/public-key"));
  return PublicKeyFromJson(j);
}

absl::StatusOr<PrivacyPolicy> HttpHelperClient::FetchPolicy(const std::string& id) {
  MLARK_ASSIGN_OR_RETURN(auto j, Get(absl::StrCat("/v1/policy/", id)));
  return PolicyFromJson(j);
}

}  // namespace mlark
