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

#include "mlark/helper_http.h"

#include "absl/strings/str_cat.h"
#include "httplib.h"

namespace mlark {

namespace {

void Reply(httplib::Response& res, const absl::Status& status) {
  res.status = HttpStatusFor(status);
  res.set_content(nlohmann::json{{"error", std::string(status.message())}}.dump(),
                  "application/json");
}

void Reply(httplib::Response& res, const nlohmann::json& body) {
  res.status = 200;
  res.set_content(body.dump(), "application/json");
}

}  // namespace

HelperHttpServer::HelperHttpServer(HelperService* service)
    : service_(service), server_(std::make_unique<httplib::Server>()) {
  server_->Get("/v1/public-key", [this](const httplib::Request&, httplib::Response& res) {
    Reply(res, PublicKeyToJson(service_->ServePublicKey()));
  });
  server_->Get(R"(/v1/policy/([^/]+))",
               [this](const httplib::Request& req, httplib::Response& res) {
                 auto policy = service_->ServePolicy(req.matches[1].str());
                 if (!policy.ok()) return Reply(res, policy.status());
                 Reply(res, PolicyToJson(*policy));
               });
  auto job = [this](JobKind kind) {
    return [this, kind](const httplib::Request& req, httplib::Response& res) {
      auto body = nlohmann::json::parse(req.body, nullptr, false);
      if (body.is_discarded()) {
        return Reply(res, absl::InvalidArgumentError("body is not JSON"));
      }
      auto request = HelperRequestFromJson(body);
      if (!request.ok()) return Reply(res, request.status());
      if (request->job_kind != kind) {
        return Reply(res, absl::InvalidArgumentError(absl::StrCat(
                              "job_kind '", std::string(JobKindName(request->job_kind)),
                              "' sent to ", EndpointFor(kind))));
      }
      auto response = service_->Handle(*request);
      if (!response.ok()) return Reply(res, response.status());
      Reply(res, HelperResponseToJson(*response));
    };
  };
  server_->Post("/v1/aggregate", job(JobKind::kAggregate));
  server_->Post("/v1/group-by", job(JobKind::kGroupBy));
  server_->Post("/v1/gradient", job(JobKind::kGradient));
  server_->set_payload_max_length(size_t{1} << 31);
}

HelperHttpServer::~HelperHttpServer() {
  // A bound socket is only closed by stop() once the accept loop has run.
  if (bound_ && !served_) ServeInBackground();
  Stop();
}

absl::StatusOr<int> HelperHttpServer::Bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = server_->bind_to_any_port(host);
    if (bound < 0) return absl::UnavailableError(absl::StrCat("cannot bind ", host));
    bound_ = true;
    return bound;
  }
  if (!server_->bind_to_port(host, port)) {
    return absl::UnavailableError(absl::StrCat("cannot bind ", host, ":", port));
  }
  bound_ = true;
  return port;
}

absl::Status HelperHttpServer::Serve() {
  served_ = true;
  if (!server_->listen_after_bind()) {
    return absl::InternalError("helper server stopped unexpectedly");
  }
  return absl::OkStatus();
}

void HelperHttpServer::ServeInBackground() {
  served_ = true;
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

void HelperHttpServer::Stop() {
  server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace mlark
