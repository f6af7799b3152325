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

#include "mlark/adserver_http.h"

#include <map>
#include <string>

#include "absl/strings/str_cat.h"
#include "httplib.h"
#include "mlark/encoding.h"
#include "mlark/status.h"

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

std::string_view OptimizerName(OptimizerKind k) {
  return k == OptimizerKind::kAdam ? "adam" : "sgd";
}

}  // namespace

nlohmann::json TrainRequestToJson(const TrainRequest& r) {
  return {{"policy_id", r.policy_id},
          {"layers", r.layers},
          {"init_seed", r.init_seed},
          {"loss", {{"kind", LossKindName(r.loss.kind)},
                    {"num_classes", r.loss.num_classes}}},
          {"optimizer", OptimizerName(r.optimizer)},
          {"learning_rate", r.learning_rate},
          {"batch_size", r.batch_size},
          {"epochs", r.epochs},
          {"max_rounds", r.max_rounds},
          {"seed", r.seed},
          {"quantize_model", r.quantize_model}};
}

absl::StatusOr<TrainRequest> TrainRequestFromJson(const nlohmann::json& j) {
  TrainRequest r;
  try {
    r.policy_id = j.at("policy_id").get<std::string>();
    r.layers = j.at("layers").get<std::vector<size_t>>();
    r.init_seed = j.value("init_seed", uint64_t{0});
    if (j.contains("loss")) {
      MLARK_ASSIGN_OR_RETURN(r.loss.kind,
                             ParseLossKind(j["loss"].at("kind").get<std::string>()));
      r.loss.num_classes = j["loss"].value("num_classes", 2);
    }
    const std::string opt = j.value("optimizer", std::string("sgd"));
    if (opt == "adam") {
      r.optimizer = OptimizerKind::kAdam;
    } else if (opt != "sgd") {
      return absl::InvalidArgumentError(absl::StrCat("unknown optimizer '", opt, "'"));
    }
    r.learning_rate = j.value("learning_rate", r.learning_rate);
    r.batch_size = j.value("batch_size", r.batch_size);
    r.epochs = j.value("epochs", r.epochs);
    r.max_rounds = j.value("max_rounds", r.max_rounds);
    r.seed = j.value("seed", r.seed);
    r.quantize_model = j.value("quantize_model", false);
  } catch (const nlohmann::json::exception& e) {
    return absl::InvalidArgumentError(absl::StrCat("bad train request: ", e.what()));
  }
  return r;
}

absl::StatusOr<TrainingRun> BuildTrainingRun(const TrainRequest& r) {
  if (r.batch_size == 0 || r.epochs <= 0) {
    return absl::InvalidArgumentError("batch_size and epochs must be positive");
  }
  SeededRandom init(r.init_seed);
  TrainingRun run;
  MLARK_ASSIGN_OR_RETURN(run.model, MlpModel::Initialize(r.layers, init));
  run.policy_id = r.policy_id;
  run.loss = r.loss;
  run.optimizer = r.optimizer;
  run.learning_rate = r.learning_rate;
  run.batch_size = r.batch_size;
  run.epochs = r.epochs;
  run.max_rounds = r.max_rounds;
  run.seed = r.seed;
  run.quantize_model = r.quantize_model;
  return run;
}

nlohmann::json AggregateQueryToJson(const AggregateQuery& q) {
  nlohmann::json j = {{"policy_id", q.policy_id},
                      {"value_fn", q.value_fn == ValueFn::kCount ? "count" : "label"}};
  if (!q.group_by.empty()) j["group_by"] = q.group_by;
  if (!q.filter.empty()) j["filter"] = q.filter;
  return j;
}

absl::StatusOr<AggregateQuery> AggregateQueryFromJson(const nlohmann::json& j) {
  AggregateQuery q;
  try {
    q.policy_id = j.at("policy_id").get<std::string>();
    const std::string fn = j.value("value_fn", std::string("label"));
    if (fn == "count") {
      q.value_fn = ValueFn::kCount;
    } else if (fn != "label") {
      return absl::InvalidArgumentError(absl::StrCat("unknown value_fn '", fn, "'"));
    }
    q.group_by = j.value("group_by", std::string());
    if (j.contains("filter")) {
      q.filter = j.at("filter").get<std::map<std::string, std::string>>();
    }
  } catch (const nlohmann::json::exception& e) {
    return absl::InvalidArgumentError(absl::StrCat("bad query: ", e.what()));
  }
  return q;
}

nlohmann::json AggregateResultToJson(const AggregateResult& r) {
  nlohmann::json groups = nlohmann::json::object();
  for (const auto& [k, v] : r.groups) groups[k] = v;
  return {{"value", r.value},
          {"groups", std::move(groups)},
          {"blocked", r.blocked},
          {"records_used", r.records_used},
          {"redispatches", r.redispatches}};
}

absl::StatusOr<AggregateResult> AggregateResultFromJson(const nlohmann::json& j) {
  AggregateResult r;
  try {
    r.value = j.at("value").get<double>();
    r.groups = j.at("groups").get<std::map<std::string, double>>();
    r.blocked = j.at("blocked").get<bool>();
    r.records_used = j.at("records_used").get<int64_t>();
    r.redispatches = j.value("redispatches", 0);
  } catch (const nlohmann::json::exception& e) {
    return absl::InvalidArgumentError(absl::StrCat("bad query result: ", e.what()));
  }
  return r;
}

AdServerHttpServer::AdServerHttpServer(AdServer* server)
    : server_(server), http_(std::make_unique<httplib::Server>()) {
  auto parse = [](const httplib::Request& req) {
    return nlohmann::json::parse(req.body, nullptr, false);
  };
  http_->Post("/v1/report", [this, parse](const httplib::Request& req,
                                          httplib::Response& res) {
    auto j = parse(req);
    if (j.is_discarded()) return Reply(res, absl::InvalidArgumentError("body is not JSON"));
    auto pair = ReportPairFromJson(j);
    if (!pair.ok()) return Reply(res, pair.status());
    auto receipt = server_->Ingest(*pair);
    if (!receipt.ok()) return Reply(res, receipt.status());
    Reply(res, nlohmann::json{{"receipt", *receipt}});
  });
  http_->Post("/v1/query", [this, parse](const httplib::Request& req,
                                         httplib::Response& res) {
    auto j = parse(req);
    if (j.is_discarded()) return Reply(res, absl::InvalidArgumentError("body is not JSON"));
    auto query = AggregateQueryFromJson(j);
    if (!query.ok()) return Reply(res, query.status());
    auto result = server_->RunAggregateQuery(*query);
    if (!result.ok()) return Reply(res, result.status());
    Reply(res, AggregateResultToJson(*result));
  });
  http_->Post("/v1/train", [this, parse](const httplib::Request& req,
                                         httplib::Response& res) {
    auto j = parse(req);
    if (j.is_discarded()) return Reply(res, absl::InvalidArgumentError("body is not JSON"));
    auto request = TrainRequestFromJson(j);
    if (!request.ok()) return Reply(res, request.status());
    auto run = BuildTrainingRun(*request);
    if (!run.ok()) return Reply(res, run.status());
    auto result = server_->Train(*run);
    if (!result.ok()) return Reply(res, result.status());
    nlohmann::json rounds = nlohmann::json::array();
    for (const auto& m : result->rounds) rounds.push_back(RoundMetricsToJson(m));
    Reply(res, nlohmann::json{{"model", Base64Encode(SerializeModel(result->model))},
                              {"rounds", std::move(rounds)},
                              {"blocked_rounds", result->blocked_rounds}});
  });
  http_->Get("/v1/stats", [this](const httplib::Request&, httplib::Response& res) {
    std::map<std::string, std::map<std::string, int64_t>> counts;
    const auto snapshot = server_->store()->snapshot();
    for (const auto& r : snapshot) ++counts[r->policy_id][r->job_kind];
    nlohmann::json by_policy = counts;
    Reply(res, nlohmann::json{{"reports", snapshot.size()}, {"by_policy", by_policy}});
  });
  http_->set_payload_max_length(size_t{1} << 31);
}

AdServerHttpServer::~AdServerHttpServer() {
  // A bound socket is only closed by stop() once the accept loop has run.
  if (bound_ && !served_) ServeInBackground();
  Stop();
}

absl::StatusOr<int> AdServerHttpServer::Bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = http_->bind_to_any_port(host);
    if (bound < 0) return absl::UnavailableError(absl::StrCat("cannot bind ", host));
    bound_ = true;
    return bound;
  }
  if (!http_->bind_to_port(host, port)) {
    return absl::UnavailableError(absl::StrCat("cannot bind ", host, ":", port));
  }
  bound_ = true;
  return port;
}

absl::Status AdServerHttpServer::Serve() {
  served_ = true;
  if (!http_->listen_after_bind()) {
    return absl::InternalError("ad server stopped unexpectedly");
  }
  return absl::OkStatus();
}

void AdServerHttpServer::ServeInBackground() {
  served_ = true;
  thread_ = std::thread([this] { http_->listen_after_bind(); });
  http_->wait_until_ready();
}

void AdServerHttpServer::Stop() {
  http_->stop();
  if (thread_.joinable()) thread_.join();
}

absl::StatusOr<nlohmann::json> AdServerClient::Send(
    const std::string& path, const std::optional<std::string>& body) {
  httplib::Client client(base_url_);
  client.set_connection_timeout(5, 0);
  client.set_read_timeout(3600, 0);
  auto res = body.has_value() ? client.Post(path, *body, "application/json")
                              : client.Get(path);
  if (!res) {
    return absl::UnavailableError(absl::StrCat(
        "ad server ", base_url_, " unreachable: ", httplib::to_string(res.error())));
  }
  if (res->status != 200) return StatusFromHttp(res->status, res->body);
  auto j = nlohmann::json::parse(res->body, nullptr, false);
  if (j.is_discarded()) return absl::InternalError("ad server sent invalid JSON");
  return j;
}

absl::StatusOr<uint64_t> AdServerClient::PostReport(const ReportPair& pair) {
  MLARK_ASSIGN_OR_RETURN(auto j, Send("/v1/report", ReportPairToJson(pair).dump()));
  return j.at("receipt").get<uint64_t>();
}

absl::StatusOr<AggregateResult> AdServerClient::Query(const AggregateQuery& query) {
  MLARK_ASSIGN_OR_RETURN(auto j, Send("/v1/query", AggregateQueryToJson(query).dump()));
  return AggregateResultFromJson(j);
}

absl::StatusOr<nlohmann::json> AdServerClient::Train(const TrainRequest& request) {
  return Send("/v1/train", TrainRequestToJson(request).dump());
}

absl::StatusOr<nlohmann::json> AdServerClient::Stats() {
  return Send("/v1/stats", std::nullopt);
}

}  // namespace mlark
