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

#ifndef MLARK_ADSERVER_HTTP_H_
#define MLARK_ADSERVER_HTTP_H_

#include <atomic>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "absl/status/statusor.h"
#include "mlark/adserver.h"

namespace httplib {
class Server;
}

// HTTP front end of the ad server:
//   POST /v1/report   ReportPair              -> {"receipt": n}
//   POST /v1/query    AggregateQuery          -> AggregateResult
//   POST /v1/train    TrainRequest            -> {"model", "rounds", ...}
//   GET  /v1/stats                            -> report counts per policy

namespace mlark {

// Training job as sent over the wire. The model is built server-side from
// layer dims and an init seed.
struct TrainRequest {
  std::string policy_id;
  std::vector<size_t> layers;
  uint64_t init_seed = 0;
  LossSpec loss;
  OptimizerKind optimizer = OptimizerKind::kSgd;
  double learning_rate = 0.01;
  size_t batch_size = 32;
  int epochs = 1;
  int64_t max_rounds = 0;
  uint64_t seed = 0;
  bool quantize_model = false;
};

nlohmann::json TrainRequestToJson(const TrainRequest& r);
absl::StatusOr<TrainRequest> TrainRequestFromJson(const nlohmann::json& j);
absl::StatusOr<TrainingRun> BuildTrainingRun(const TrainRequest& r);

nlohmann::json AggregateQueryToJson(const AggregateQuery& q);
absl::StatusOr<AggregateQuery> AggregateQueryFromJson(const nlohmann::json& j);
nlohmann::json AggregateResultToJson(const AggregateResult& r);
absl::StatusOr<AggregateResult> AggregateResultFromJson(const nlohmann::json& j);

class AdServerHttpServer {
 public:
  explicit AdServerHttpServer(AdServer* server);
  ~AdServerHttpServer();

  absl::StatusOr<int> Bind(const std::string& host, int port);
  absl::Status Serve();
  void ServeInBackground();
  void Stop();

 private:
  AdServer* server_;
  std::unique_ptr<httplib::Server> http_;
  std::thread thread_;
  bool bound_ = false;
  std::atomic<bool> served_{false};
};

// Client used by the browser simulator and the CLI.
class AdServerClient {
 public:
  explicit AdServerClient(std::string base_url) : base_url_(std::move(base_url)) {}

  absl::StatusOr<uint64_t> PostReport(const ReportPair& pair);
  absl::StatusOr<AggregateResult> Query(const AggregateQuery& query);
  // Returns the raw reply: {"model": base64 blob, "rounds": [...], ...}.
  absl::StatusOr<nlohmann::json> Train(const TrainRequest& request);
  absl::StatusOr<nlohmann::json> Stats();

 private:
  absl::StatusOr<nlohmann::json> Send(const std::string& path,
                                      const std::optional<std::string>& body);
  std::string base_url_;
};

}  // namespace mlark

#endif  // MLARK_ADSERVER_HTTP_H_
