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

#ifndef MLARK_ADSERVER_H_
#define MLARK_ADSERVER_H_

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "mlark/helper_wire.h"
#include "mlark/model.h"
#include "mlark/privacy.h"
#include "mlark/report_store.h"
#include "mlark/ring.h"

// The ad server only ever handles sealed reports. It links the public half of
// the envelope and the wire types; the decrypt path lives in the helper
// library and is not a dependency of this one.

namespace mlark {

struct AggregateQuery {
  std::string policy_id;
  ValueFn value_fn = ValueFn::kLabel;
  // Empty for a plain aggregate.
  std::string group_by;
  std::map<std::string, std::string> filter;
};

struct AggregateResult {
  double value = 0;                      // plain aggregate
  std::map<std::string, double> groups;  // group-by
  bool blocked = false;
  int64_t records_used = 0;
  int redispatches = 0;
};

enum class OptimizerKind { kSgd, kAdam };

struct TrainingRun {
  std::string policy_id;
  MlpModel model;
  LossSpec loss;
  OptimizerKind optimizer = OptimizerKind::kSgd;
  double learning_rate = 0.01;
  size_t batch_size = 32;
  int epochs = 1;
  // Stop after this many rounds (0 = run every epoch to completion).
  int64_t max_rounds = 0;
  // Seeds the minibatch schedule and the per-round shared seeds.
  uint64_t seed = 0;
  bool quantize_model = false;
};

struct PhaseTimings {
  double package_ms = 0;
  double transmit_ms = 0;
  double helper_ms = 0;
  double combine_ms = 0;
  double total_ms() const { return package_ms + transmit_ms + helper_ms + combine_ms; }
};

struct RoundMetrics {
  int64_t round = 0;
  int epoch = 0;
  size_t batch_size = 0;
  int64_t records_used = 0;
  bool blocked = false;
  double gradient_norm = 0;
  std::optional<double> accuracy;
  PhaseTimings timings;
};

nlohmann::json RoundMetricsToJson(const RoundMetrics& m);

struct TrainingResult {
  MlpModel model;
  std::vector<RoundMetrics> rounds;
  int64_t blocked_rounds = 0;
  PhaseTimings totals;
};

// Batches of indices into [0, n): every epoch shuffles with a seed derived
// from (seed, epoch) and cuts consecutive batches, keeping a short tail.
std::vector<std::vector<size_t>> EpochSchedule(size_t n, size_t batch_size,
                                               int epochs, uint64_t seed);

// Shared seed for a training round, derived from the run seed.
uint64_t RoundSharedSeed(uint64_t run_seed, int64_t round);

struct TrainHooks {
  // Called after each completed round (blocked or not).
  std::function<void(const RoundMetrics&)> on_round;
  // Held-out accuracy, evaluated at the end of every epoch when set.
  std::function<double(const MlpModel&)> evaluate;
};

struct AdServerOptions {
  // Rebuild the batch without undecryptable halves and send it again, at most
  // this many times, before declaring the job failed.
  int max_redispatch = 1;
};

class AdServer {
 public:
  AdServer(ReportStore* store, std::array<HelperClient*, 2> helpers,
           AdServerOptions options = {});

  absl::StatusOr<uint64_t> Ingest(const ReportPair& pair);

  absl::StatusOr<AggregateResult> RunAggregateQuery(const AggregateQuery& query);

  absl::StatusOr<TrainingResult> Train(const TrainingRun& run,
                                       const TrainHooks& hooks = {});

  // Policy as published by the helpers; both must serve the same document.
  absl::StatusOr<PrivacyPolicy> Policy(const std::string& policy_id);

  // Reports for a policy usable by the given job kind.
  ReportStore::Snapshot Eligible(const std::string& policy_id, JobKind kind) const;

  ReportStore* store() { return store_; }

  // Sends each helper its own half of every report, concurrently, and
  // reconciles the two answers. Exposed for the integrity tests, which pass a
  // half_selector that deliberately misroutes reports.
  struct Dispatch {
    std::array<HelperResponse, 2> responses;
    std::vector<std::shared_ptr<const StoredReport>> used;
    int redispatches = 0;
    double wall_ms = 0;
  };
  using HalfSelector = std::function<std::vector<SealedReport>(
      int helper, const ReportStore::Snapshot& batch)>;
  absl::StatusOr<Dispatch> DispatchPaired(HelperRequest base,
                                          ReportStore::Snapshot batch,
                                          const HalfSelector& selector = {});

 private:
  ReportStore* store_;
  std::array<HelperClient*, 2> helpers_;
  AdServerOptions options_;
  std::mutex policy_mu_;
  std::map<std::string, PrivacyPolicy> policies_;
};

}  // namespace mlark

#endif  // MLARK_ADSERVER_H_
