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

#ifndef MLARK_EXPERIMENTS_H_
#define MLARK_EXPERIMENTS_H_

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "mlark/adserver.h"
#include "mlark/browser.h"
#include "mlark/datasets.h"
#include "mlark/helper.h"
#include "mlark/helper_http.h"
#include "mlark/results.h"

namespace mlark {

enum class Transport { kInProcess, kHttp };

struct PipelineOptions {
  PrivacyPolicy policy;
  HelperConfig helper;
  Transport transport = Transport::kInProcess;
  // In-process only: push every request and response through its JSON form.
  bool round_trip_json = false;
  // Allows dp_mode off in the helpers' registry.
  bool test_mode = true;
  double fake_rate = 0.5;
  size_t num_browsers = 16;
  uint64_t seed = 0;
  std::string job_kind = "any";
};

// Browser population: samples are spread round-robin over num_browsers
// emulators (each seeded from `seed`), every non-zero label is recorded as a
// conversion, and all uploads are returned sorted by emission time.
absl::StatusOr<std::vector<Emission>> SimulateBrowsers(
    std::span<const Sample> samples, int num_classes, const PrivacyPolicy& policy,
    const std::array<PublicKey, 2>& keys, const BrowserConfig& config,
    size_t num_browsers, uint64_t seed);

// Two helpers with fresh keys, an in-memory report store and an ad server,
// wired together in this process (optionally over loopback HTTP).
class MpcPipeline {
 public:
  static absl::StatusOr<std::unique_ptr<MpcPipeline>> Create(PipelineOptions options);
  ~MpcPipeline();

  // Simulates browsers for `samples` and ingests their uploads. Returns the
  // real records' plaintext samples in ingestion order, which is the order
  // the ad server's batch schedule indexes.
  absl::StatusOr<std::vector<Sample>> Populate(std::span<const Sample> samples,
                                               int num_classes);

  AdServer& adserver() { return *adserver_; }
  HelperService& helper(int h) { return *helpers_[h]; }
  std::array<PublicKey, 2> public_keys() const;
  const PipelineOptions& options() const { return options_; }

 private:
  explicit MpcPipeline(PipelineOptions options) : options_(std::move(options)) {}

  PipelineOptions options_;
  std::array<std::unique_ptr<HelperService>, 2> helpers_;
  std::array<std::unique_ptr<HelperHttpServer>, 2> servers_;
  std::array<std::unique_ptr<HelperClient>, 2> clients_;
  std::unique_ptr<ReportStore> store_;
  std::unique_ptr<AdServer> adserver_;
};

struct LocalTrainOptions {
  PrivacyPolicy policy;
  ClipSemantics clip_semantics = ClipSemantics::kVerbatim;
  OptimizerKind optimizer = OptimizerKind::kSgd;
  double learning_rate = 0.01;
  size_t batch_size = 32;
  int epochs = 1;
  int64_t max_rounds = 0;
  uint64_t seed = 0;        // batch schedule, as in TrainingRun
  uint64_t noise_seed = 0;  // Laplace draws
};

// Single-machine run of the helpers' algorithm on plaintext samples: same
// batch schedule, k gate, clipping and summation, and two independent
// Laplace draws per coordinate standing in for the two helpers' noise.
absl::StatusOr<TrainingResult> TrainLocal(const MlpModel& initial, const LossSpec& loss,
                                          std::span<const Sample> samples,
                                          const LocalTrainOptions& options,
                                          const TrainHooks& hooks = {});

// One sweep description, loaded from YAML.
struct ExperimentConfig {
  std::string name = "experiment";
  // privacy | local_dp | latency | compare
  std::string kind = "privacy";
  std::string dataset = "synthetic-wbcd";
  uint64_t dataset_seed = 1;
  // Training split cap (0 keeps all).
  size_t train_limit = 0;
  std::vector<size_t> network;  // empty: default for the dataset
  LossKind loss = LossKind::kCrossEntropy;
  std::vector<double> epsilons = {INFINITY};
  std::vector<double> psis = {1.0};
  std::vector<size_t> batch_sizes = {32};
  DpMode dp_mode = DpMode::kGlobal;
  int repetitions = 1;
  uint64_t seed = 42;
  int epochs = 5;
  int64_t max_rounds = 0;
  double learning_rate = 0.05;
  OptimizerKind optimizer = OptimizerKind::kSgd;
  ClipSemantics clip_semantics = ClipSemantics::kVerbatim;
  double fake_rate = 0.5;
  Transport transport = Transport::kInProcess;
  int64_t k = 1;
  double value_sensitivity = 1.0;
  double feature_sensitivity = 255.0;
  bool quantize_model = false;
  int latency_runs = 5;
  bool parallel = false;
  std::string output = "results";
};

absl::StatusOr<ExperimentConfig> ParseExperimentConfig(const std::string& yaml_text);
absl::StatusOr<ExperimentConfig> LoadExperimentConfig(const std::string& path);
nlohmann::json ExperimentConfigToJson(const ExperimentConfig& c);

std::vector<size_t> DefaultNetwork(const Dataset& d);

// Per (epsilon, psi, batch, repetition): MPC test accuracy under global DP.
absl::StatusOr<ResultTable> RunPrivacySweep(const ExperimentConfig& c, const Dataset& d);
// Per (epsilon, repetition): MPC test accuracy with browser-side feature
// noise (dp_mode local).
absl::StatusOr<ResultTable> RunLocalDpSweep(const ExperimentConfig& c, const Dataset& d);
// Per (batch, run): wall-clock of MPC vs local training and their
// per-record ratio; one extra row per batch holds the median ratio.
absl::StatusOr<ResultTable> RunLatencyStudy(const ExperimentConfig& c, const Dataset& d);
// Per (epsilon, psi, batch, repetition): MPC and local accuracy side by side.
absl::StatusOr<ResultTable> RunComparison(const ExperimentConfig& c, const Dataset& d);

// Loads the dataset, runs the sweep named by c.kind and returns its table.
absl::StatusOr<ResultTable> RunExperiment(const ExperimentConfig& c);

// Seed for one sweep point, derived from the run seed and the point's
// coordinates so that no two points share a random stream.
uint64_t PointSeed(uint64_t run_seed, const nlohmann::json& point);

}  // namespace mlark

#endif  // MLARK_EXPERIMENTS_H_
