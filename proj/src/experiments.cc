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

#include "mlark/experiments.h"

#include <chrono>
#include <cmath>
#include <future>
#include <numeric>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "mlark/encoding.h"
#include "mlark/kernels.h"
#include "mlark/status.h"

namespace mlark {

namespace {

using Clock = std::chrono::steady_clock;

double MsSince(Clock::time_point t) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t).count();
}

nlohmann::json Real(double x) { return ExtendedRealToJson(x); }

}  // namespace

absl::StatusOr<std::vector<Emission>> SimulateBrowsers(
    std::span<const Sample> samples, int num_classes, const PrivacyPolicy& policy,
    const std::array<PublicKey, 2>& keys, const BrowserConfig& config,
    size_t num_browsers, uint64_t seed) {
  num_browsers = std::max<size_t>(num_browsers, 1);
  std::vector<std::unique_ptr<BrowserEmulator>> browsers;
  for (size_t b = 0; b < num_browsers; ++b) {
    browsers.push_back(std::make_unique<BrowserEmulator>(
        policy, LabelSpace{num_classes}, keys, config, DeriveSeed(seed, b)));
  }
  for (size_t i = 0; i < samples.size(); ++i) {
    PendingAttribution p;
    p.impression_id = absl::StrFormat("imp-%08d", i);
    p.features = samples[i].features;
    p.expiry = 86400.0;
    p.side_info = {{"campaign", absl::StrCat("c", i % 4)},
                   {"region", i % 2 == 0 ? "east" : "west"}};
    auto& browser = *browsers[i % num_browsers];
    browser.RecordImpression(std::move(p));
    if (samples[i].label != 0) {
      MLARK_RETURN_IF_ERROR(browser.RecordConversion(
          absl::StrFormat("imp-%08d", i), static_cast<double>(samples[i].label)));
    }
  }
  std::vector<Emission> all;
  for (auto& b : browsers) {
    MLARK_ASSIGN_OR_RETURN(auto emitted, b->Flush(86400.0));
    for (auto& e : emitted) all.push_back(std::move(e));
  }
  std::stable_sort(all.begin(), all.end(), [](const Emission& a, const Emission& b) {
    return a.emit_time < b.emit_time;
  });
  return all;
}

absl::StatusOr<std::unique_ptr<MpcPipeline>> MpcPipeline::Create(
    PipelineOptions options) {
  InitCrypto();
  std::unique_ptr<MpcPipeline> p(new MpcPipeline(std::move(options)));
  const PipelineOptions& o = p->options_;
  PolicyRegistry registry;
  MLARK_RETURN_IF_ERROR(registry.Add(o.policy, o.test_mode));
  for (int h = 0; h < 2; ++h) {
    HelperConfig config = o.helper;
    if (config.noise_seed.has_value()) {
      config.noise_seed = DeriveSeed(*config.noise_seed, static_cast<uint64_t>(h));
    }
    p->helpers_[h] = std::make_unique<HelperService>(
        HelperKeyPair::Generate(absl::StrCat("helper-", h)), registry, config);
    if (o.transport == Transport::kHttp) {
      p->servers_[h] = std::make_unique<HelperHttpServer>(p->helpers_[h].get());
      MLARK_ASSIGN_OR_RETURN(int port, p->servers_[h]->Bind("127.0.0.1", 0));
      p->servers_[h]->ServeInBackground();
      p->clients_[h] =
          std::make_unique<HttpHelperClient>(absl::StrCat("http://127.0.0.1:", port));
    } else {
      p->clients_[h] = std::make_unique<InProcessHelperClient>(p->helpers_[h].get(),
                                                               o.round_trip_json);
    }
  }
  p->store_ = ReportStore::InMemory();
  p->adserver_ = std::make_unique<AdServer>(
      p->store_.get(), std::array<HelperClient*, 2>{p->clients_[0].get(),
                                                    p->clients_[1].get()});
  return p;
}

MpcPipeline::~MpcPipeline() {
  adserver_.reset();
  for (auto& s : servers_) {
    if (s) s->Stop();
  }
}

std::array<PublicKey, 2> MpcPipeline::public_keys() const {
  return {helpers_[0]->ServePublicKey(), helpers_[1]->ServePublicKey()};
}

absl::StatusOr<std::vector<Sample>> MpcPipeline::Populate(
    std::span<const Sample> samples, int num_classes) {
  BrowserConfig config;
  config.fake_rate = options_.fake_rate;
  config.job_kind = options_.job_kind;
  MLARK_ASSIGN_OR_RETURN(
      auto emissions,
      SimulateBrowsers(samples, num_classes, options_.policy, public_keys(), config,
                       options_.num_browsers, options_.seed));
  std::vector<Sample> real;
  for (const auto& e : emissions) {
    MLARK_RETURN_IF_ERROR(adserver_->Ingest(e.pair).status());
    if (e.truth.has_value()) real.push_back(*e.truth);
  }
  return real;
}

absl::StatusOr<TrainingResult> TrainLocal(const MlpModel& initial, const LossSpec& loss,
                                          std::span<const Sample> samples,
                                          const LocalTrainOptions& o,
                                          const TrainHooks& hooks) {
  const PrivacyPolicy& policy = o.policy;
  const bool noise_on = policy.dp_mode == DpMode::kGlobal && std::isfinite(policy.epsilon);
  const bool clip_on = policy.dp_mode != DpMode::kLocal;
  if (noise_on && std::isinf(policy.gradient_bound)) {
    return absl::FailedPreconditionError(
        "global DP on gradients needs a finite gradient_bound");
  }
  MLARK_RETURN_IF_ERROR(loss.ValidateFor(initial));
  std::unique_ptr<Optimizer> optimizer;
  if (o.optimizer == OptimizerKind::kAdam) {
    optimizer = std::make_unique<AdamOptimizer>(o.learning_rate);
  } else {
    optimizer = std::make_unique<SgdOptimizer>(o.learning_rate);
  }
  SeededRandom noise_rng(o.noise_seed);
  const double noise_scale = noise_on
      ? ClippedNormBound(policy.gradient_bound, o.clip_semantics) / policy.epsilon
      : 0.0;

  TrainingResult result;
  result.model = initial;
  const size_t dim = initial.parameter_count();
  const auto schedule = EpochSchedule(samples.size(), o.batch_size, o.epochs, o.seed);
  const size_t per_epoch =
      std::max<size_t>(1, (samples.size() + o.batch_size - 1) / std::max<size_t>(o.batch_size, 1));
  GradientWorkspace ws;
  std::vector<double> g(dim);

  for (size_t r = 0; r < schedule.size(); ++r) {
    if (o.max_rounds > 0 && static_cast<int64_t>(r) >= o.max_rounds) break;
    const auto start = Clock::now();
    RoundMetrics m;
    m.round = static_cast<int64_t>(r);
    m.epoch = static_cast<int>(r / per_epoch);
    m.batch_size = schedule[r].size();
    if (KAnonymityGate(static_cast<int64_t>(schedule[r].size()), policy) ==
        GateResult::kBlocked) {
      m.blocked = true;
      ++result.blocked_rounds;
    } else {
      int64_t used = 0;
      auto add = [&](size_t i, std::span<double> acc, size_t) -> absl::Status {
        const Sample& s = samples[schedule[r][i]];
        auto l = ws.LossAndGradient(result.model, loss, NormalizeFeatures(s.features),
                                    s.label, g);
        if (!l.ok()) {
          return l.status().code() == absl::StatusCode::kInternal ? absl::OkStatus()
                                                                  : l.status();
        }
        double scale = 1.0;
        if (clip_on) {
          scale = ClipScale(std::sqrt(kernels::Dot(g, g)), policy.gradient_bound,
                            o.clip_semantics);
        }
        kernels::Axpy(scale, g, acc);
        ++used;
        return absl::OkStatus();
      };
      MLARK_ASSIGN_OR_RETURN(auto sum, DeterministicSum(schedule[r].size(), dim, add));
      if (noise_on) {
        for (double& v : sum) {
          MLARK_ASSIGN_OR_RETURN(double n0, LaplaceSample(noise_scale, noise_rng));
          MLARK_ASSIGN_OR_RETURN(double n1, LaplaceSample(noise_scale, noise_rng));
          v += n0 + n1;
        }
      }
      GradientVector grad;
      grad.values = std::move(sum);
      m.records_used = used;
      m.gradient_norm = grad.L2Norm();
      MLARK_RETURN_IF_ERROR(optimizer->Apply(result.model, grad));
    }
    m.timings.helper_ms = MsSince(start);
    result.totals.helper_ms += m.timings.helper_ms;
    const bool epoch_end = (r + 1) % per_epoch == 0 || r + 1 == schedule.size();
    if (hooks.evaluate && epoch_end) m.accuracy = hooks.evaluate(result.model);
    if (hooks.on_round) hooks.on_round(m);
    result.rounds.push_back(std::move(m));
  }
  return result;
}

std::vector<size_t> DefaultNetwork(const Dataset& d) {
  const size_t out = static_cast<size_t>(d.num_classes);
  if (d.feature_dim >= 256) return {d.feature_dim, 500, out};
  return {d.feature_dim, 50, 50, out};
}

uint64_t PointSeed(uint64_t run_seed, const nlohmann::json& point) {
  const std::string hex = DigestHex(AsBytes(point.dump())).substr(0, 16);
  return DeriveSeed(run_seed, std::stoull(hex, nullptr, 16));
}

namespace {

struct PointOutcome {
  double mpc_accuracy = NAN;
  double local_accuracy = NAN;
  int64_t blocked_rounds = 0;
  int64_t rounds = 0;
  double mpc_ms = 0;
  double local_ms = 0;
  size_t mpc_records = 0;
  size_t local_records = 0;
  PhaseTimings phases;
};

PrivacyPolicy PolicyFor(const ExperimentConfig& c, DpMode mode, double epsilon,
                        double psi) {
  PrivacyPolicy p;
  p.policy_id = c.name;
  p.k_anonymity = c.k;
  p.epsilon = epsilon;
  p.value_sensitivity = c.value_sensitivity;
  p.gradient_bound = psi;
  p.feature_sensitivity = c.feature_sensitivity;
  p.dp_mode = mode;
  return p;
}

std::span<const Sample> TrainSplit(const ExperimentConfig& c, const Dataset& d) {
  std::span<const Sample> s = d.train;
  if (c.train_limit > 0 && c.train_limit < s.size()) s = s.first(c.train_limit);
  return s;
}

size_t RecordsProcessed(const TrainingResult& r) {
  size_t n = 0;
  for (const auto& m : r.rounds) n += m.blocked ? 0 : m.batch_size;
  return n;
}

absl::StatusOr<PointOutcome> RunPoint(const ExperimentConfig& c, const Dataset& d,
                                      const PrivacyPolicy& policy, size_t batch,
                                      uint64_t seed, bool run_mpc, bool run_local,
                                      Transport transport) {
  PointOutcome out;
  const auto network = c.network.empty() ? DefaultNetwork(d) : c.network;
  SeededRandom init_rng(DeriveSeed(seed, 1));
  MLARK_ASSIGN_OR_RETURN(MlpModel initial, MlpModel::Initialize(network, init_rng));
  LossSpec loss{c.loss, d.num_classes};
  const auto train = TrainSplit(c, d);

  PipelineOptions po;
  po.policy = policy;
  po.helper.clip_semantics = c.clip_semantics;
  po.helper.noise_seed = DeriveSeed(seed, 2);
  po.transport = transport;
  po.fake_rate = c.fake_rate;
  po.seed = DeriveSeed(seed, 3);
  MLARK_ASSIGN_OR_RETURN(auto pipeline, MpcPipeline::Create(po));
  MLARK_ASSIGN_OR_RETURN(std::vector<Sample> real, pipeline->Populate(train, d.num_classes));

  if (run_mpc) {
    TrainingRun run;
    run.policy_id = policy.policy_id;
    run.model = initial;
    run.loss = loss;
    run.optimizer = c.optimizer;
    run.learning_rate = c.learning_rate;
    run.batch_size = batch;
    run.epochs = c.epochs;
    run.max_rounds = c.max_rounds;
    run.seed = DeriveSeed(seed, 4);
    run.quantize_model = c.quantize_model;
    const auto t = Clock::now();
    MLARK_ASSIGN_OR_RETURN(TrainingResult r, pipeline->adserver().Train(run));
    out.mpc_ms = MsSince(t);
    out.mpc_accuracy = Accuracy(r.model, d.test);
    out.blocked_rounds = r.blocked_rounds;
    out.rounds = static_cast<int64_t>(r.rounds.size());
    out.mpc_records = RecordsProcessed(r);
    out.phases = r.totals;
  }
  if (run_local) {
    LocalTrainOptions lo;
    lo.policy = policy;
    lo.clip_semantics = c.clip_semantics;
    lo.optimizer = c.optimizer;
    lo.learning_rate = c.learning_rate;
    lo.batch_size = batch;
    lo.epochs = c.epochs;
    lo.max_rounds = c.max_rounds;
    lo.seed = DeriveSeed(seed, 4);
    lo.noise_seed = DeriveSeed(seed, 5);
    const auto t = Clock::now();
    MLARK_ASSIGN_OR_RETURN(TrainingResult r, TrainLocal(initial, loss, real, lo));
    out.local_ms = MsSince(t);
    out.local_accuracy = Accuracy(r.model, d.test);
    out.local_records = RecordsProcessed(r);
  }
  return out;
}

// Runs fn(i) for i in [0, n), concurrently when parallel is set.
absl::StatusOr<std::vector<nlohmann::json>> RunPoints(
    size_t n, bool parallel,
    const std::function<absl::StatusOr<nlohmann::json>(size_t)>& fn) {
  std::vector<nlohmann::json> rows(n);
  if (!parallel) {
    for (size_t i = 0; i < n; ++i) {
      MLARK_ASSIGN_OR_RETURN(rows[i], fn(i));
    }
    return rows;
  }
  std::vector<std::future<absl::StatusOr<nlohmann::json>>> futures;
  for (size_t i = 0; i < n; ++i) {
    futures.push_back(std::async(std::launch::async, fn, i));
  }
  for (size_t i = 0; i < n; ++i) {
    MLARK_ASSIGN_OR_RETURN(rows[i], futures[i].get());
  }
  return rows;
}

struct GridPoint {
  double epsilon;
  double psi;
  size_t batch;
  int repetition;
};

std::vector<GridPoint> Grid(const ExperimentConfig& c) {
  std::vector<GridPoint> g;
  for (double e : c.epsilons)
    for (double p : c.psis)
      for (size_t b : c.batch_sizes)
        for (int r = 0; r < c.repetitions; ++r) g.push_back({e, p, b, r});
  return g;
}

}  // namespace

absl::StatusOr<ResultTable> RunPrivacySweep(const ExperimentConfig& c, const Dataset& d) {
  const auto grid = Grid(c);
  ResultTable t;
  t.name = c.name;
  MLARK_ASSIGN_OR_RETURN(
      t.rows, RunPoints(grid.size(), c.parallel, [&](size_t i) -> absl::StatusOr<nlohmann::json> {
        const GridPoint& p = grid[i];
        nlohmann::json point = {{"epsilon", Real(p.epsilon)}, {"psi", Real(p.psi)},
                                {"batch_size", p.batch}, {"repetition", p.repetition}};
        const uint64_t seed = PointSeed(c.seed, point);
        MLARK_ASSIGN_OR_RETURN(
            PointOutcome o,
            RunPoint(c, d, PolicyFor(c, c.dp_mode, p.epsilon, p.psi), p.batch, seed,
                     true, false, c.transport));
        nlohmann::json row = {{"experiment", "privacy"}, {"dataset", d.name},
                              {"dp_mode", DpModeName(c.dp_mode)}};
        row.update(point);
        row["seed"] = seed;
        row["accuracy"] = o.mpc_accuracy;
        row["rounds"] = o.rounds;
        row["blocked_rounds"] = o.blocked_rounds;
        return row;
      }));
  return t;
}

absl::StatusOr<ResultTable> RunLocalDpSweep(const ExperimentConfig& c, const Dataset& d) {
  ExperimentConfig local = c;
  local.psis = {c.psis.empty() ? 1.0 : c.psis.front()};
  local.batch_sizes = {c.batch_sizes.empty() ? size_t{32} : c.batch_sizes.front()};
  const auto grid = Grid(local);
  ResultTable t;
  t.name = c.name;
  MLARK_ASSIGN_OR_RETURN(
      t.rows, RunPoints(grid.size(), c.parallel, [&](size_t i) -> absl::StatusOr<nlohmann::json> {
        const GridPoint& p = grid[i];
        nlohmann::json point = {{"epsilon", Real(p.epsilon)}, {"repetition", p.repetition}};
        // Noise aside, every epsilon shares the repetition's seed so the
        // curve isolates the effect of feature noise.
        const uint64_t seed = PointSeed(c.seed, {{"repetition", p.repetition}});
        MLARK_ASSIGN_OR_RETURN(
            PointOutcome o,
            RunPoint(c, d, PolicyFor(c, DpMode::kLocal, p.epsilon, p.psi), p.batch, seed,
                     true, false, c.transport));
        nlohmann::json row = {{"experiment", "local_dp"}, {"dataset", d.name},
                              {"dp_mode", "local"},
                              {"feature_sensitivity", c.feature_sensitivity}};
        row.update(point);
        row["log10_epsilon"] = std::isfinite(p.epsilon) ? Real(std::log10(p.epsilon))
                                                        : Real(p.epsilon);
        row["batch_size"] = p.batch;
        row["seed"] = seed;
        row["accuracy"] = o.mpc_accuracy;
        return row;
      }));
  return t;
}

absl::StatusOr<ResultTable> RunComparison(const ExperimentConfig& c, const Dataset& d) {
  const auto grid = Grid(c);
  ResultTable t;
  t.name = c.name;
  MLARK_ASSIGN_OR_RETURN(
      t.rows, RunPoints(grid.size(), c.parallel, [&](size_t i) -> absl::StatusOr<nlohmann::json> {
        const GridPoint& p = grid[i];
        nlohmann::json point = {{"epsilon", Real(p.epsilon)}, {"psi", Real(p.psi)},
                                {"batch_size", p.batch}, {"repetition", p.repetition}};
        const uint64_t seed = PointSeed(c.seed, point);
        MLARK_ASSIGN_OR_RETURN(
            PointOutcome o,
            RunPoint(c, d, PolicyFor(c, c.dp_mode, p.epsilon, p.psi), p.batch, seed,
                     true, true, c.transport));
        nlohmann::json row = {{"experiment", "compare"}, {"dataset", d.name},
                              {"dp_mode", DpModeName(c.dp_mode)}};
        row.update(point);
        row["seed"] = seed;
        row["mpc_accuracy"] = o.mpc_accuracy;
        row["local_accuracy"] = o.local_accuracy;
        row["accuracy_gap"] = o.mpc_accuracy - o.local_accuracy;
        return row;
      }));
  return t;
}

absl::StatusOr<ResultTable> RunLatencyStudy(const ExperimentConfig& c, const Dataset& d) {
  ResultTable t;
  t.name = c.name;
  const double psi = c.psis.empty() ? 1.0 : c.psis.front();
  const double epsilon = c.epsilons.empty() ? INFINITY : c.epsilons.front();
  const PrivacyPolicy policy = PolicyFor(c, c.dp_mode, epsilon, psi);
  for (size_t batch : c.batch_sizes) {
    std::vector<double> ratios;
    for (int run = 0; run < c.latency_runs; ++run) {
      nlohmann::json point = {{"batch_size", batch}, {"run", run}};
      const uint64_t seed = PointSeed(c.seed, point);
      MLARK_ASSIGN_OR_RETURN(PointOutcome o, RunPoint(c, d, policy, batch, seed, true,
                                                      true, c.transport));
      const double mpc_per = o.mpc_ms / std::max<size_t>(o.mpc_records, 1);
      const double local_per = o.local_ms / std::max<size_t>(o.local_records, 1);
      const double ratio = mpc_per / local_per;
      ratios.push_back(ratio);
      nlohmann::json row = {{"experiment", "latency"},
                            {"dataset", d.name},
                            {"transport", c.transport == Transport::kHttp ? "http" : "inprocess"},
                            {"epsilon", Real(epsilon)},
                            {"psi", Real(psi)},
                            {"batch_size", batch},
                            {"run", run},
                            {"seed", seed},
                            {"mpc_ms", o.mpc_ms},
                            {"local_ms", o.local_ms},
                            {"mpc_ms_per_record", mpc_per},
                            {"local_ms_per_record", local_per},
                            {"package_ms", o.phases.package_ms},
                            {"transmit_ms", o.phases.transmit_ms},
                            {"helper_ms", o.phases.helper_ms},
                            {"combine_ms", o.phases.combine_ms},
                            {"ratio", ratio}};
      t.rows.push_back(std::move(row));
    }
    std::sort(ratios.begin(), ratios.end());
    const size_t n = ratios.size();
    const double median =
        n % 2 ? ratios[n / 2] : 0.5 * (ratios[n / 2 - 1] + ratios[n / 2]);
    t.rows.push_back({{"experiment", "latency"},
                      {"dataset", d.name},
                      {"batch_size", batch},
                      {"run", "median"},
                      {"ratio", median}});
  }
  return t;
}

absl::StatusOr<ResultTable> RunExperiment(const ExperimentConfig& c) {
  MLARK_ASSIGN_OR_RETURN(Dataset d, LoadDataset(c.dataset, c.dataset_seed));
  if (c.kind == "privacy") return RunPrivacySweep(c, d);
  if (c.kind == "local_dp") return RunLocalDpSweep(c, d);
  if (c.kind == "latency") return RunLatencyStudy(c, d);
  if (c.kind == "compare") return RunComparison(c, d);
  return absl::InvalidArgumentError(absl::StrCat(
      "unknown experiment kind '", c.kind,
      "' (expected privacy, local_dp, latency or compare)"));
}

}  // namespace mlark
