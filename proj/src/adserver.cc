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

#include "mlark/adserver.h"

#include <algorithm>
#include <chrono>
#include <future>
#include <numeric>
#include <set>

#include "absl/strings/str_cat.h"
#include "mlark/random.h"
#include "mlark/status.h"

namespace mlark {

namespace {

using Clock = std::chrono::steady_clock;

double MsSince(Clock::time_point t) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t).count();
}

bool EligibleFor(std::string_view job_kind, JobKind kind) {
  if (job_kind == "any") return true;
  return kind == JobKind::kGradient ? job_kind == "gradient"
                                    : job_kind == "aggregate";
}

}  // namespace

nlohmann::json RoundMetricsToJson(const RoundMetrics& m) {
  nlohmann::json j = {{"round", m.round},
                      {"epoch", m.epoch},
                      {"batch_size", m.batch_size},
                      {"records_used", m.records_used},
                      {"blocked", m.blocked},
                      {"gradient_norm", m.gradient_norm},
                      {"package_ms", m.timings.package_ms},
                      {"transmit_ms", m.timings.transmit_ms},
                      {"helper_ms", m.timings.helper_ms},
                      {"combine_ms", m.timings.combine_ms}};
  if (m.accuracy.has_value()) j["accuracy"] = *m.accuracy;
  return j;
}

std::vector<std::vector<size_t>> EpochSchedule(size_t n, size_t batch_size,
                                               int epochs, uint64_t seed) {
  std::vector<std::vector<size_t>> batches;
  if (n == 0 || batch_size == 0) return batches;
  std::vector<size_t> order(n);
  for (int e = 0; e < epochs; ++e) {
    std::iota(order.begin(), order.end(), size_t{0});
    SeededRandom rng(DeriveSeed(seed, static_cast<uint64_t>(e)));
    Shuffle(order.begin(), order.end(), rng);
    for (size_t start = 0; start < n; start += batch_size) {
      const size_t end = std::min(n, start + batch_size);
      batches.emplace_back(order.begin() + start, order.begin() + end);
    }
  }
  return batches;
}

uint64_t RoundSharedSeed(uint64_t run_seed, int64_t round) {
  return DeriveSeed(DeriveSeed(run_seed, 0x5eed), static_cast<uint64_t>(round));
}

AdServer::AdServer(ReportStore* store, std::array<HelperClient*, 2> helpers,
                   AdServerOptions options)
    : store_(store), helpers_(helpers), options_(options) {}

absl::StatusOr<uint64_t> AdServer::Ingest(const ReportPair& pair) {
  return store_->Append(pair);
}

absl::StatusOr<PrivacyPolicy> AdServer::Policy(const std::string& policy_id) {
  {
    std::lock_guard<std::mutex> lock(policy_mu_);
    auto it = policies_.find(policy_id);
    if (it != policies_.end()) return it->second;
  }
  MLARK_ASSIGN_OR_RETURN(PrivacyPolicy p0, helpers_[0]->FetchPolicy(policy_id));
  MLARK_ASSIGN_OR_RETURN(PrivacyPolicy p1, helpers_[1]->FetchPolicy(policy_id));
  if (PolicyToJson(p0) != PolicyToJson(p1)) {
    return absl::FailedPreconditionError(
        absl::StrCat("helpers publish different documents for policy '",
                     policy_id, "'"));
  }
  std::lock_guard<std::mutex> lock(policy_mu_);
  policies_[policy_id] = p0;
  return p0;
}

ReportStore::Snapshot AdServer::Eligible(const std::string& policy_id,
                                         JobKind kind) const {
  ReportStore::Snapshot out;
  for (auto& r : store_->snapshot()) {
    if (r->policy_id == policy_id && EligibleFor(r->job_kind, kind)) {
      out.push_back(r);
    }
  }
  return out;
}

absl::StatusOr<AdServer::Dispatch> AdServer::DispatchPaired(
    HelperRequest base, ReportStore::Snapshot batch, const HalfSelector& selector) {
  Dispatch out;
  const auto start = Clock::now();
  for (int attempt = 0;; ++attempt) {
    std::array<HelperRequest, 2> requests{base, base};
    for (int h = 0; h < 2; ++h) {
      if (selector) {
        requests[h].reports = selector(h, batch);
      } else {
        requests[h].reports.reserve(batch.size());
        for (const auto& r : batch) requests[h].reports.push_back(r->pair.half(h));
      }
    }
    auto second = std::async(std::launch::async,
                             [&] { return helpers_[1]->Call(requests[1]); });
    absl::StatusOr<HelperResponse> first = helpers_[0]->Call(requests[0]);
    absl::StatusOr<HelperResponse> other = second.get();
    MLARK_RETURN_IF_ERROR(first.status());
    MLARK_RETURN_IF_ERROR(other.status());
    out.responses = {*std::move(first), *std::move(other)};

    std::set<int64_t> dropped;
    for (const auto& resp : out.responses) {
      for (int64_t i : resp.dropped) {
        if (i < 0 || static_cast<size_t>(i) >= batch.size()) {
          return IntegrityError(absl::StrCat("helper reported dropped index ", i,
                                             " outside a batch of ", batch.size()));
        }
        dropped.insert(i);
      }
    }
    if (dropped.empty()) break;
    if (attempt >= options_.max_redispatch) {
      return IntegrityError(absl::StrCat(dropped.size(),
                                         " reports still undecryptable after ",
                                         attempt, " redispatches"));
    }
    ReportStore::Snapshot kept;
    for (size_t i = 0; i < batch.size(); ++i) {
      if (!dropped.count(static_cast<int64_t>(i))) kept.push_back(batch[i]);
    }
    batch = std::move(kept);
    ++out.redispatches;
  }

  const auto& [a, b] = out.responses;
  if (a.records_used != b.records_used || a.records_digest != b.records_digest ||
      a.blocked != b.blocked) {
    return IntegrityError(absl::StrCat(
        "records_used mismatch between helpers (", a.records_used, " vs ",
        b.records_used, a.records_digest != b.records_digest ? ", digests differ" : "",
        "); report halves are misaligned"));
  }
  out.used = std::move(batch);
  out.wall_ms = MsSince(start);
  return out;
}

absl::StatusOr<AggregateResult> AdServer::RunAggregateQuery(
    const AggregateQuery& query) {
  MLARK_ASSIGN_OR_RETURN(PrivacyPolicy policy, Policy(query.policy_id));
  MLARK_ASSIGN_OR_RETURN(RingSpec ring, RingSpec::Create(policy.ring_modulus));
  HelperRequest base;
  base.job_kind = query.group_by.empty() ? JobKind::kAggregate : JobKind::kGroupBy;
  base.policy_id = query.policy_id;
  base.value_fn = query.value_fn;
  base.group_by = query.group_by;
  base.filter = query.filter;
  MLARK_ASSIGN_OR_RETURN(
      Dispatch d, DispatchPaired(base, Eligible(query.policy_id, JobKind::kAggregate)));

  const auto& [a, b] = d.responses;
  AggregateResult result;
  result.blocked = a.blocked;
  result.records_used = a.records_used;
  result.redispatches = d.redispatches;
  if (base.job_kind == JobKind::kAggregate) {
    result.value = ring.WrapReal(a.scalar + b.scalar);
    return result;
  }
  if (a.groups.size() != b.groups.size()) {
    return IntegrityError("helpers returned different group sets");
  }
  for (const auto& [key, value] : a.groups) {
    auto it = b.groups.find(key);
    if (it == b.groups.end()) {
      return IntegrityError(absl::StrCat("group '", key, "' missing from helper 1"));
    }
    result.groups[key] = ring.WrapReal(value + it->second);
  }
  return result;
}

absl::StatusOr<TrainingResult> AdServer::Train(const TrainingRun& run,
                                               const TrainHooks& hooks) {
  MLARK_ASSIGN_OR_RETURN(PrivacyPolicy policy, Policy(run.policy_id));
  if (static_cast<int64_t>(run.batch_size) < policy.k_anonymity) {
    return absl::FailedPreconditionError(
        absl::StrCat("batch_size ", run.batch_size, " is below k = ",
                     policy.k_anonymity, "; every round would be blocked"));
  }
  MLARK_RETURN_IF_ERROR(run.loss.ValidateFor(run.model));
  const ReportStore::Snapshot eligible = Eligible(run.policy_id, JobKind::kGradient);
  if (eligible.empty()) {
    return absl::FailedPreconditionError(
        absl::StrCat("no gradient-eligible reports for policy '", run.policy_id, "'"));
  }

  std::unique_ptr<Optimizer> optimizer;
  if (run.optimizer == OptimizerKind::kAdam) {
    optimizer = std::make_unique<AdamOptimizer>(run.learning_rate);
  } else {
    optimizer = std::make_unique<SgdOptimizer>(run.learning_rate);
  }

  TrainingResult result;
  result.model = run.model;
  const auto schedule =
      EpochSchedule(eligible.size(), run.batch_size, run.epochs, run.seed);
  const size_t per_epoch = (eligible.size() + run.batch_size - 1) / run.batch_size;

  for (size_t r = 0; r < schedule.size(); ++r) {
    if (run.max_rounds > 0 && static_cast<int64_t>(r) >= run.max_rounds) break;
    RoundMetrics m;
    m.round = static_cast<int64_t>(r);
    m.epoch = static_cast<int>(r / per_epoch);
    m.batch_size = schedule[r].size();

    auto t = Clock::now();
    HelperRequest base;
    base.job_kind = JobKind::kGradient;
    base.policy_id = run.policy_id;
    base.loss = run.loss;
    base.shared_seed = RoundSharedSeed(run.seed, m.round);
    base.model_blob = run.quantize_model ? QuantizeModel8Bit(result.model)
                                         : SerializeModel(result.model);
    ReportStore::Snapshot batch;
    batch.reserve(schedule[r].size());
    for (size_t i : schedule[r]) batch.push_back(eligible[i]);
    m.timings.package_ms = MsSince(t);

    MLARK_ASSIGN_OR_RETURN(Dispatch d, DispatchPaired(std::move(base), std::move(batch)));
    m.timings.helper_ms =
        std::max(d.responses[0].compute_ms, d.responses[1].compute_ms);
    m.timings.transmit_ms = std::max(0.0, d.wall_ms - m.timings.helper_ms);
    m.records_used = d.responses[0].records_used;

    t = Clock::now();
    if (d.responses[0].blocked) {
      m.blocked = true;
      ++result.blocked_rounds;
    } else {
      const auto& g0 = d.responses[0].gradient.values;
      const auto& g1 = d.responses[1].gradient.values;
      if (g0.size() != result.model.parameter_count() || g1.size() != g0.size()) {
        return IntegrityError("helper gradient has the wrong length");
      }
      GradientVector sum(g0.size());
      for (size_t j = 0; j < g0.size(); ++j) sum[j] = g0[j] + g1[j];
      m.gradient_norm = sum.L2Norm();
      MLARK_RETURN_IF_ERROR(optimizer->Apply(result.model, sum));
    }
    m.timings.combine_ms = MsSince(t);

    const bool epoch_end = (r + 1) % per_epoch == 0 || r + 1 == schedule.size() ||
                           (run.max_rounds > 0 &&
                            static_cast<int64_t>(r + 1) == run.max_rounds);
    if (hooks.evaluate && epoch_end) m.accuracy = hooks.evaluate(result.model);

    result.totals.package_ms += m.timings.package_ms;
    result.totals.transmit_ms += m.timings.transmit_ms;
    result.totals.helper_ms += m.timings.helper_ms;
    result.totals.combine_ms += m.timings.combine_ms;
    if (hooks.on_round) hooks.on_round(m);
    result.rounds.push_back(std::move(m));
  }
  return result;
}

}  // namespace mlark
