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

#include "mlark/helper.h"

#include <chrono>
#include <cmath>
#include <map>
#include <vector>

#include "absl/strings/str_cat.h"
#include "mlark/kernels.h"
#include "mlark/model.h"
#include "mlark/record.h"
#include "mlark/ring.h"
#include "mlark/status.h"

namespace mlark {

namespace {

double ElapsedMs(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now() - start)
      .count();
}

bool AggregateNoiseOn(const PrivacyPolicy& policy) {
  return policy.dp_mode != DpMode::kOff && std::isfinite(policy.epsilon);
}

// Sum over candidates of mask * f(label) for one record, in the ring.
int64_t RecordValue(const RingSpec& ring, const PlaintextRecord& r, ValueFn fn) {
  uint64_t acc = 0;
  for (size_t c = 0; c < r.labels.size(); ++c) {
    const uint64_t v = fn == ValueFn::kCount ? 1 : static_cast<uint64_t>(r.labels[c]);
    acc += static_cast<uint64_t>(r.masks[c]) * v;
  }
  return ring.Reduce(acc);
}

}  // namespace

struct HelperService::Opened {
  PrivacyPolicy policy;
  RingSpec ring;
  std::vector<PlaintextRecord> records;
  std::vector<int64_t> dropped;
};

HelperService::HelperService(HelperKeyPair keys, PolicyRegistry registry,
                             HelperConfig config)
    : keys_(std::move(keys)), registry_(std::move(registry)), config_(config) {}

std::unique_ptr<RandomSource> HelperService::NoiseSource() {
  const uint64_t n = request_counter_.fetch_add(1);
  if (config_.noise_seed.has_value()) {
    return std::make_unique<SeededRandom>(DeriveSeed(*config_.noise_seed, n));
  }
  return std::make_unique<SecureRandom>();
}

absl::StatusOr<HelperService::Opened> HelperService::OpenAll(
    const HelperRequest& request, const PrivacyPolicy& policy) const {
  if (request.reports.size() > config_.max_batch_size) {
    return absl::InvalidArgumentError(
        absl::StrCat("batch of ", request.reports.size(),
                     " exceeds max_batch_size ", config_.max_batch_size));
  }
  if (request.shared_seed.has_value() != (request.job_kind == JobKind::kGradient)) {
    return absl::InvalidArgumentError(
        "shared_seed must be present exactly for gradient jobs");
  }
  MLARK_ASSIGN_OR_RETURN(RingSpec ring, RingSpec::Create(policy.ring_modulus));
  Opened out{policy, ring, {}, {}};
  out.records.reserve(request.reports.size());
  for (size_t i = 0; i < request.reports.size(); ++i) {
    const SealedReport& sealed = request.reports[i];
    if (sealed.key_id != keys_.key_id()) {
      return absl::FailedPreconditionError(
          absl::StrCat("report ", i, " is sealed for key '", sealed.key_id,
                       "', not '", keys_.key_id(), "'"));
    }
    auto plaintext = keys_.Open(sealed);
    auto header = DecodeReportHeader(sealed.ad);
    absl::StatusOr<PlaintextRecord> record =
        plaintext.ok() ? DecodeRecord(*plaintext) : plaintext.status();
    bool usable = record.ok() && header.ok() &&
                  header->policy_id == request.policy_id &&
                  record->policy_id == request.policy_id;
    if (usable) {
      for (int64_t m : record->masks) usable = usable && ring.IsCanonical(m);
    }
    if (!usable) {
      out.dropped.push_back(static_cast<int64_t>(i));
      continue;
    }
    out.records.push_back(*std::move(record));
  }
  return out;
}

absl::StatusOr<HelperResponse> HelperService::Handle(const HelperRequest& request) {
  switch (request.job_kind) {
    case JobKind::kAggregate:
      return HandleAggregate(request);
    case JobKind::kGroupBy:
      return HandleGroupBy(request);
    case JobKind::kGradient:
      return HandleGradient(request);
  }
  return absl::InvalidArgumentError("unknown job kind");
}

absl::StatusOr<HelperResponse> HelperService::HandleAggregate(
    const HelperRequest& request) {
  const auto start = std::chrono::steady_clock::now();
  MLARK_ASSIGN_OR_RETURN(PrivacyPolicy policy, registry_.Find(request.policy_id));
  MLARK_ASSIGN_OR_RETURN(Opened opened, OpenAll(request, policy));

  HelperResponse resp;
  resp.job_kind = JobKind::kAggregate;
  resp.records_used = static_cast<int64_t>(opened.records.size());
  resp.dropped = opened.dropped;
  std::vector<std::string> ids;
  for (const auto& r : opened.records) ids.push_back(r.record_id);
  resp.records_digest =
      RecordsDigest(JobKind::kAggregate, request.policy_id, std::nullopt, ids);

  if (KAnonymityGate(resp.records_used, policy) == GateResult::kBlocked) {
    resp.blocked = true;
    resp.compute_ms = ElapsedMs(start);
    return resp;
  }
  uint64_t sum = 0;
  for (const auto& r : opened.records) {
    sum += static_cast<uint64_t>(RecordValue(opened.ring, r, request.value_fn));
  }
  resp.scalar = static_cast<double>(opened.ring.Reduce(sum));
  if (AggregateNoiseOn(policy)) {
    auto rng = NoiseSource();
    MLARK_ASSIGN_OR_RETURN(
        double noise, LaplaceSample(policy.value_sensitivity / policy.epsilon, *rng));
    resp.scalar += noise;
  }
  resp.compute_ms = ElapsedMs(start);
  return resp;
}

absl::StatusOr<HelperResponse> HelperService::HandleGroupBy(
    const HelperRequest& request) {
  const auto start = std::chrono::steady_clock::now();
  MLARK_ASSIGN_OR_RETURN(PrivacyPolicy policy, registry_.Find(request.policy_id));
  if (!policy.HasSideInfoKey(request.group_by)) {
    return absl::InvalidArgumentError(
        absl::StrCat("group_by key '", request.group_by, "' is not declared"));
  }
  for (const auto& [key, value] : request.filter) {
    if (!policy.HasSideInfoKey(key)) {
      return absl::InvalidArgumentError(
          absl::StrCat("filter key '", key, "' is not declared"));
    }
  }
  MLARK_ASSIGN_OR_RETURN(Opened opened, OpenAll(request, policy));

  HelperResponse resp;
  resp.job_kind = JobKind::kGroupBy;
  resp.records_used = static_cast<int64_t>(opened.records.size());
  resp.dropped = opened.dropped;
  std::vector<std::string> ids;
  for (const auto& r : opened.records) ids.push_back(r.record_id);
  resp.records_digest =
      RecordsDigest(JobKind::kGroupBy, request.policy_id, std::nullopt, ids);

  struct Group {
    int64_t count = 0;
    uint64_t sum = 0;
  };
  std::map<std::string, Group> groups;
  for (const auto& r : opened.records) {
    bool match = true;
    for (const auto& [key, value] : request.filter) {
      auto it = r.side_info.find(key);
      match = match && it != r.side_info.end() && it->second == value;
    }
    if (!match) continue;
    auto it = r.side_info.find(request.group_by);
    Group& g = groups[it == r.side_info.end() ? std::string() : it->second];
    ++g.count;
    g.sum += static_cast<uint64_t>(RecordValue(opened.ring, r, request.value_fn));
  }
  std::unique_ptr<RandomSource> rng;
  if (AggregateNoiseOn(policy)) rng = NoiseSource();
  for (const auto& [key, g] : groups) {
    if (KAnonymityGate(g.count, policy) == GateResult::kBlocked) continue;
    double value = static_cast<double>(opened.ring.Reduce(g.sum));
    if (rng) {
      MLARK_ASSIGN_OR_RETURN(
          double noise, LaplaceSample(policy.value_sensitivity / policy.epsilon, *rng));
      value += noise;
    }
    resp.groups[key] = value;
  }
  resp.blocked = resp.groups.empty();
  resp.compute_ms = ElapsedMs(start);
  return resp;
}

absl::StatusOr<HelperResponse> HelperService::HandleGradient(
    const HelperRequest& request) {
  const auto start = std::chrono::steady_clock::now();
  MLARK_ASSIGN_OR_RETURN(PrivacyPolicy policy, registry_.Find(request.policy_id));
  MLARK_ASSIGN_OR_RETURN(MlpModel model, DeserializeModel(request.model_blob));
  MLARK_RETURN_IF_ERROR(request.loss.ValidateFor(model));
  const bool noise_on = policy.dp_mode == DpMode::kGlobal && std::isfinite(policy.epsilon);
  const bool clip_on = policy.dp_mode != DpMode::kLocal;
  if (noise_on && std::isinf(policy.gradient_bound)) {
    return absl::FailedPreconditionError(
        "global DP on gradients needs a finite gradient_bound");
  }
  MLARK_ASSIGN_OR_RETURN(Opened opened, OpenAll(request, policy));
  for (const auto& r : opened.records) {
    if (r.features.size() != model.input_dim()) {
      return absl::InvalidArgumentError(
          absl::StrCat("record has ", r.features.size(), " features, model expects ",
                       model.input_dim()));
    }
    for (int64_t label : r.labels) MLARK_RETURN_IF_ERROR(request.loss.ValidateLabel(label));
  }

  const size_t dim = model.parameter_count();
  HelperResponse resp;
  resp.job_kind = JobKind::kGradient;
  resp.dropped = opened.dropped;

  if (KAnonymityGate(static_cast<int64_t>(opened.records.size()), policy) ==
      GateResult::kBlocked) {
    std::vector<std::string> ids;
    for (const auto& r : opened.records) ids.push_back(r.record_id);
    resp.records_used = static_cast<int64_t>(opened.records.size());
    resp.records_digest =
        RecordsDigest(JobKind::kGradient, request.policy_id, request.shared_seed, ids);
    resp.blocked = true;
    resp.gradient = GradientVector(dim);
    resp.compute_ms = ElapsedMs(start);
    return resp;
  }

  // Every candidate of every record is differentiated, whatever its mask.
  // A record whose gradient is not finite is skipped; both helpers see the
  // same model, features and labels, so they skip the same records.
  const size_t workers = std::max<size_t>(config_.workers, 1);
  std::vector<GradientWorkspace> spaces(workers);
  std::vector<std::vector<double>> scratch(workers, std::vector<double>(dim));
  std::vector<std::vector<double>> record_acc(workers, std::vector<double>(dim));
  std::vector<char> skipped(opened.records.size(), 0);
  const double bound = policy.gradient_bound;
  const ClipSemantics semantics = config_.clip_semantics;

  auto add = [&](size_t i, std::span<double> acc, size_t w) -> absl::Status {
    const PlaintextRecord& r = opened.records[i];
    const std::vector<double> x = NormalizeFeatures(r.features);
    auto& g = scratch[w];
    auto& local = record_acc[w];
    std::fill(local.begin(), local.end(), 0.0);
    for (size_t c = 0; c < r.labels.size(); ++c) {
      auto loss = spaces[w].LossAndGradient(model, request.loss, x, r.labels[c], g);
      if (!loss.ok()) {
        if (loss.status().code() == absl::StatusCode::kInternal) {
          skipped[i] = 1;
          return absl::OkStatus();
        }
        return loss.status();
      }
      double scale = 1.0;
      if (clip_on) {
        const double norm = std::sqrt(kernels::Dot(g, g));
        if (!std::isfinite(norm)) {
          skipped[i] = 1;
          return absl::OkStatus();
        }
        scale = ClipScale(norm, bound, semantics);
      }
      kernels::Axpy(static_cast<double>(r.masks[c]) * scale, g, local);
    }
    kernels::Axpy(1.0, local, acc);
    return absl::OkStatus();
  };
  MLARK_ASSIGN_OR_RETURN(std::vector<double> sum,
                         DeterministicSum(opened.records.size(), dim, add, workers));

  std::vector<std::string> ids;
  for (size_t i = 0; i < opened.records.size(); ++i) {
    if (!skipped[i]) ids.push_back(opened.records[i].record_id);
  }
  resp.records_used = static_cast<int64_t>(ids.size());
  resp.records_digest =
      RecordsDigest(JobKind::kGradient, request.policy_id, request.shared_seed, ids);

  if (noise_on) {
    const double scale = ClippedNormBound(bound, semantics) / policy.epsilon;
    auto rng = NoiseSource();
    for (double& v : sum) {
      MLARK_ASSIGN_OR_RETURN(double noise, LaplaceSample(scale, *rng));
      v += noise;
    }
  }
  resp.gradient.values = std::move(sum);
  resp.compute_ms = ElapsedMs(start);
  return resp;
}

absl::StatusOr<HelperResponse> InProcessHelperClient::Call(
    const HelperRequest& request) {
  if (!round_trip_json_) return service_->Handle(request);
  MLARK_ASSIGN_OR_RETURN(
      HelperRequest decoded,
      HelperRequestFromJson(nlohmann::json::parse(HelperRequestToJson(request).dump())));
  MLARK_ASSIGN_OR_RETURN(HelperResponse resp, service_->Handle(decoded));
  return HelperResponseFromJson(nlohmann::json::parse(HelperResponseToJson(resp).dump()));
}

}  // namespace mlark
