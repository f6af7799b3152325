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

#ifndef MLARK_HELPER_H_
#define MLARK_HELPER_H_

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include "absl/status/statusor.h"
#include "mlark/envelope_open.h"
#include "mlark/helper_wire.h"
#include "mlark/privacy.h"

namespace mlark {

struct HelperConfig {
  ClipSemantics clip_semantics = ClipSemantics::kVerbatim;
  // When set, request n draws its noise from a stream derived from
  // (noise_seed, n); otherwise noise comes from the OS CSPRNG.
  std::optional<uint64_t> noise_seed;
  size_t max_batch_size = 1 << 16;
  size_t workers = 1;
};

// One helper. Stateless apart from the key, the policy registry and the noise
// stream counter, so handlers may run concurrently.
class HelperService {
 public:
  HelperService(HelperKeyPair keys, PolicyRegistry registry,
                HelperConfig config = {});

  absl::StatusOr<HelperResponse> Handle(const HelperRequest& request);
  absl::StatusOr<HelperResponse> HandleAggregate(const HelperRequest& request);
  absl::StatusOr<HelperResponse> HandleGroupBy(const HelperRequest& request);
  absl::StatusOr<HelperResponse> HandleGradient(const HelperRequest& request);

  PublicKey ServePublicKey() const { return keys_.public_key(); }
  absl::StatusOr<PrivacyPolicy> ServePolicy(std::string_view policy_id) const {
    return registry_.Find(policy_id);
  }

  const HelperConfig& config() const { return config_; }

 private:
  struct Opened;
  absl::StatusOr<Opened> OpenAll(const HelperRequest& request,
                                 const PrivacyPolicy& policy) const;
  std::unique_ptr<RandomSource> NoiseSource();

  HelperKeyPair keys_;
  PolicyRegistry registry_;
  HelperConfig config_;
  std::atomic<uint64_t> request_counter_{0};
};

// Calls a HelperService directly. With round_trip_json set, requests and
// responses pass through their wire encoding as they would over HTTP.
class InProcessHelperClient final : public HelperClient {
 public:
  explicit InProcessHelperClient(HelperService* service,
                                 bool round_trip_json = false)
      : service_(service), round_trip_json_(round_trip_json) {}

  absl::StatusOr<HelperResponse> Call(const HelperRequest& request) override;
  absl::StatusOr<PublicKey> FetchPublicKey() override {
    return service_->ServePublicKey();
  }
  absl::StatusOr<PrivacyPolicy> FetchPolicy(const std::string& id) override {
    return service_->ServePolicy(id);
  }

 private:
  HelperService* service_;
  bool round_trip_json_;
};

}  // namespace mlark

#endif  // MLARK_HELPER_H_
