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

#ifndef MLARK_TESTS_TEST_UTIL_H_
#define MLARK_TESTS_TEST_UTIL_H_

#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "mlark/browser.h"
#include "mlark/envelope.h"
#include "mlark/envelope_open.h"
#include "mlark/helper.h"
#include "mlark/helper_wire.h"
#include "mlark/privacy.h"
#include "mlark/random.h"
#include "mlark/record.h"

namespace mlark::testing {

// Replays a fixed list of words, then falls back to a seeded stream.
class ScriptedRandom final : public RandomSource {
 public:
  explicit ScriptedRandom(std::vector<uint64_t> words, uint64_t seed = 1)
      : words_(words.begin(), words.end()), fallback_(seed) {}
  uint64_t NextU64() override {
    if (words_.empty()) return fallback_.NextU64();
    const uint64_t w = words_.front();
    words_.pop_front();
    return w;
  }

 private:
  std::deque<uint64_t> words_;
  SeededRandom fallback_;
};

inline PrivacyPolicy NoNoisePolicy(std::string id = "p", int64_t k = 1) {
  PrivacyPolicy p;
  p.policy_id = std::move(id);
  p.k_anonymity = k;
  p.epsilon = INFINITY;
  p.gradient_bound = INFINITY;
  p.dp_mode = DpMode::kOff;
  return p;
}

// Two helpers with fresh keys sharing one registry.
struct HelperPair {
  explicit HelperPair(std::vector<PrivacyPolicy> policies, HelperConfig config = {}) {
    PolicyRegistry registry;
    for (auto& p : policies) {
      auto st = registry.Add(p, /*test_mode=*/true);
      if (!st.ok()) std::abort();
    }
    for (int h = 0; h < 2; ++h) {
      auto keys = HelperKeyPair::Generate(h == 0 ? "h0" : "h1");
      public_keys[h] = keys.public_key();
      HelperConfig c = config;
      if (c.noise_seed) c.noise_seed = DeriveSeed(*c.noise_seed, h);
      services[h] = std::make_unique<HelperService>(std::move(keys), registry, c);
    }
  }
  std::array<PublicKey, 2> public_keys;
  std::array<std::unique_ptr<HelperService>, 2> services;
};

// Seals a hand-built plaintext for one helper.
inline SealedReport SealPlaintext(const PlaintextRecord& r, const PublicKey& key,
                                  const std::string& job_kind = "any") {
  ReportHeader header;
  header.policy_id = r.policy_id;
  header.job_kind = job_kind;
  header.nonce = r.record_id;
  auto sealed = Seal(key, EncodeRecord(r), EncodeReportHeader(header));
  if (!sealed.ok()) std::abort();
  return *std::move(sealed);
}

// A browser-built pair for one real record with the given label.
inline ReportPair RealPair(const HelperPair& helpers, const PrivacyPolicy& policy,
                           std::vector<uint8_t> features, int64_t label,
                           RandomSource& rng, int num_classes = 2,
                           std::map<std::string, std::string> side_info = {}) {
  auto rec = BuildMaskedRecord(features, label, policy, LabelSpace{num_classes},
                               std::move(side_info), rng);
  if (!rec.ok()) std::abort();
  auto pair = EmitReportPair(*rec, helpers.public_keys, policy, "any", rng);
  if (!pair.ok()) std::abort();
  return *std::move(pair);
}

inline ReportPair FakePair(const HelperPair& helpers, const PrivacyPolicy& policy,
                           std::vector<uint8_t> features, RandomSource& rng,
                           int num_classes = 2) {
  std::vector<std::vector<uint8_t>> pool = {features};
  BrowserConfig config;
  auto rec = BuildFakeRecord(pool, features.size(), policy, LabelSpace{num_classes},
                             config, {}, rng);
  if (!rec.ok()) std::abort();
  auto pair = EmitReportPair(*rec, helpers.public_keys, policy, "any", rng);
  if (!pair.ok()) std::abort();
  return *std::move(pair);
}

// The request helper h receives for these pairs.
inline HelperRequest RequestFor(int h, const HelperRequest& base,
                                const std::vector<ReportPair>& pairs) {
  HelperRequest r = base;
  r.reports.clear();
  for (const auto& p : pairs) r.reports.push_back(p.half(h));
  return r;
}

inline std::vector<uint8_t> RandomFeatures(size_t n, RandomSource& rng) {
  std::vector<uint8_t> x(n);
  for (auto& b : x) b = static_cast<uint8_t>(rng.UniformBelow(256));
  return x;
}

}  // namespace mlark::testing

#endif  // MLARK_TESTS_TEST_UTIL_H_
