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

#include "mlark/browser.h"

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/chi_squared.hpp>
#include <gtest/gtest.h>

#include "mlark/envelope_open.h"
#include "mlark/record.h"
#include "test_util.h"

namespace mlark {
namespace {

using ::mlark::testing::RandomFeatures;

// Two-sided binomial test p-value (doubling the smaller tail).
double BinomialPValue(int64_t successes, int64_t n, double p) {
  boost::math::binomial dist(static_cast<double>(n), p);
  const double lower = boost::math::cdf(dist, static_cast<double>(successes));
  const double upper =
      successes == 0 ? 1.0 : boost::math::cdf(boost::math::complement(dist, successes - 1.0));
  return std::min(1.0, 2 * std::min(lower, upper));
}

PrivacyPolicy Policy() {
  PrivacyPolicy p;
  p.policy_id = "p";
  return p;
}

struct Keys {
  Keys() : h0(HelperKeyPair::Generate("h0")), h1(HelperKeyPair::Generate("h1")) {}
  std::array<PublicKey, 2> pub() const { return {h0.public_key(), h1.public_key()}; }
  HelperKeyPair h0, h1;
};

TEST(FinalizeTest, Examples) {
  SeededRandom rng(1);
  BrowserConfig config;
  PendingAttribution p;
  p.impression_id = "i";
  p.expiry = 100;
  auto expired = FinalizeAttribution(p, 100, config, rng);
  ASSERT_TRUE(expired.ok());
  EXPECT_EQ(expired->label, 0);
  EXPECT_GE(expired->emit_time, 100);
  EXPECT_LE(expired->emit_time, 100 + config.delay_window_seconds);
  EXPECT_EQ(FinalizeAttribution(p, 99, config, rng).status().code(),
            absl::StatusCode::kFailedPrecondition);
  p.conversion_value = 1;
  EXPECT_EQ(FinalizeAttribution(p, 5, config, rng)->label, 1);
}

TEST(FinalizeTest, RealValuedConversionIsQuantized) {
  SeededRandom rng(2);
  BrowserConfig config;
  config.label_grid = *QuantizationGrid::Create(10, 10);
  PendingAttribution p;
  p.conversion_value = 3.7;
  const int n = 20000;
  int fours = 0;
  for (int i = 0; i < n; ++i) {
    const int64_t label = FinalizeAttribution(p, 0, config, rng)->label;
    ASSERT_TRUE(label == 3 || label == 4);
    fours += label == 4;
  }
  EXPECT_GT(BinomialPValue(fours, n, 0.7), 0.001);
  config.label_grid.reset();
  EXPECT_FALSE(FinalizeAttribution(p, 0, config, rng).ok());
}

TEST(FinalizeTest, DelayIsUniformOverWindow) {
  SeededRandom rng(3);
  BrowserConfig config;
  config.delay_window_seconds = 60;
  PendingAttribution p;
  std::vector<int64_t> counts(6, 0);
  const int n = 60000;
  for (int i = 0; i < n; ++i) {
    const double d = FinalizeAttribution(p, 0, config, rng)->emit_time;
    ASSERT_GE(d, 0);
    ASSERT_LT(d, 60);
    ++counts[static_cast<int>(d / 10)];
  }
  double stat = 0;
  for (int64_t c : counts) stat += (c - n / 6.0) * (c - n / 6.0) / (n / 6.0);
  boost::math::chi_squared dist(5);
  EXPECT_GT(boost::math::cdf(boost::math::complement(dist, stat)), 0.001);
}

TEST(FakeLabelTest, Examples) {
  SeededRandom rng(4);
  EXPECT_EQ(*DrawFakeLabel(0, {2}, rng), 1);
  EXPECT_EQ(*DrawFakeLabel(1, {2}, rng), 0);
  EXPECT_EQ(*DrawFakeLabel(7, {10}, rng), 0);
  EXPECT_EQ(DrawFakeLabel(0, {1}, rng).status().code(), absl::StatusCode::kInvalidArgument);
  EXPECT_FALSE(DrawFakeLabel(10, {10}, rng).ok());
}

TEST(FakeLabelTest, ZeroRealDrawsUniformNonzero) {
  SeededRandom rng(5);
  std::vector<int64_t> counts(10, 0);
  const int n = 90000;
  for (int i = 0; i < n; ++i) ++counts[*DrawFakeLabel(0, {10}, rng)];
  EXPECT_EQ(counts[0], 0);
  double stat = 0;
  for (int c = 1; c < 10; ++c) stat += (counts[c] - n / 9.0) * (counts[c] - n / 9.0) / (n / 9.0);
  boost::math::chi_squared dist(8);
  EXPECT_GT(boost::math::cdf(boost::math::complement(dist, stat)), 0.001);
}

// Per-candidate helper mask sums and which candidate is real.
struct Decoded {
  std::array<int64_t, 2> sums;
  int real_index = -1;
};

Decoded Decode(const MaskedRecord& r) {
  Decoded d;
  for (int c = 0; c < 2; ++c) {
    d.sums[c] = r.masks_h0[c] + r.masks_h1[c];
    if (d.sums[c] == 1) d.real_index = c;
  }
  return d;
}

TEST(MaskedRecordTest, StructureForEveryLabel) {
  SeededRandom rng(6);
  const PrivacyPolicy policy = Policy();
  for (int classes : {2, 3, 10}) {
    for (int64_t y = 0; y < classes; ++y) {
      for (int rep = 0; rep < 50; ++rep) {
        auto r = *BuildMaskedRecord(RandomFeatures(4, rng), y, policy, {classes}, {}, rng);
        const Decoded d = Decode(r);
        ASSERT_GE(d.real_index, 0);
        ASSERT_EQ(d.sums[1 - d.real_index], 0);
        ASSERT_EQ(r.candidate_labels[d.real_index], y);
        ASSERT_NE(r.candidate_labels[1 - d.real_index], y);
        ASSERT_TRUE(r.candidate_labels[0] == 0 || r.candidate_labels[1] == 0);
        ASSERT_FALSE(r.record_id.empty());
      }
    }
  }
}

TEST(MaskedRecordTest, RealPositionIsUniform) {
  SeededRandom rng(7);
  const PrivacyPolicy policy = Policy();
  const int n = 20000;
  int first = 0;
  for (int i = 0; i < n; ++i) {
    auto r = *BuildMaskedRecord(std::vector<uint8_t>{1}, 1, policy, {2}, {}, rng);
    first += Decode(r).real_index == 0;
  }
  EXPECT_GT(BinomialPValue(first, n, 0.5), 0.01);
}

TEST(MaskedRecordTest, FakeRecordsCarryOnlyFakeMasks) {
  SeededRandom rng(8);
  const PrivacyPolicy policy = Policy();
  BrowserConfig config;
  std::vector<std::vector<uint8_t>> pool = {{1, 2, 3}, {4, 5, 6}};
  for (int i = 0; i < 1000; ++i) {
    auto r = *BuildFakeRecord(pool, 3, policy, {2}, config, {}, rng);
    EXPECT_EQ(Decode(r).sums, (std::array<int64_t, 2>{0, 0}));
    EXPECT_TRUE(r.features == pool[0] || r.features == pool[1]);
  }
  config.fake_features = FakeFeatureSource::kRandomBytes;
  auto r = *BuildFakeRecord(pool, 9, policy, {2}, config, {}, rng);
  EXPECT_EQ(r.features.size(), 9u);
}

TEST(MaskedRecordTest, FakesCancelInAnyDeterministicFunction) {
  SeededRandom rng(9);
  const PrivacyPolicy policy = Policy();
  BrowserConfig config;
  std::vector<std::vector<uint8_t>> pool = {RandomFeatures(5, rng)};
  for (int i = 0; i < 2000; ++i) {
    auto r = *BuildFakeRecord(pool, 5, policy, {3}, config, {}, rng);
    double h0 = 0, h1 = 0;
    for (int c = 0; c < 2; ++c) {
      const double f = std::sin(r.features[0] + 0.37 * r.candidate_labels[c]) * 1e3;
      h0 += static_cast<double>(r.masks_h0[c]) * f;
      h1 += static_cast<double>(r.masks_h1[c]) * f;
    }
    ASSERT_EQ(h0 + h1, 0.0);
  }
}

TEST(ReportPairTest, PlaintextsAgreeExceptMasks) {
  Keys keys;
  SeededRandom rng(10);
  const PrivacyPolicy policy = Policy();
  for (int i = 0; i < 100; ++i) {
    auto rec = *BuildMaskedRecord(RandomFeatures(8, rng), static_cast<int64_t>(i % 2), policy,
                                  {2}, {{"campaign", "c1"}}, rng);
    auto pair = *EmitReportPair(rec, keys.pub(), policy, "any", rng);
    EXPECT_EQ(pair.sealed_h0.key_id, "h0");
    EXPECT_EQ(pair.sealed_h1.key_id, "h1");
    EXPECT_EQ(pair.sealed_h0.ad, pair.sealed_h1.ad);
    auto p0 = *DecodeRecord(*keys.h0.Open(pair.sealed_h0));
    auto p1 = *DecodeRecord(*keys.h1.Open(pair.sealed_h1));
    EXPECT_EQ(p0.features, p1.features);
    EXPECT_EQ(p0.labels, p1.labels);
    EXPECT_EQ(p0.side_info, p1.side_info);
    EXPECT_EQ(p0.record_id, p1.record_id);
    EXPECT_EQ(p0.features, rec.features);
    int reals = 0;
    for (size_t c = 0; c < 2; ++c) {
      const int64_t s = p0.masks[c] + p1.masks[c];
      ASSERT_TRUE(s == 0 || s == 1);
      reals += s == 1;
    }
    EXPECT_EQ(reals, 1);
  }
}

TEST(ReportPairTest, LocalDpNoisesOnceForBothHelpers) {
  Keys keys;
  SeededRandom rng(11);
  PrivacyPolicy policy = Policy();
  policy.dp_mode = DpMode::kLocal;
  policy.epsilon = 0.5;
  policy.feature_sensitivity = 50;
  int changed = 0;
  for (int i = 0; i < 50; ++i) {
    const auto x = RandomFeatures(30, rng);
    auto rec = *BuildMaskedRecord(x, 1, policy, {2}, {}, rng);
    auto pair = *EmitReportPair(rec, keys.pub(), policy, "any", rng);
    auto p0 = *DecodeRecord(*keys.h0.Open(pair.sealed_h0));
    auto p1 = *DecodeRecord(*keys.h1.Open(pair.sealed_h1));
    ASSERT_EQ(p0.features, p1.features);
    changed += p0.features != x;
  }
  EXPECT_EQ(changed, 50);
}

std::vector<Emission> RunBrowser(double fake_rate, int n, uint64_t seed,
                                 const std::array<PublicKey, 2>& keys) {
  BrowserConfig config;
  config.fake_rate = fake_rate;
  BrowserEmulator b(Policy(), {2}, keys, config, seed);
  for (int i = 0; i < n; ++i) {
    PendingAttribution p;
    p.impression_id = "imp-" + std::to_string(i);
    p.features = {static_cast<uint8_t>(i), 7};
    p.expiry = 1000;
    b.RecordImpression(p);
  }
  return *b.Flush(0);
}

TEST(BrowserEmulatorTest, FakeRateBoundaries) {
  Keys keys;
  auto none = RunBrowser(0.0, 200, 1, keys.pub());
  EXPECT_EQ(none.size(), 200u);
  for (const auto& e : none) {
    EXPECT_FALSE(e.is_fake);
    EXPECT_TRUE(e.truth.has_value());
  }
  auto all = RunBrowser(1.0, 200, 2, keys.pub());
  EXPECT_EQ(all.size(), 400u);
}

TEST(BrowserEmulatorTest, FakeRateIsBinomial) {
  Keys keys;
  // Pooled over several browsers so one seed's tail cannot decide the test.
  const int n = 2000, browsers = 10;
  int64_t fakes = 0;
  for (int seed = 1; seed <= browsers; ++seed) {
    for (const auto& e : RunBrowser(0.3, n, seed, keys.pub())) {
      fakes += e.is_fake;
      EXPECT_EQ(e.is_fake, !e.truth.has_value());
    }
  }
  EXPECT_GT(BinomialPValue(fakes, int64_t{n} * browsers, 0.3), 0.001);
}

TEST(BrowserEmulatorTest, FakeRecordsNetToZeroAfterDecryption) {
  Keys keys;
  auto out = RunBrowser(1.0, 50, 4, keys.pub());
  for (const auto& e : out) {
    auto p0 = *DecodeRecord(*keys.h0.Open(e.pair.sealed_h0));
    auto p1 = *DecodeRecord(*keys.h1.Open(e.pair.sealed_h1));
    int64_t total = 0;
    for (size_t c = 0; c < 2; ++c) total += p0.masks[c] + p1.masks[c];
    EXPECT_EQ(total, e.is_fake ? 0 : 1);
  }
}

TEST(BrowserEmulatorTest, AdvanceFinalizesExpiredAndConverted) {
  Keys keys;
  BrowserConfig config;
  config.fake_rate = 0;
  BrowserEmulator b(Policy(), {2}, keys.pub(), config, 5);
  for (int i = 0; i < 3; ++i) {
    PendingAttribution p;
    p.impression_id = "imp-" + std::to_string(i);
    p.features = {1};
    p.expiry = 100.0 * (i + 1);
    b.RecordImpression(p);
  }
  ASSERT_TRUE(b.RecordConversion("imp-2", 1).ok());
  EXPECT_FALSE(b.RecordConversion("nope", 1).ok());
  auto first = *b.Advance(150);  // imp-0 expired, imp-2 converted
  ASSERT_EQ(first.size(), 2u);
  std::map<int64_t, int> labels;
  for (const auto& e : first) ++labels[e.truth->label];
  EXPECT_EQ(labels[0], 1);
  EXPECT_EQ(labels[1], 1);
  EXPECT_EQ(b.pending(), 1u);
  auto rest = *b.Advance(200);
  ASSERT_EQ(rest.size(), 1u);
  EXPECT_EQ(rest[0].truth->label, 0);
  EXPECT_EQ(b.pending(), 0u);
}

}  // namespace
}  // namespace mlark
