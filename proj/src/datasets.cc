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

#include "mlark/datasets.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "absl/strings/match.h"
#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_split.h"
#include "absl/strings/strip.h"
#include "mlark/random.h"
#include "mlark/status.h"

namespace mlark {

namespace {

uint8_t ToByte(double v) {
  return static_cast<uint8_t>(std::clamp(std::nearbyint(v), 0.0, 255.0));
}

}  // namespace

Dataset SyntheticWbcd(uint64_t seed, size_t train, size_t test) {
  constexpr size_t kFeatures = 30;
  constexpr size_t kLatent = 6;
  SeededRandom rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<double> loading(kFeatures * kLatent);
  for (double& a : loading) a = normal(rng) / std::sqrt(double{kLatent});
  std::vector<double> direction(kLatent);
  for (double& w : direction) w = normal(rng);

  const size_t n = train + test;
  std::vector<Sample> samples(n);
  std::vector<double> score(n);
  for (size_t i = 0; i < n; ++i) {
    std::vector<double> z(kLatent);
    for (double& v : z) v = normal(rng);
    auto& x = samples[i].features;
    x.resize(kFeatures);
    for (size_t f = 0; f < kFeatures; ++f) {
      double v = 0.3 * normal(rng);
      for (size_t k = 0; k < kLatent; ++k) v += loading[f * kLatent + k] * z[k];
      x[f] = ToByte(128.0 + 40.0 * v);
    }
    score[i] = std::inner_product(z.begin(), z.end(), direction.begin(), 0.0) +
               0.25 * normal(rng);
  }
  std::vector<double> sorted = score;
  std::nth_element(sorted.begin(), sorted.begin() + 3 * n / 4, sorted.end());
  const double threshold = sorted[3 * n / 4];
  for (size_t i = 0; i < n; ++i) samples[i].label = score[i] >= threshold ? 1 : 0;

  Dataset d;
  d.name = "synthetic-wbcd";
  d.feature_dim = kFeatures;
  d.num_classes = 2;
  d.train.assign(samples.begin(), samples.begin() + train);
  d.test.assign(samples.begin() + train, samples.end());
  return d;
}

Dataset SyntheticMnist(uint64_t seed, size_t train, size_t test) {
  constexpr int kSide = 28;
  constexpr int kClasses = 10;
  SeededRandom rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  // Each template is a handful of thick random strokes.
  std::vector<std::vector<double>> templates(kClasses,
                                             std::vector<double>(kSide * kSide));
  for (auto& t : templates) {
    for (int s = 0; s < 4; ++s) {
      double x = 6 + rng.UniformDouble() * 16, y = 6 + rng.UniformDouble() * 16;
      const double angle = rng.UniformDouble() * 2 * M_PI;
      for (int step = 0; step < 12; ++step) {
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int px = static_cast<int>(x) + dx, py = static_cast<int>(y) + dy;
            if (px >= 0 && px < kSide && py >= 0 && py < kSide) {
              t[py * kSide + px] = 220.0;
            }
          }
        }
        x += std::cos(angle);
        y += std::sin(angle);
      }
    }
  }

  auto make = [&](size_t count) {
    std::vector<Sample> out(count);
    for (auto& s : out) {
      const int c = static_cast<int>(rng.UniformBelow(kClasses));
      const int sx = static_cast<int>(rng.UniformBelow(3)) - 1;
      const int sy = static_cast<int>(rng.UniformBelow(3)) - 1;
      s.label = c;
      s.features.resize(kSide * kSide);
      for (int y = 0; y < kSide; ++y) {
        for (int x = 0; x < kSide; ++x) {
          const int tx = std::clamp(x - sx, 0, kSide - 1);
          const int ty = std::clamp(y - sy, 0, kSide - 1);
          s.features[y * kSide + x] =
              ToByte(templates[c][ty * kSide + tx] + 25.0 * normal(rng));
        }
      }
    }
    return out;
  };
  Dataset d;
  d.name = "synthetic-mnist";
  d.feature_dim = kSide * kSide;
  d.num_classes = kClasses;
  d.train = make(train);
  d.test = make(test);
  return d;
}

absl::StatusOr<Dataset> LoadCsv(const std::string& path, uint64_t seed,
                                size_t train) {
  std::ifstream in(path);
  if (!in) return absl::NotFoundError(absl::StrCat("cannot open ", path));
  std::vector<std::vector<double>> rows;
  std::vector<int64_t> labels;
  std::string line;
  size_t line_no = 0;
  size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    absl::string_view text = absl::StripAsciiWhitespace(line);
    if (text.empty()) continue;
    std::vector<std::string> cells = absl::StrSplit(text, ',');
    for (auto& c : cells) c = std::string(absl::StripAsciiWhitespace(c));
    auto error = [&](size_t column, const std::string& why) {
      return absl::InvalidArgumentError(absl::StrCat(
          path, ":", line_no, ": column ", column + 1, ": ", why));
    };
    std::vector<double> values;
    int64_t label = 0;
    if (cells.size() >= 3 && (cells[1] == "M" || cells[1] == "B")) {
      label = cells[1] == "M" ? 1 : 0;
      for (size_t c = 2; c < cells.size(); ++c) {
        double v;
        if (!absl::SimpleAtod(cells[c], &v) || !std::isfinite(v)) {
          return error(c, absl::StrCat("not a number: '", cells[c], "'"));
        }
        values.push_back(v);
      }
    } else {
      if (cells.size() < 2) return error(0, "need at least one feature and a label");
      for (size_t c = 0; c + 1 < cells.size(); ++c) {
        double v;
        if (!absl::SimpleAtod(cells[c], &v) || !std::isfinite(v)) {
          if (rows.empty() && labels.empty()) {
            values.clear();
            break;  // header row
          }
          return error(c, absl::StrCat("not a number: '", cells[c], "'"));
        }
        values.push_back(v);
      }
      if (values.empty()) continue;
      if (!absl::SimpleAtoi(cells.back(), &label) || label < 0) {
        return error(cells.size() - 1,
                     absl::StrCat("label must be a non-negative integer, got '",
                                  cells.back(), "'"));
      }
    }
    if (width == 0) width = values.size();
    if (values.size() != width) {
      return error(0, absl::StrCat("expected ", width, " features, found ",
                                   values.size()));
    }
    rows.push_back(std::move(values));
    labels.push_back(label);
  }
  if (rows.size() < 2) {
    return absl::InvalidArgumentError(absl::StrCat(path, ": fewer than two rows"));
  }
  std::vector<double> lo(width, INFINITY), hi(width, -INFINITY);
  for (const auto& r : rows) {
    for (size_t c = 0; c < width; ++c) {
      lo[c] = std::min(lo[c], r[c]);
      hi[c] = std::max(hi[c], r[c]);
    }
  }
  std::vector<Sample> samples(rows.size());
  int64_t max_label = 0;
  for (size_t i = 0; i < rows.size(); ++i) {
    samples[i].label = labels[i];
    max_label = std::max(max_label, labels[i]);
    samples[i].features.resize(width);
    for (size_t c = 0; c < width; ++c) {
      const double span = hi[c] - lo[c];
      samples[i].features[c] =
          span > 0 ? ToByte(255.0 * (rows[i][c] - lo[c]) / span) : 0;
    }
  }
  SeededRandom rng(seed);
  Shuffle(samples.begin(), samples.end(), rng);
  const size_t n_train = std::min(train, samples.size() - 1);
  Dataset d;
  d.name = std::filesystem::path(path).filename().string();
  d.feature_dim = width;
  d.num_classes = static_cast<int>(std::max<int64_t>(max_label + 1, 2));
  d.train.assign(samples.begin(), samples.begin() + n_train);
  d.test.assign(samples.begin() + n_train, samples.end());
  return d;
}

namespace {

absl::StatusOr<std::vector<uint8_t>> ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return absl::NotFoundError(absl::StrCat("cannot open ", path));
  return std::vector<uint8_t>((std::istreambuf_iterator<char>(in)),
                              std::istreambuf_iterator<char>());
}

uint32_t BigEndian32(const uint8_t* p) {
  return uint32_t{p[0]} << 24 | uint32_t{p[1]} << 16 | uint32_t{p[2]} << 8 | p[3];
}

absl::StatusOr<std::vector<Sample>> ReadIdxPair(const std::string& images_path,
                                                const std::string& labels_path,
                                                size_t limit, size_t* dim) {
  MLARK_ASSIGN_OR_RETURN(auto images, ReadFile(images_path));
  MLARK_ASSIGN_OR_RETURN(auto labels, ReadFile(labels_path));
  if (images.size() < 16 || BigEndian32(images.data()) != 0x00000803) {
    return absl::InvalidArgumentError(
        absl::StrCat(images_path, ": offset 0: not an IDX3 ubyte file"));
  }
  if (labels.size() < 8 || BigEndian32(labels.data()) != 0x00000801) {
    return absl::InvalidArgumentError(
        absl::StrCat(labels_path, ": offset 0: not an IDX1 ubyte file"));
  }
  const size_t n = BigEndian32(&images[4]);
  const size_t rows = BigEndian32(&images[8]), cols = BigEndian32(&images[12]);
  if (BigEndian32(&labels[4]) != n) {
    return absl::InvalidArgumentError(absl::StrCat(
        labels_path, ": offset 4: label count ", BigEndian32(&labels[4]),
        " != image count ", n));
  }
  if (images.size() < 16 + n * rows * cols) {
    return absl::InvalidArgumentError(absl::StrCat(
        images_path, ": offset ", images.size(), ": truncated pixel data"));
  }
  if (labels.size() < 8 + n) {
    return absl::InvalidArgumentError(
        absl::StrCat(labels_path, ": offset ", labels.size(), ": truncated labels"));
  }
  *dim = rows * cols;
  const size_t keep = std::min(n, limit);
  std::vector<Sample> out(keep);
  for (size_t i = 0; i < keep; ++i) {
    const uint8_t* px = &images[16 + i * rows * cols];
    out[i].features.assign(px, px + rows * cols);
    out[i].label = labels[8 + i];
  }
  return out;
}

}  // namespace

absl::StatusOr<Dataset> LoadIdx(const std::string& train_images,
                                const std::string& train_labels,
                                const std::string& test_images,
                                const std::string& test_labels, size_t max_train,
                                size_t max_test) {
  Dataset d;
  d.name = "idx";
  d.num_classes = 10;
  size_t dim_test = 0;
  MLARK_ASSIGN_OR_RETURN(d.train,
                         ReadIdxPair(train_images, train_labels, max_train, &d.feature_dim));
  MLARK_ASSIGN_OR_RETURN(d.test,
                         ReadIdxPair(test_images, test_labels, max_test, &dim_test));
  if (dim_test != d.feature_dim) {
    return absl::InvalidArgumentError("train and test images differ in size");
  }
  for (const auto* split : {&d.train, &d.test}) {
    for (const auto& s : *split) {
      if (s.label >= d.num_classes) {
        return absl::InvalidArgumentError(
            absl::StrCat("IDX label ", s.label, " outside 0..9"));
      }
    }
  }
  return d;
}

absl::StatusOr<Dataset> LoadDataset(const std::string& spec, uint64_t seed) {
  if (spec == "synthetic-wbcd" || spec == "synthetic") return SyntheticWbcd(seed);
  if (spec == "synthetic-mnist") return SyntheticMnist(seed);
  if (absl::StartsWith(spec, "csv:")) return LoadCsv(spec.substr(4), seed);
  if (absl::StartsWith(spec, "idx:")) {
    const std::filesystem::path dir = spec.substr(4);
    return LoadIdx((dir / "train-images-idx3-ubyte").string(),
                   (dir / "train-labels-idx1-ubyte").string(),
                   (dir / "t10k-images-idx3-ubyte").string(),
                   (dir / "t10k-labels-idx1-ubyte").string());
  }
  return absl::InvalidArgumentError(absl::StrCat(
      "unknown dataset '", spec,
      "' (expected synthetic-wbcd, synthetic-mnist, csv:PATH or idx:DIR)"));
}

}  // namespace mlark
