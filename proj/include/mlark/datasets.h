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

#ifndef MLARK_DATASETS_H_
#define MLARK_DATASETS_H_

#include <cstdint>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "mlark/model.h"

namespace mlark {

struct Dataset {
  std::string name;
  size_t feature_dim = 0;
  int num_classes = 2;
  std::vector<Sample> train;
  std::vector<Sample> test;
};

// Breast-cancer-scale stand-in: 30 byte features driven by a few latent
// Gaussian factors; the label marks the top quarter of a noisy linear score,
// so about 75% of samples are class 0.
Dataset SyntheticWbcd(uint64_t seed, size_t train = 500, size_t test = 200);

// Digit-scale stand-in: 28x28 bytes, 10 classes, each class a random stroke
// template plus pixel noise and a small random shift.
Dataset SyntheticMnist(uint64_t seed, size_t train = 5000, size_t test = 1000);

// Comma-separated file. Either the UCI wdbc layout (id, M|B, 30 reals; M is
// class 1) or all-numeric rows whose last column is an integer class label.
// Features are min-max scaled per column to [0, 255]. Rows are shuffled with
// `seed` and the first `train` go to the training split, capped so at least
// one row remains for testing.
absl::StatusOr<Dataset> LoadCsv(const std::string& path, uint64_t seed,
                                size_t train = 500);

// IDX image/label files (as distributed for MNIST). At most max_train
// training and max_test test images are kept.
absl::StatusOr<Dataset> LoadIdx(const std::string& train_images,
                                const std::string& train_labels,
                                const std::string& test_images,
                                const std::string& test_labels,
                                size_t max_train = 50000, size_t max_test = 10000);

// "synthetic-wbcd", "synthetic-mnist", "csv:PATH" or "idx:DIR" (DIR holding
// the four standard MNIST file names).
absl::StatusOr<Dataset> LoadDataset(const std::string& spec, uint64_t seed);

}  // namespace mlark

#endif  // MLARK_DATASETS_H_
