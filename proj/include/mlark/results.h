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

#ifndef MLARK_RESULTS_H_
#define MLARK_RESULTS_H_

#include <string>
#include <vector>

#include "absl/status/status.h"
#include "json.hpp"

namespace mlark {

// Rows of named values, emitted as CSV (one column per name, in first-seen
// order) and JSON.
struct ResultTable {
  std::string name;
  std::vector<nlohmann::json> rows;

  std::vector<std::string> Columns() const;
  std::string ToCsv() const;
};

// Version string baked in at configure time (git describe).
std::string BuildVersion();

// Hex digest of the canonical (sorted-key, compact) dump of a config.
std::string ConfigFingerprint(const nlohmann::json& config);

// Writes DIR/NAME.csv and DIR/NAME.json. The JSON carries the rows plus the
// config, its fingerprint and the build version.
absl::Status EmitReport(const ResultTable& table, const nlohmann::json& config,
                        const std::string& out_dir);

// Mean and sample standard deviation of `value` per distinct combination of
// the `keys` columns, keeping first-seen order.
ResultTable Summarize(const ResultTable& table, const std::vector<std::string>& keys,
                      const std::vector<std::string>& values);

struct SpearmanResult {
  double rho = 0;
  // Two-sided p-value from the t approximation with n - 2 degrees of freedom.
  double p_value = 1;
  size_t n = 0;
};

// Rank correlation with average ranks for ties.
SpearmanResult Spearman(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace mlark

#endif  // MLARK_RESULTS_H_
