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

#include "mlark/results.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_join.h"
#include "mlark/encoding.h"

#ifndef MLARK_GIT_DESCRIBE
#define MLARK_GIT_DESCRIBE "unknown"
#endif

namespace mlark {

namespace {

std::string CsvCell(const nlohmann::json& v) {
  if (v.is_null()) return "";
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string quoted = "\"";
    for (char c : s) {
      if (c == '"') quoted += '"';
      quoted += c;
    }
    return quoted + "\"";
  }
  if (v.is_number_float()) return FormatDouble(v.get<double>());
  return v.dump();
}

std::vector<double> Ranks(const std::vector<double>& v) {
  std::vector<size_t> order(v.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return v[a] < v[b]; });
  std::vector<double> rank(v.size());
  for (size_t i = 0; i < order.size();) {
    size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (size_t k = i; k <= j; ++k) rank[order[k]] = avg;
    i = j + 1;
  }
  return rank;
}

}  // namespace

std::vector<std::string> ResultTable::Columns() const {
  std::vector<std::string> cols;
  for (const auto& row : rows) {
    for (const auto& [k, v] : row.items()) {
      if (std::find(cols.begin(), cols.end(), k) == cols.end()) cols.push_back(k);
    }
  }
  return cols;
}

std::string ResultTable::ToCsv() const {
  const auto cols = Columns();
  std::string out = absl::StrJoin(cols, ",") + "\n";
  for (const auto& row : rows) {
    std::vector<std::string> cells;
    for (const auto& c : cols) {
      cells.push_back(row.contains(c) ? CsvCell(row.at(c)) : "");
    }
    absl::StrAppend(&out, absl::StrJoin(cells, ","), "\n");
  }
  return out;
}

std::string BuildVersion() { return MLARK_GIT_DESCRIBE; }

std::string ConfigFingerprint(const nlohmann::json& config) {
  // nlohmann objects iterate in sorted key order, so dump() is canonical.
  return DigestHex(AsBytes(config.dump())).substr(0, 16);
}

absl::Status EmitReport(const ResultTable& table, const nlohmann::json& config,
                        const std::string& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) {
    return absl::FailedPreconditionError(
        absl::StrCat("cannot create ", out_dir, ": ", ec.message()));
  }
  const auto base = std::filesystem::path(out_dir) / table.name;
  {
    std::ofstream csv(base.string() + ".csv");
    csv << table.ToCsv();
    if (!csv) return absl::InternalError(absl::StrCat("cannot write ", base.string(), ".csv"));
  }
  nlohmann::json doc = {{"name", table.name},
                        {"version", BuildVersion()},
                        {"config", config},
                        {"config_fingerprint", ConfigFingerprint(config)},
                        {"rows", table.rows}};
  std::ofstream js(base.string() + ".json");
  js << doc.dump(2) << "\n";
  if (!js) return absl::InternalError(absl::StrCat("cannot write ", base.string(), ".json"));
  return absl::OkStatus();
}

ResultTable Summarize(const ResultTable& table, const std::vector<std::string>& keys,
                      const std::vector<std::string>& values) {
  std::vector<std::string> order;
  std::map<std::string, std::pair<nlohmann::json, std::vector<nlohmann::json>>> groups;
  for (const auto& row : table.rows) {
    nlohmann::json key = nlohmann::json::object();
    for (const auto& k : keys) key[k] = row.value(k, nlohmann::json());
    const std::string id = key.dump();
    if (!groups.count(id)) order.push_back(id);
    auto& g = groups[id];
    g.first = key;
    g.second.push_back(row);
  }
  ResultTable out;
  out.name = table.name + "_summary";
  for (const auto& id : order) {
    auto& [key, rows] = groups[id];
    nlohmann::json row = key;
    row["n"] = rows.size();
    for (const auto& v : values) {
      std::vector<double> xs;
      for (const auto& r : rows) {
        if (r.contains(v) && r.at(v).is_number()) xs.push_back(r.at(v).get<double>());
      }
      if (xs.empty()) continue;
      const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
      double ss = 0;
      for (double x : xs) ss += (x - mean) * (x - mean);
      row[v + "_mean"] = mean;
      row[v + "_std"] = xs.size() > 1 ? std::sqrt(ss / (xs.size() - 1)) : 0.0;
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

SpearmanResult Spearman(const std::vector<double>& x, const std::vector<double>& y) {
  SpearmanResult r;
  r.n = std::min(x.size(), y.size());
  if (r.n < 3) return r;
  const auto rx = Ranks(std::vector<double>(x.begin(), x.begin() + r.n));
  const auto ry = Ranks(std::vector<double>(y.begin(), y.begin() + r.n));
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / r.n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / r.n;
  double sxy = 0, sxx = 0, syy = 0;
  for (size_t i = 0; i < r.n; ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0 || syy == 0) return r;
  r.rho = sxy / std::sqrt(sxx * syy);
  const double df = static_cast<double>(r.n) - 2;
  if (std::abs(r.rho) >= 1.0) {
    r.p_value = 0.0;
    return r;
  }
  const double t = r.rho * std::sqrt(df / (1 - r.rho * r.rho));
  boost::math::students_t dist(df);
  r.p_value = 2 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
  return r;
}

}  // namespace mlark
