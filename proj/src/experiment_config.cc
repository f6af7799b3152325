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

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "absl/strings/ascii.h"
#include "absl/strings/str_cat.h"
#include "mlark/experiments.h"
#include "mlark/status.h"

namespace mlark {

namespace {

absl::StatusOr<double> ExtendedReal(const YAML::Node& n, const std::string& key) {
  const std::string text = absl::AsciiStrToLower(n.as<std::string>());
  if (text == "inf" || text == "infinity" || text == ".inf") return INFINITY;
  try {
    return n.as<double>();
  } catch (const YAML::Exception&) {
    return absl::InvalidArgumentError(
        absl::StrCat(key, ": expected a number or inf, got '", text, "'"));
  }
}

template <typename T>
absl::StatusOr<std::vector<T>> List(const YAML::Node& n, const std::string& key) {
  std::vector<T> out;
  if (!n.IsSequence()) {
    return absl::InvalidArgumentError(absl::StrCat(key, ": expected a list"));
  }
  for (const auto& item : n) {
    if constexpr (std::is_same_v<T, double>) {
      MLARK_ASSIGN_OR_RETURN(double v, ExtendedReal(item, key));
      out.push_back(v);
    } else {
      out.push_back(item.as<T>());
    }
  }
  return out;
}

}  // namespace

absl::StatusOr<ExperimentConfig> ParseExperimentConfig(const std::string& yaml_text) {
  static const std::set<std::string> kKeys = {
      "name",          "kind",        "dataset",           "dataset_seed",
      "train_limit",   "network",     "loss",              "epsilons",
      "psis",          "batch_sizes", "dp_mode",           "repetitions",
      "seed",          "epochs",      "max_rounds",        "learning_rate",
      "optimizer",     "clip_semantics", "fake_rate",      "transport",
      "k",             "value_sensitivity", "feature_sensitivity",
      "quantize_model", "latency_runs", "parallel",        "output"};
  ExperimentConfig c;
  try {
    const YAML::Node root = YAML::Load(yaml_text);
    if (!root.IsMap()) return absl::InvalidArgumentError("config must be a mapping");
    for (const auto& kv : root) {
      const std::string key = kv.first.as<std::string>();
      if (!kKeys.count(key)) {
        return absl::InvalidArgumentError(absl::StrCat("unknown config key '", key, "'"));
      }
    }
    if (root["name"]) c.name = root["name"].as<std::string>();
    if (root["kind"]) c.kind = root["kind"].as<std::string>();
    if (root["dataset"]) c.dataset = root["dataset"].as<std::string>();
    if (root["dataset_seed"]) c.dataset_seed = root["dataset_seed"].as<uint64_t>();
    if (root["train_limit"]) c.train_limit = root["train_limit"].as<size_t>();
    if (root["network"]) {
      MLARK_ASSIGN_OR_RETURN(c.network, List<size_t>(root["network"], "network"));
    }
    if (root["loss"]) {
      MLARK_ASSIGN_OR_RETURN(c.loss, ParseLossKind(root["loss"].as<std::string>()));
    }
    if (root["epsilons"]) {
      MLARK_ASSIGN_OR_RETURN(c.epsilons, List<double>(root["epsilons"], "epsilons"));
    }
    if (root["psis"]) {
      MLARK_ASSIGN_OR_RETURN(c.psis, List<double>(root["psis"], "psis"));
    }
    if (root["batch_sizes"]) {
      MLARK_ASSIGN_OR_RETURN(c.batch_sizes, List<size_t>(root["batch_sizes"], "batch_sizes"));
    }
    if (root["dp_mode"]) {
      MLARK_ASSIGN_OR_RETURN(c.dp_mode, ParseDpMode(root["dp_mode"].as<std::string>()));
    }
    if (root["repetitions"]) c.repetitions = root["repetitions"].as<int>();
    if (root["seed"]) c.seed = root["seed"].as<uint64_t>();
    if (root["epochs"]) c.epochs = root["epochs"].as<int>();
    if (root["max_rounds"]) c.max_rounds = root["max_rounds"].as<int64_t>();
    if (root["learning_rate"]) c.learning_rate = root["learning_rate"].as<double>();
    if (root["optimizer"]) {
      const std::string o = root["optimizer"].as<std::string>();
      if (o == "adam") {
        c.optimizer = OptimizerKind::kAdam;
      } else if (o != "sgd") {
        return absl::InvalidArgumentError(absl::StrCat("unknown optimizer '", o, "'"));
      }
    }
    if (root["clip_semantics"]) {
      MLARK_ASSIGN_OR_RETURN(c.clip_semantics,
                             ParseClipSemantics(root["clip_semantics"].as<std::string>()));
    }
    if (root["fake_rate"]) c.fake_rate = root["fake_rate"].as<double>();
    if (root["transport"]) {
      const std::string t = root["transport"].as<std::string>();
      if (t == "http") {
        c.transport = Transport::kHttp;
      } else if (t != "inprocess") {
        return absl::InvalidArgumentError(absl::StrCat("unknown transport '", t, "'"));
      }
    }
    if (root["k"]) c.k = root["k"].as<int64_t>();
    if (root["value_sensitivity"]) {
      c.value_sensitivity = root["value_sensitivity"].as<double>();
    }
    if (root["feature_sensitivity"]) {
      c.feature_sensitivity = root["feature_sensitivity"].as<double>();
    }
    if (root["quantize_model"]) c.quantize_model = root["quantize_model"].as<bool>();
    if (root["latency_runs"]) c.latency_runs = root["latency_runs"].as<int>();
    if (root["parallel"]) c.parallel = root["parallel"].as<bool>();
    if (root["output"]) c.output = root["output"].as<std::string>();
  } catch (const YAML::Exception& e) {
    return absl::InvalidArgumentError(absl::StrCat("config: ", e.what()));
  }
  if (c.repetitions < 1 || c.epochs < 1 || c.latency_runs < 1) {
    return absl::InvalidArgumentError(
        "repetitions, epochs and latency_runs must be positive");
  }
  if (c.fake_rate < 0 || c.fake_rate > 1) {
    return absl::InvalidArgumentError("fake_rate must lie in [0, 1]");
  }
  for (size_t b : c.batch_sizes) {
    if (b == 0) return absl::InvalidArgumentError("batch sizes must be positive");
  }
  return c;
}

absl::StatusOr<ExperimentConfig> LoadExperimentConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) return absl::NotFoundError(absl::StrCat("cannot open ", path));
  std::stringstream buf;
  buf << in.rdbuf();
  return ParseExperimentConfig(buf.str());
}

nlohmann::json ExperimentConfigToJson(const ExperimentConfig& c) {
  nlohmann::json eps = nlohmann::json::array(), psis = nlohmann::json::array();
  for (double e : c.epsilons) eps.push_back(ExtendedRealToJson(e));
  for (double p : c.psis) psis.push_back(ExtendedRealToJson(p));
  return {{"name", c.name},
          {"kind", c.kind},
          {"dataset", c.dataset},
          {"dataset_seed", c.dataset_seed},
          {"train_limit", c.train_limit},
          {"network", c.network},
          {"loss", LossKindName(c.loss)},
          {"epsilons", eps},
          {"psis", psis},
          {"batch_sizes", c.batch_sizes},
          {"dp_mode", DpModeName(c.dp_mode)},
          {"repetitions", c.repetitions},
          {"seed", c.seed},
          {"epochs", c.epochs},
          {"max_rounds", c.max_rounds},
          {"learning_rate", c.learning_rate},
          {"optimizer", c.optimizer == OptimizerKind::kAdam ? "adam" : "sgd"},
          {"clip_semantics", ClipSemanticsName(c.clip_semantics)},
          {"fake_rate", c.fake_rate},
          {"transport", c.transport == Transport::kHttp ? "http" : "inprocess"},
          {"k", c.k},
          {"value_sensitivity", c.value_sensitivity},
          {"feature_sensitivity", c.feature_sensitivity},
          {"quantize_model", c.quantize_model},
          {"latency_runs", c.latency_runs},
          {"parallel", c.parallel}};
}

}  // namespace mlark
