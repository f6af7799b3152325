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

// mlark: command-line front end for helpers, the ad server, the browser
// simulator and the experiment harness.
//
// Exit codes: 0 success, 1 other failure, 2 configuration error, 3 integrity
// error, 4 helper unreachable.

#include <chrono>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_split.h"
#include "mlark/adserver.h"
#include "mlark/adserver_http.h"
#include "mlark/datasets.h"
#include "mlark/encoding.h"
#include "mlark/experiments.h"
#include "mlark/helper.h"
#include "mlark/helper_http.h"
#include "mlark/results.h"
#include "mlark/status.h"

namespace mlark {
namespace {

volatile std::sig_atomic_t g_stop = 0;

void OnSignal(int) { g_stop = 1; }

void WaitForSignal() {
  std::signal(SIGINT, OnSignal);
  std::signal(SIGTERM, OnSignal);
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(200));
}

int Fail(const absl::Status& status) {
  std::cerr << "mlark: " << status.message() << "\n";
  return ExitCodeForStatus(status);
}

absl::StatusOr<std::array<std::string, 2>> SplitHelpers(const std::string& arg) {
  std::vector<std::string> parts = absl::StrSplit(arg, ',', absl::SkipEmpty());
  if (parts.size() != 2) {
    return absl::InvalidArgumentError(
        absl::StrCat("--helpers needs exactly two URLs, got '", arg, "'"));
  }
  return std::array<std::string, 2>{parts[0], parts[1]};
}

absl::StatusOr<std::vector<size_t>> ParseDims(const std::string& arg) {
  std::vector<size_t> dims;
  for (absl::string_view part : absl::StrSplit(arg, ',', absl::SkipEmpty())) {
    size_t v = 0;
    if (!absl::SimpleAtoi(part, &v) || v == 0) {
      return absl::InvalidArgumentError(absl::StrCat("bad layer size '", part, "'"));
    }
    dims.push_back(v);
  }
  if (dims.size() < 2) return absl::InvalidArgumentError("--layers needs at least two sizes");
  return dims;
}

absl::Status WriteText(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) return absl::FailedPreconditionError(absl::StrCat("cannot write ", path));
  return absl::OkStatus();
}

// ---- keygen ---------------------------------------------------------------

struct KeygenArgs {
  std::string key_id = "helper";
  std::string out;
};

absl::Status RunKeygen(const KeygenArgs& a) {
  InitCrypto();
  const HelperKeyPair keys = HelperKeyPair::Generate(a.key_id);
  MLARK_RETURN_IF_ERROR(keys.SaveFile(a.out));
  std::cout << PublicKeyToJson(keys.public_key()).dump() << "\n";
  return absl::OkStatus();
}

// ---- helper -----------------------------------------------------------------

struct HelperArgs {
  std::string host = "127.0.0.1";
  int port = 0;
  std::string key_file;
  std::string policy_file;
  std::string verify_key;
  std::string clip_semantics = "verbatim";
  size_t workers = 1;
  size_t max_batch = 1 << 16;
  bool test_mode = false;
};

absl::Status RunHelper(const HelperArgs& a) {
  InitCrypto();
  MLARK_ASSIGN_OR_RETURN(HelperKeyPair keys, HelperKeyPair::LoadFile(a.key_file));
  std::vector<uint8_t> verify;
  if (!a.verify_key.empty()) {
    MLARK_ASSIGN_OR_RETURN(verify, Base64Decode(a.verify_key));
  }
  MLARK_ASSIGN_OR_RETURN(PolicyRegistry registry,
                         PolicyRegistry::LoadFile(a.policy_file, a.test_mode, verify));
  HelperConfig config;
  MLARK_ASSIGN_OR_RETURN(config.clip_semantics, ParseClipSemantics(a.clip_semantics));
  config.workers = a.workers;
  config.max_batch_size = a.max_batch;
  HelperService service(std::move(keys), std::move(registry), config);
  HelperHttpServer server(&service);
  MLARK_ASSIGN_OR_RETURN(int port, server.Bind(a.host, a.port));
  std::cout << "helper " << service.ServePublicKey().key_id << " listening on http://"
            << a.host << ":" << port << std::endl;
  server.ServeInBackground();
  WaitForSignal();
  server.Stop();
  return absl::OkStatus();
}

// ---- serve-adserver ---------------------------------------------------------

struct AdServerArgs {
  std::string host = "127.0.0.1";
  int port = 0;
  std::string store;
  std::string helpers;
  bool no_fsync = false;
};

absl::Status RunAdServer(const AdServerArgs& a) {
  MLARK_ASSIGN_OR_RETURN(auto urls, SplitHelpers(a.helpers));
  MLARK_ASSIGN_OR_RETURN(auto store, ReportStore::Open(a.store, !a.no_fsync));
  if (store->recovered_truncation() > 0) {
    std::cerr << "mlark: discarded " << store->recovered_truncation()
              << " bytes of incomplete log tail\n";
  }
  HttpHelperClient h0(urls[0]), h1(urls[1]);
  AdServer adserver(store.get(), {&h0, &h1});
  AdServerHttpServer server(&adserver);
  MLARK_ASSIGN_OR_RETURN(int port, server.Bind(a.host, a.port));
  std::cout << "ad server listening on http://" << a.host << ":" << port << " with "
            << store->size() << " stored reports" << std::endl;
  server.ServeInBackground();
  WaitForSignal();
  server.Stop();
  return absl::OkStatus();
}

// ---- simulate-browsers ------------------------------------------------------

struct SimulateArgs {
  std::string adserver;
  std::string helpers;
  std::string policy;
  std::string dataset = "synthetic-wbcd";
  uint64_t dataset_seed = 1;
  double fake_rate = 0.5;
  std::string dp_mode;
  size_t browsers = 16;
  size_t limit = 0;
  uint64_t seed = 0;
  std::string job_kind = "any";
};

absl::Status RunSimulate(const SimulateArgs& a) {
  InitCrypto();
  MLARK_ASSIGN_OR_RETURN(auto urls, SplitHelpers(a.helpers));
  HttpHelperClient h0(urls[0]), h1(urls[1]);
  MLARK_ASSIGN_OR_RETURN(PublicKey k0, h0.FetchPublicKey());
  MLARK_ASSIGN_OR_RETURN(PublicKey k1, h1.FetchPublicKey());
  MLARK_ASSIGN_OR_RETURN(PrivacyPolicy policy, h0.FetchPolicy(a.policy));
  if (!a.dp_mode.empty()) {
    MLARK_ASSIGN_OR_RETURN(DpMode mode, ParseDpMode(a.dp_mode));
    if (mode != policy.dp_mode) {
      return absl::FailedPreconditionError(absl::StrCat(
          "policy '", a.policy, "' declares dp_mode ", std::string(DpModeName(policy.dp_mode)),
          ", not ", a.dp_mode));
    }
  }
  MLARK_ASSIGN_OR_RETURN(Dataset d, LoadDataset(a.dataset, a.dataset_seed));
  std::span<const Sample> samples = d.train;
  if (a.limit > 0 && a.limit < samples.size()) samples = samples.first(a.limit);
  BrowserConfig config;
  config.fake_rate = a.fake_rate;
  config.job_kind = a.job_kind;
  MLARK_ASSIGN_OR_RETURN(
      auto emissions, SimulateBrowsers(samples, d.num_classes, policy, {k0, k1}, config,
                                       a.browsers, a.seed));
  AdServerClient client(a.adserver);
  size_t fakes = 0;
  for (const auto& e : emissions) {
    MLARK_RETURN_IF_ERROR(client.PostReport(e.pair).status());
    fakes += e.is_fake;
  }
  std::cout << "uploaded " << emissions.size() << " report pairs (" << fakes
            << " fake) for policy " << a.policy << "\n";
  return absl::OkStatus();
}

// ---- train ------------------------------------------------------------------

struct TrainArgs {
  std::string adserver;
  std::string store;
  std::string helpers;
  std::string policy;
  std::string layers = "30,50,50,2";
  std::string loss = "cross_entropy";
  int classes = 2;
  std::string optimizer = "sgd";
  double lr = 0.05;
  size_t batch = 32;
  int epochs = 1;
  int64_t max_rounds = 0;
  uint64_t seed = 0;
  uint64_t init_seed = 0;
  bool quantize_model = false;
  std::string metrics;
  std::string model_out;
  std::string eval_dataset;
  uint64_t dataset_seed = 1;
};

absl::Status RunTrain(const TrainArgs& a) {
  TrainRequest req;
  req.policy_id = a.policy;
  MLARK_ASSIGN_OR_RETURN(req.layers, ParseDims(a.layers));
  req.init_seed = a.init_seed;
  MLARK_ASSIGN_OR_RETURN(req.loss.kind, ParseLossKind(a.loss));
  req.loss.num_classes = a.classes;
  if (a.optimizer == "adam") {
    req.optimizer = OptimizerKind::kAdam;
  } else if (a.optimizer != "sgd") {
    return absl::InvalidArgumentError(absl::StrCat("unknown optimizer '", a.optimizer, "'"));
  }
  req.learning_rate = a.lr;
  req.batch_size = a.batch;
  req.epochs = a.epochs;
  req.max_rounds = a.max_rounds;
  req.seed = a.seed;
  req.quantize_model = a.quantize_model;

  std::optional<Dataset> eval;
  if (!a.eval_dataset.empty()) {
    MLARK_ASSIGN_OR_RETURN(eval, LoadDataset(a.eval_dataset, a.dataset_seed));
  }

  MlpModel model;
  std::vector<nlohmann::json> rounds;
  if (!a.adserver.empty()) {
    AdServerClient client(a.adserver);
    MLARK_ASSIGN_OR_RETURN(auto reply, client.Train(req));
    MLARK_ASSIGN_OR_RETURN(auto blob, Base64Decode(reply.at("model").get<std::string>()));
    MLARK_ASSIGN_OR_RETURN(model, DeserializeModel(blob));
    for (const auto& r : reply.at("rounds")) rounds.push_back(r);
  } else {
    if (a.store.empty() || a.helpers.empty()) {
      return absl::InvalidArgumentError("train needs --adserver, or --store and --helpers");
    }
    MLARK_ASSIGN_OR_RETURN(auto urls, SplitHelpers(a.helpers));
    MLARK_ASSIGN_OR_RETURN(auto store, ReportStore::Open(a.store));
    HttpHelperClient h0(urls[0]), h1(urls[1]);
    AdServer adserver(store.get(), {&h0, &h1});
    MLARK_ASSIGN_OR_RETURN(TrainingRun run, BuildTrainingRun(req));
    TrainHooks hooks;
    if (eval.has_value()) {
      hooks.evaluate = [&](const MlpModel& m) { return Accuracy(m, eval->test); };
    }
    hooks.on_round = [&](const RoundMetrics& m) {
      rounds.push_back(RoundMetricsToJson(m));
    };
    MLARK_ASSIGN_OR_RETURN(TrainingResult result, adserver.Train(run, hooks));
    model = std::move(result.model);
  }
  if (!a.metrics.empty()) {
    std::string lines;
    for (const auto& r : rounds) absl::StrAppend(&lines, r.dump(), "\n");
    MLARK_RETURN_IF_ERROR(WriteText(a.metrics, lines));
  }
  if (!a.model_out.empty()) {
    const auto blob = SerializeModel(model);
    MLARK_RETURN_IF_ERROR(WriteText(a.model_out, std::string(blob.begin(), blob.end())));
  }
  int64_t blocked = 0;
  for (const auto& r : rounds) blocked += r.value("blocked", false);
  std::cout << "trained " << rounds.size() << " rounds (" << blocked << " blocked)";
  if (eval.has_value()) std::cout << ", test accuracy " << Accuracy(model, eval->test);
  std::cout << "\n";
  return absl::OkStatus();
}

// ---- query ------------------------------------------------------------------

struct QueryArgs {
  std::string adserver;
  std::string policy;
  bool count = false;
  std::string group_by;
  std::vector<std::string> filters;
};

absl::Status RunQuery(const QueryArgs& a) {
  AggregateQuery q;
  q.policy_id = a.policy;
  q.value_fn = a.count ? ValueFn::kCount : ValueFn::kLabel;
  q.group_by = a.group_by;
  for (const auto& f : a.filters) {
    std::vector<std::string> kv = absl::StrSplit(f, absl::MaxSplits('=', 1));
    if (kv.size() != 2) {
      return absl::InvalidArgumentError(absl::StrCat("filter '", f, "' is not key=value"));
    }
    q.filter[kv[0]] = kv[1];
  }
  AdServerClient client(a.adserver);
  MLARK_ASSIGN_OR_RETURN(AggregateResult r, client.Query(q));
  std::cout << AggregateResultToJson(r).dump(2) << "\n";
  return absl::OkStatus();
}

// ---- sweep / report ---------------------------------------------------------

std::vector<std::string> SummaryKeys(const std::string& kind) {
  if (kind == "latency") return {"batch_size"};
  if (kind == "local_dp") return {"epsilon"};
  return {"epsilon", "psi", "batch_size"};
}

absl::Status EmitWithSummary(const ResultTable& table, const nlohmann::json& config,
                             const std::string& kind, const std::string& out) {
  MLARK_RETURN_IF_ERROR(EmitReport(table, config, out));
  ResultTable runs = table;
  std::erase_if(runs.rows, [](const nlohmann::json& r) {
    return r.contains("run") && r["run"].is_string();
  });
  const ResultTable summary = Summarize(
      runs, SummaryKeys(kind),
      {"accuracy", "mpc_accuracy", "local_accuracy", "accuracy_gap", "ratio"});
  return EmitReport(summary, config, out);
}

struct SweepArgs {
  std::string config;
  std::string out;
  bool parallel = false;
};

absl::Status RunSweep(const SweepArgs& a) {
  InitCrypto();
  MLARK_ASSIGN_OR_RETURN(ExperimentConfig c, LoadExperimentConfig(a.config));
  if (a.parallel) c.parallel = true;
  const std::string out = a.out.empty() ? c.output : a.out;
  MLARK_ASSIGN_OR_RETURN(ResultTable table, RunExperiment(c));
  MLARK_RETURN_IF_ERROR(EmitWithSummary(table, ExperimentConfigToJson(c), c.kind, out));
  std::cout << "wrote " << table.rows.size() << " rows to " << out << "/" << table.name
            << ".{csv,json}\n";
  return absl::OkStatus();
}

struct ReportArgs {
  std::string results;
  std::string out;
};

absl::Status RunReport(const ReportArgs& a) {
  std::ifstream in(a.results);
  if (!in) return absl::NotFoundError(absl::StrCat("cannot open ", a.results));
  auto doc = nlohmann::json::parse(in, nullptr, false);
  if (doc.is_discarded() || !doc.contains("rows") || !doc.contains("config")) {
    return absl::InvalidArgumentError(
        absl::StrCat(a.results, " is not a results document"));
  }
  ResultTable table;
  table.name = doc.value("name", std::string("results"));
  for (const auto& r : doc["rows"]) table.rows.push_back(r);
  const std::string kind = doc["config"].value("kind", std::string("privacy"));
  MLARK_RETURN_IF_ERROR(EmitWithSummary(table, doc["config"], kind, a.out));
  std::cout << "wrote " << a.out << "/" << table.name << ".{csv,json} and summary\n";
  return absl::OkStatus();
}

int Main(int argc, char** argv) {
  CLI::App app{"Masked-label MPC measurement and training toolkit"};
  app.set_version_flag("--version", BuildVersion());
  app.require_subcommand(1);

  KeygenArgs keygen;
  auto* kg = app.add_subcommand("keygen", "Generate a helper key pair");
  kg->add_option("--key-id", keygen.key_id, "Key identifier");
  kg->add_option("--out", keygen.out, "Key file to write")->required();

  HelperArgs helper;
  auto* hp = app.add_subcommand("helper", "Run a helper service");
  hp->add_option("--host", helper.host);
  hp->add_option("--port", helper.port, "Listen port (0 picks one)");
  hp->add_option("--key-file", helper.key_file)->required();
  hp->add_option("--policy-file", helper.policy_file)->required();
  hp->add_option("--policy-verify-key", helper.verify_key,
                 "Base64 Ed25519 key; makes the registry signature mandatory");
  hp->add_option("--clip-semantics", helper.clip_semantics, "verbatim | scaled");
  hp->add_option("--workers", helper.workers);
  hp->add_option("--max-batch", helper.max_batch);
  hp->add_flag("--test-mode", helper.test_mode, "Allow dp_mode off");

  AdServerArgs ads;
  auto* as = app.add_subcommand("serve-adserver", "Run the ad server");
  as->add_option("--host", ads.host);
  as->add_option("--port", ads.port);
  as->add_option("--store", ads.store, "Report log directory")->required();
  as->add_option("--helpers", ads.helpers, "URL,URL")->required();
  as->add_flag("--no-fsync", ads.no_fsync);

  SimulateArgs sim;
  auto* sb = app.add_subcommand("simulate-browsers", "Upload reports from simulated browsers");
  sb->add_option("--adserver", sim.adserver)->required();
  sb->add_option("--helpers", sim.helpers, "URL,URL (public keys and policy)")->required();
  sb->add_option("--policy", sim.policy)->required();
  sb->add_option("--dataset", sim.dataset, "synthetic-wbcd | synthetic-mnist | csv:PATH | idx:DIR");
  sb->add_option("--dataset-seed", sim.dataset_seed);
  sb->add_option("--fake-rate", sim.fake_rate)->check(CLI::Range(0.0, 1.0));
  sb->add_option("--dp-mode", sim.dp_mode, "Must match the policy when given");
  sb->add_option("--browsers", sim.browsers);
  sb->add_option("--limit", sim.limit, "Use at most this many training samples");
  sb->add_option("--seed", sim.seed);
  sb->add_option("--job-kind", sim.job_kind, "aggregate | gradient | any");

  TrainArgs train;
  auto* tr = app.add_subcommand("train", "Train a model over the helpers");
  tr->add_option("--adserver", train.adserver);
  tr->add_option("--store", train.store);
  tr->add_option("--helpers", train.helpers);
  tr->add_option("--policy", train.policy)->required();
  tr->add_option("--layers", train.layers);
  tr->add_option("--loss", train.loss);
  tr->add_option("--classes", train.classes);
  tr->add_option("--optimizer", train.optimizer, "sgd | adam");
  tr->add_option("--lr", train.lr);
  tr->add_option("--batch", train.batch);
  tr->add_option("--epochs", train.epochs);
  tr->add_option("--max-rounds", train.max_rounds);
  tr->add_option("--seed", train.seed);
  tr->add_option("--init-seed", train.init_seed);
  tr->add_flag("--quantize-model", train.quantize_model);
  tr->add_option("--metrics", train.metrics, "JSON-lines metrics output");
  tr->add_option("--model-out", train.model_out);
  tr->add_option("--eval-dataset", train.eval_dataset);
  tr->add_option("--dataset-seed", train.dataset_seed);

  QueryArgs query;
  auto* qy = app.add_subcommand("query", "Run an aggregate or group-by query");
  qy->add_option("--adserver", query.adserver)->required();
  qy->add_option("--policy", query.policy)->required();
  qy->add_flag("--count", query.count, "Count records instead of summing labels");
  qy->add_option("--group-by", query.group_by);
  qy->add_option("--filter", query.filters, "key=value")->allow_extra_args(false);

  SweepArgs sweep;
  auto* sw = app.add_subcommand("sweep", "Run an experiment sweep from YAML");
  sw->add_option("--config", sweep.config)->required();
  sw->add_option("--out", sweep.out);
  sw->add_flag("--parallel", sweep.parallel);

  ReportArgs report;
  auto* rp = app.add_subcommand("report", "Re-emit a results document as CSV and JSON");
  rp->add_option("--results", report.results)->required();
  rp->add_option("--out", report.out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfigError;
  }

  absl::Status status;
  if (*kg) status = RunKeygen(keygen);
  if (*hp) status = RunHelper(helper);
  if (*as) status = RunAdServer(ads);
  if (*sb) status = RunSimulate(sim);
  if (*tr) status = RunTrain(train);
  if (*qy) status = RunQuery(query);
  if (*sw) status = RunSweep(sweep);
  if (*rp) status = RunReport(report);
  return status.ok() ? kExitOk : Fail(status);
}

}  // namespace
}  // namespace mlark

int main(int argc, char** argv) { return mlark::Main(argc, argv); }
