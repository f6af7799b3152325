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

#include "mlark/model.h"

#include <algorithm>
#include <cmath>
#include <thread>

#include "absl/strings/str_cat.h"
#include "mlark/kernels.h"
#include "mlark/status.h"

namespace mlark {

absl::StatusOr<MlpModel> MlpModel::Create(std::vector<size_t> layer_dims) {
  if (layer_dims.size() < 2) {
    return absl::InvalidArgumentError("a model needs at least two layer dims");
  }
  size_t total = 0;
  std::vector<size_t> offsets;
  for (size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    if (layer_dims[l] == 0 || layer_dims[l + 1] == 0) {
      return absl::InvalidArgumentError("layer dims must be positive");
    }
    offsets.push_back(total);
    total += layer_dims[l] * layer_dims[l + 1] + layer_dims[l + 1];
  }
  if (total > (size_t{1} << 28)) {
    return absl::InvalidArgumentError(
        absl::StrCat("model too large: ", total, " parameters"));
  }
  MlpModel m;
  m.dims_ = std::move(layer_dims);
  m.offsets_ = std::move(offsets);
  m.params_.assign(total, 0.0);
  return m;
}

absl::StatusOr<MlpModel> MlpModel::Initialize(std::vector<size_t> layer_dims,
                                              RandomSource& rng) {
  MLARK_ASSIGN_OR_RETURN(MlpModel m, Create(std::move(layer_dims)));
  for (size_t l = 0; l < m.num_layers(); ++l) {
    const double limit =
        std::sqrt(6.0 / static_cast<double>(m.dims_[l] + m.dims_[l + 1]));
    for (double& w : m.weights(l)) w = (2 * rng.UniformDouble() - 1) * limit;
  }
  return m;
}

std::span<double> MlpModel::weights(size_t layer) {
  return std::span<double>(params_).subspan(offsets_[layer],
                                            dims_[layer] * dims_[layer + 1]);
}
std::span<const double> MlpModel::weights(size_t layer) const {
  return std::span<const double>(params_).subspan(
      offsets_[layer], dims_[layer] * dims_[layer + 1]);
}
std::span<double> MlpModel::bias(size_t layer) {
  return std::span<double>(params_).subspan(bias_offset(layer), dims_[layer + 1]);
}
std::span<const double> MlpModel::bias(size_t layer) const {
  return std::span<const double>(params_).subspan(bias_offset(layer),
                                                  dims_[layer + 1]);
}

bool MlpModel::AllFinite() const {
  return std::all_of(params_.begin(), params_.end(),
                     [](double p) { return std::isfinite(p); });
}

std::string_view LossKindName(LossKind kind) {
  return kind == LossKind::kCrossEntropy ? "cross_entropy" : "mean_squared_error";
}

absl::StatusOr<LossKind> ParseLossKind(std::string_view name) {
  if (name == "cross_entropy") return LossKind::kCrossEntropy;
  if (name == "mean_squared_error" || name == "mse") {
    return LossKind::kMeanSquaredError;
  }
  return absl::InvalidArgumentError(absl::StrCat("unknown loss '", std::string(name), "'"));
}

absl::Status LossSpec::ValidateFor(const MlpModel& model) const {
  if (num_classes < 1) return absl::InvalidArgumentError("num_classes < 1");
  if (kind == LossKind::kCrossEntropy &&
      model.output_dim() != static_cast<size_t>(num_classes)) {
    return absl::InvalidArgumentError(absl::StrCat(
        "cross-entropy head has ", model.output_dim(), " outputs for ",
        num_classes, " classes"));
  }
  if (kind == LossKind::kMeanSquaredError && model.output_dim() != 1 &&
      model.output_dim() != static_cast<size_t>(num_classes)) {
    return absl::InvalidArgumentError("squared-error head size mismatch");
  }
  return absl::OkStatus();
}

absl::Status LossSpec::ValidateLabel(int64_t label) const {
  if (label < 0 || label >= num_classes) {
    return absl::InvalidArgumentError(absl::StrCat(
        "label ", label, " outside [0, ", num_classes, ")"));
  }
  return absl::OkStatus();
}

double GradientVector::L2Norm() const {
  return std::sqrt(kernels::Dot(values, values));
}

bool GradientVector::AllFinite() const {
  return std::all_of(values.begin(), values.end(),
                     [](double v) { return std::isfinite(v); });
}

std::vector<double> NormalizeFeatures(std::span<const uint8_t> bytes) {
  std::vector<double> x(bytes.size());
  for (size_t i = 0; i < bytes.size(); ++i) x[i] = bytes[i] / 255.0;
  return x;
}

absl::StatusOr<std::vector<double>> Forward(const MlpModel& model,
                                            std::span<const double> x) {
  if (model.num_layers() == 0) return absl::InvalidArgumentError("empty model");
  if (x.size() != model.input_dim()) {
    return absl::InvalidArgumentError(absl::StrCat(
        "input has ", x.size(), " features, model expects ", model.input_dim()));
  }
  std::vector<double> a(x.begin(), x.end());
  std::vector<double> z;
  const auto& dims = model.layer_dims();
  for (size_t l = 0; l < model.num_layers(); ++l) {
    z.assign(dims[l + 1], 0.0);
    kernels::Affine(model.weights(l), model.bias(l), a, z);
    if (l + 1 < model.num_layers()) {
      for (double& v : z) v = v > 0 ? v : 0.0;
    }
    a.swap(z);
  }
  return a;
}

absl::StatusOr<int64_t> Predict(const MlpModel& model,
                                std::span<const double> x) {
  MLARK_ASSIGN_OR_RETURN(std::vector<double> out, Forward(model, x));
  if (out.size() == 1) return out[0] >= 0.5 ? 1 : 0;
  return static_cast<int64_t>(std::max_element(out.begin(), out.end()) -
                              out.begin());
}

absl::StatusOr<double> GradientWorkspace::LossAndGradient(
    const MlpModel& model, const LossSpec& loss, std::span<const double> x,
    int64_t label, std::span<double> grad) {
  const size_t layers = model.num_layers();
  if (layers == 0) return absl::InvalidArgumentError("empty model");
  if (x.size() != model.input_dim()) {
    return absl::InvalidArgumentError(absl::StrCat(
        "input has ", x.size(), " features, model expects ", model.input_dim()));
  }
  if (grad.size() != model.parameter_count()) {
    return absl::InvalidArgumentError("gradient buffer has the wrong length");
  }
  MLARK_RETURN_IF_ERROR(loss.ValidateLabel(label));
  const auto& dims = model.layer_dims();

  activations_.resize(layers + 1);
  pre_.resize(layers + 1);
  activations_[0].assign(x.begin(), x.end());
  for (size_t l = 0; l < layers; ++l) {
    auto& z = pre_[l + 1];
    z.resize(dims[l + 1]);
    kernels::Affine(model.weights(l), model.bias(l), activations_[l], z);
    auto& a = activations_[l + 1];
    a = z;
    if (l + 1 < layers) {
      for (double& v : a) v = v > 0 ? v : 0.0;
    }
  }

  const std::vector<double>& out = pre_[layers];
  delta_.assign(out.size(), 0.0);
  double loss_value = 0;
  if (loss.kind == LossKind::kCrossEntropy) {
    const double max_logit = *std::max_element(out.begin(), out.end());
    double denom = 0;
    for (double v : out) denom += std::exp(v - max_logit);
    const double log_z = max_logit + std::log(denom);
    loss_value = log_z - out[static_cast<size_t>(label)];
    for (size_t j = 0; j < out.size(); ++j) delta_[j] = std::exp(out[j] - log_z);
    delta_[static_cast<size_t>(label)] -= 1.0;
  } else {
    for (size_t j = 0; j < out.size(); ++j) {
      const double target =
          out.size() == 1 ? static_cast<double>(label)
                          : (static_cast<int64_t>(j) == label ? 1.0 : 0.0);
      const double r = out[j] - target;
      loss_value += r * r;
      delta_[j] = 2 * r;
    }
  }
  if (!std::isfinite(loss_value)) {
    return absl::InternalError(
        absl::StrCat("non-finite loss ", loss_value, " for label ", label));
  }

  std::fill(grad.begin(), grad.end(), 0.0);
  for (size_t l = layers; l-- > 0;) {
    auto gw = grad.subspan(model.weight_offset(l), dims[l] * dims[l + 1]);
    auto gb = grad.subspan(model.bias_offset(l), dims[l + 1]);
    kernels::OuterAccumulate(delta_, activations_[l], gw);
    std::copy(delta_.begin(), delta_.end(), gb.begin());
    if (l == 0) break;
    delta_prev_.resize(dims[l]);
    kernels::AffineTranspose(model.weights(l), delta_, delta_prev_);
    const auto& z = pre_[l];
    for (size_t j = 0; j < delta_prev_.size(); ++j) {
      if (!(z[j] > 0)) delta_prev_[j] = 0.0;
    }
    delta_.swap(delta_prev_);
  }
  for (size_t i = 0; i < grad.size(); ++i) {
    if (!std::isfinite(grad[i])) {
      return absl::InternalError(
          absl::StrCat("non-finite gradient at parameter ", i));
    }
  }
  return loss_value;
}

absl::StatusOr<LossAndGrad> LossAndGradient(const MlpModel& model,
                                            const LossSpec& loss,
                                            std::span<const double> x,
                                            int64_t label) {
  GradientWorkspace ws;
  LossAndGrad out;
  out.gradient = GradientVector(model.parameter_count());
  MLARK_ASSIGN_OR_RETURN(
      out.loss, ws.LossAndGradient(model, loss, x, label, out.gradient.values));
  return out;
}

absl::StatusOr<std::vector<double>> DeterministicSum(size_t num_items,
                                                     size_t dim,
                                                     const AddItemFn& add_item,
                                                     size_t workers,
                                                     size_t chunk) {
  chunk = std::max<size_t>(chunk, 1);
  const size_t num_chunks = (num_items + chunk - 1) / chunk;
  if (num_chunks == 0) return std::vector<double>(dim, 0.0);
  std::vector<std::vector<double>> partial(num_chunks,
                                           std::vector<double>(dim, 0.0));
  std::vector<absl::Status> status(num_chunks);
  auto run_chunk = [&](size_t c, size_t worker) {
    const size_t end = std::min(num_items, (c + 1) * chunk);
    for (size_t i = c * chunk; i < end; ++i) {
      absl::Status s = add_item(i, partial[c], worker);
      if (!s.ok()) {
        status[c] = std::move(s);
        return;
      }
    }
  };
  workers = std::clamp<size_t>(workers, 1, num_chunks);
  if (workers == 1) {
    for (size_t c = 0; c < num_chunks; ++c) run_chunk(c, 0);
  } else {
    std::vector<std::thread> threads;
    for (size_t w = 0; w < workers; ++w) {
      threads.emplace_back([&, w] {
        for (size_t c = w; c < num_chunks; c += workers) run_chunk(c, w);
      });
    }
    for (auto& t : threads) t.join();
  }
  for (const auto& s : status) MLARK_RETURN_IF_ERROR(s);
  for (size_t stride = 1; stride < num_chunks; stride *= 2) {
    for (size_t c = 0; c + stride < num_chunks; c += 2 * stride) {
      auto& dst = partial[c];
      const auto& src = partial[c + stride];
      for (size_t j = 0; j < dim; ++j) dst[j] += src[j];
    }
  }
  return std::move(partial[0]);
}

absl::StatusOr<GradientVector> MinibatchGradient(const MlpModel& model,
                                                 const LossSpec& loss,
                                                 std::span<const Sample> batch) {
  GradientWorkspace ws;
  std::vector<double> g(model.parameter_count());
  auto add = [&](size_t i, std::span<double> acc, size_t) -> absl::Status {
    const auto x = NormalizeFeatures(batch[i].features);
    MLARK_RETURN_IF_ERROR(
        ws.LossAndGradient(model, loss, x, batch[i].label, g).status());
    kernels::Axpy(1.0, g, acc);
    return absl::OkStatus();
  };
  MLARK_ASSIGN_OR_RETURN(auto sum,
                         DeterministicSum(batch.size(), g.size(), add));
  GradientVector out;
  out.values = std::move(sum);
  return out;
}

double Accuracy(const MlpModel& model, std::span<const Sample> samples) {
  if (samples.empty()) return 0.0;
  size_t correct = 0;
  for (const auto& s : samples) {
    auto p = Predict(model, NormalizeFeatures(s.features));
    if (p.ok() && *p == s.label) ++correct;
  }
  return static_cast<double>(correct) / samples.size();
}

absl::Status SgdStep(MlpModel& model, const GradientVector& gradient,
                     double learning_rate) {
  if (gradient.size() != model.parameter_count()) {
    return absl::FailedPreconditionError(absl::StrCat(
        "gradient length ", gradient.size(), " != parameter count ",
        model.parameter_count()));
  }
  kernels::Axpy(-learning_rate, gradient.values, model.parameters());
  return absl::OkStatus();
}

absl::Status AdamOptimizer::Apply(MlpModel& model,
                                  const GradientVector& gradient) {
  const size_t n = model.parameter_count();
  if (gradient.size() != n) {
    return absl::FailedPreconditionError("gradient length mismatch");
  }
  if (m_.size() != n) {
    m_.assign(n, 0.0);
    v_.assign(n, 0.0);
    step_ = 0;
  }
  ++step_;
  const double c1 = 1 - std::pow(beta1_, static_cast<double>(step_));
  const double c2 = 1 - std::pow(beta2_, static_cast<double>(step_));
  auto params = model.parameters();
  for (size_t i = 0; i < n; ++i) {
    const double g = gradient[i];
    m_[i] = beta1_ * m_[i] + (1 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1 - beta2_) * g * g;
    params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
  }
  return absl::OkStatus();
}

}  // namespace mlark
