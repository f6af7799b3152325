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

#ifndef MLARK_MODEL_H_
#define MLARK_MODEL_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "absl/status/statusor.h"
#include "mlark/random.h"

namespace mlark {

// Feedforward ReLU network with a linear (logit) output layer.
//
// Parameters live in one flat buffer in canonical order: for each layer in
// sequence, the weight matrix row-major ([out][in]) followed by the bias
// vector. Gradient vectors use the same order, which is what lets two helpers
// produce vectors that can be added coordinate-wise.
class MlpModel {
 public:
  MlpModel() = default;

  // All-zero parameters. Needs at least two dims, all positive.
  static absl::StatusOr<MlpModel> Create(std::vector<size_t> layer_dims);
  // Glorot-uniform weights, zero biases.
  static absl::StatusOr<MlpModel> Initialize(std::vector<size_t> layer_dims,
                                             RandomSource& rng);

  const std::vector<size_t>& layer_dims() const { return dims_; }
  size_t num_layers() const { return dims_.empty() ? 0 : dims_.size() - 1; }
  size_t input_dim() const { return dims_.front(); }
  size_t output_dim() const { return dims_.back(); }
  size_t parameter_count() const { return params_.size(); }

  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }

  std::span<double> weights(size_t layer);
  std::span<const double> weights(size_t layer) const;
  std::span<double> bias(size_t layer);
  std::span<const double> bias(size_t layer) const;

  size_t weight_offset(size_t layer) const { return offsets_[layer]; }
  size_t bias_offset(size_t layer) const {
    return offsets_[layer] + dims_[layer] * dims_[layer + 1];
  }

  bool AllFinite() const;

  friend bool operator==(const MlpModel&, const MlpModel&) = default;

 private:
  std::vector<size_t> dims_;
  std::vector<size_t> offsets_;
  std::vector<double> params_;
};

enum class LossKind { kCrossEntropy, kMeanSquaredError };

std::string_view LossKindName(LossKind kind);
absl::StatusOr<LossKind> ParseLossKind(std::string_view name);

// Cross-entropy applies softmax over the logits and needs integer labels in
// [0, num_classes). Squared error regresses the single output onto the label
// when the head has one unit, else onto the one-hot label.
struct LossSpec {
  LossKind kind = LossKind::kCrossEntropy;
  int num_classes = 2;

  absl::Status ValidateFor(const MlpModel& model) const;
  absl::Status ValidateLabel(int64_t label) const;
};

struct GradientVector {
  std::vector<double> values;

  GradientVector() = default;
  explicit GradientVector(size_t n) : values(n, 0.0) {}
  size_t size() const { return values.size(); }
  double operator[](size_t i) const { return values[i]; }
  double& operator[](size_t i) { return values[i]; }
  double L2Norm() const;
  bool AllFinite() const;
};

struct Sample {
  std::vector<uint8_t> features;
  int64_t label = 0;
};

// Bytes to [0, 1].
std::vector<double> NormalizeFeatures(std::span<const uint8_t> bytes);

absl::StatusOr<std::vector<double>> Forward(const MlpModel& model,
                                            std::span<const double> x);

// Index of the largest logit (or thresholded single output at 0.5).
absl::StatusOr<int64_t> Predict(const MlpModel& model,
                                std::span<const double> x);

// Scratch buffers for reverse-mode differentiation. One per thread.
class GradientWorkspace {
 public:
  // Writes dL/dtheta for one sample into grad (overwritten, size =
  // parameter_count) and returns the loss. Fails with kInternal when an
  // intermediate is not finite, and kInvalidArgument on shape/label errors.
  absl::StatusOr<double> LossAndGradient(const MlpModel& model,
                                         const LossSpec& loss,
                                         std::span<const double> x,
                                         int64_t label, std::span<double> grad);

 private:
  std::vector<std::vector<double>> activations_;  // a_0 .. a_L
  std::vector<std::vector<double>> pre_;          // z_1 .. z_L
  std::vector<double> delta_;
  std::vector<double> delta_prev_;
};

struct LossAndGrad {
  double loss = 0;
  GradientVector gradient;
};

absl::StatusOr<LossAndGrad> LossAndGradient(const MlpModel& model,
                                            const LossSpec& loss,
                                            std::span<const double> x,
                                            int64_t label);

// Sums item contributions into a dim-length vector in a fixed order:
// items are grouped into chunks of `chunk` consecutive indices, each chunk is
// accumulated sequentially, and chunk partials are combined by a pairwise
// tree. The result is independent of `workers`. add_item(i, acc, worker)
// must add item i's contribution into acc.
using AddItemFn =
    std::function<absl::Status(size_t item, std::span<double> acc, size_t worker)>;
absl::StatusOr<std::vector<double>> DeterministicSum(size_t num_items,
                                                     size_t dim,
                                                     const AddItemFn& add_item,
                                                     size_t workers = 1,
                                                     size_t chunk = 16);

// Plain minibatch gradient: sum of per-sample gradients.
absl::StatusOr<GradientVector> MinibatchGradient(const MlpModel& model,
                                                 const LossSpec& loss,
                                                 std::span<const Sample> batch);

// Fraction of samples classified correctly.
double Accuracy(const MlpModel& model, std::span<const Sample> samples);

// Model blob: see docs/model_format.md.
std::vector<uint8_t> SerializeModel(const MlpModel& model);
// Per-tensor affine 8-bit encoding of the same format.
std::vector<uint8_t> QuantizeModel8Bit(const MlpModel& model);
// Accepts both encodings; 8-bit blobs come back dequantized.
absl::StatusOr<MlpModel> DeserializeModel(std::span<const uint8_t> blob);
// Quantize then dequantize, tensor by tensor.
MlpModel DequantizedCopy(const MlpModel& model);

struct TensorCodes {
  double min = 0;
  double max = 0;
  std::vector<uint8_t> codes;
};
TensorCodes QuantizeTensor(std::span<const double> values);
std::vector<double> DequantizeTensor(const TensorCodes& t);

// theta -= learning_rate * gradient.
absl::Status SgdStep(MlpModel& model, const GradientVector& gradient,
                     double learning_rate);

class Optimizer {
 public:
  virtual ~Optimizer() = default;
  virtual absl::Status Apply(MlpModel& model, const GradientVector& gradient) = 0;
};

class SgdOptimizer final : public Optimizer {
 public:
  explicit SgdOptimizer(double learning_rate) : lr_(learning_rate) {}
  absl::Status Apply(MlpModel& model, const GradientVector& gradient) override {
    return SgdStep(model, gradient, lr_);
  }

 private:
  double lr_;
};

// Adam on the aggregate gradients the helpers return.
class AdamOptimizer final : public Optimizer {
 public:
  explicit AdamOptimizer(double learning_rate, double beta1 = 0.9,
                         double beta2 = 0.999, double epsilon = 1e-8)
      : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {}
  absl::Status Apply(MlpModel& model, const GradientVector& gradient) override;

 private:
  double lr_, beta1_, beta2_, eps_;
  int64_t step_ = 0;
  std::vector<double> m_, v_;
};

}  // namespace mlark

#endif  // MLARK_MODEL_H_
