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

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>

#include "absl/strings/str_cat.h"
#include "mlark/encoding.h"
#include "mlark/model.h"
#include "mlark/status.h"

namespace mlark {
namespace {

constexpr char kMagic[4] = {'M', 'L', 'R', 'K'};
constexpr uint16_t kVersion = 1;
constexpr uint8_t kEncodingFloat64 = 0;
constexpr uint8_t kEncoding8Bit = 1;
constexpr uint8_t kActivationRelu = 1;

class Writer {
 public:
  void Bytes(const void* p, size_t n) {
    const auto* b = static_cast<const uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  template <typename T>
  void Le(T v) {
    uint8_t b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
      std::reverse(b, b + sizeof(T));
    }
    Bytes(b, sizeof(T));
  }
  std::vector<uint8_t> Finish() {
    Le<uint32_t>(Crc32(out_));
    return std::move(out_);
  }

 private:
  std::vector<uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const uint8_t> data) : data_(data) {}
  template <typename T>
  bool Le(T& v) {
    if (data_.size() - pos_ < sizeof(T)) return false;
    uint8_t b[sizeof(T)];
    std::memcpy(b, data_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
      std::reverse(b, b + sizeof(T));
    }
    std::memcpy(&v, b, sizeof(T));
    pos_ += sizeof(T);
    return true;
  }
  bool Bytes(uint8_t* dst, size_t n) {
    if (data_.size() - pos_ < n) return false;
    std::memcpy(dst, data_.data() + pos_, n);
    pos_ += n;
    return true;
  }
  size_t remaining() const { return data_.size() - pos_; }

 private:
  std::span<const uint8_t> data_;
  size_t pos_ = 0;
};

void WriteHeader(Writer& w, const MlpModel& model, uint8_t encoding) {
  w.Bytes(kMagic, 4);
  w.Le<uint16_t>(kVersion);
  w.Le<uint8_t>(encoding);
  w.Le<uint8_t>(kActivationRelu);
  w.Le<uint32_t>(static_cast<uint32_t>(model.layer_dims().size()));
  for (size_t d : model.layer_dims()) w.Le<uint32_t>(static_cast<uint32_t>(d));
}

// Tensors in canonical order: W_0, b_0, W_1, b_1, ...
template <typename Fn>
void ForEachTensor(const MlpModel& model, Fn&& fn) {
  for (size_t l = 0; l < model.num_layers(); ++l) {
    fn(model.weights(l));
    fn(model.bias(l));
  }
}

absl::Status FormatError(std::string_view what) {
  return absl::InvalidArgumentError(absl::StrCat("model blob: ", std::string(what)));
}

}  // namespace

std::vector<uint8_t> SerializeModel(const MlpModel& model) {
  Writer w;
  WriteHeader(w, model, kEncodingFloat64);
  for (double p : model.parameters()) w.Le<double>(p);
  return w.Finish();
}

TensorCodes QuantizeTensor(std::span<const double> values) {
  TensorCodes t;
  if (values.empty()) return t;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  t.min = *lo;
  t.max = *hi;
  t.codes.assign(values.size(), 0);
  if (t.max == t.min) return t;
  const double range = t.max - t.min;
  for (size_t i = 0; i < values.size(); ++i) {
    const double c = std::round((values[i] - t.min) / range * 255.0);
    t.codes[i] = static_cast<uint8_t>(std::clamp(c, 0.0, 255.0));
  }
  return t;
}

std::vector<double> DequantizeTensor(const TensorCodes& t) {
  std::vector<double> out(t.codes.size(), t.min);
  if (t.max == t.min) return out;
  const double step = (t.max - t.min) / 255.0;
  for (size_t i = 0; i < out.size(); ++i) out[i] = t.min + t.codes[i] * step;
  return out;
}

std::vector<uint8_t> QuantizeModel8Bit(const MlpModel& model) {
  Writer w;
  WriteHeader(w, model, kEncoding8Bit);
  ForEachTensor(model, [&](std::span<const double> tensor) {
    const TensorCodes t = QuantizeTensor(tensor);
    w.Le<double>(t.min);
    w.Le<double>(t.max);
    w.Bytes(t.codes.data(), t.codes.size());
  });
  return w.Finish();
}

MlpModel DequantizedCopy(const MlpModel& model) {
  MlpModel copy = model;
  for (size_t l = 0; l < copy.num_layers(); ++l) {
    for (auto tensor : {copy.weights(l), copy.bias(l)}) {
      const auto deq = DequantizeTensor(QuantizeTensor(tensor));
      std::copy(deq.begin(), deq.end(), tensor.begin());
    }
  }
  return copy;
}

absl::StatusOr<MlpModel> DeserializeModel(std::span<const uint8_t> blob) {
  if (blob.size() < 16) return FormatError("truncated header");
  uint32_t stored_crc = 0;
  std::memcpy(&stored_crc, blob.data() + blob.size() - 4, 4);
  if constexpr (std::endian::native == std::endian::big) {
    stored_crc = __builtin_bswap32(stored_crc);
  }
  const auto body = blob.first(blob.size() - 4);

  Reader r(body);
  char magic[4];
  if (!r.Bytes(reinterpret_cast<uint8_t*>(magic), 4) ||
      std::memcmp(magic, kMagic, 4) != 0) {
    return FormatError("bad magic");
  }
  uint16_t version = 0;
  uint8_t encoding = 0, activation = 0;
  uint32_t num_dims = 0;
  if (!r.Le(version) || !r.Le(encoding) || !r.Le(activation) || !r.Le(num_dims)) {
    return FormatError("truncated header");
  }
  if (version != kVersion) {
    return FormatError(absl::StrCat("unsupported version ", version));
  }
  if (encoding != kEncodingFloat64 && encoding != kEncoding8Bit) {
    return FormatError(absl::StrCat("unknown encoding ", int{encoding}));
  }
  if (activation != kActivationRelu) {
    return FormatError(absl::StrCat("unknown activation ", int{activation}));
  }
  if (num_dims < 2 || num_dims > 64) {
    return FormatError(absl::StrCat("bad layer count ", num_dims));
  }
  std::vector<size_t> dims(num_dims);
  for (auto& d : dims) {
    uint32_t v = 0;
    if (!r.Le(v)) return FormatError("truncated layer table");
    d = v;
  }
  if (Crc32(body) != stored_crc) return FormatError("checksum mismatch");

  auto created = MlpModel::Create(dims);
  if (!created.ok()) return FormatError(std::string(created.status().message()));
  MlpModel model = *std::move(created);

  if (encoding == kEncodingFloat64) {
    if (r.remaining() != model.parameter_count() * 8) {
      return FormatError("payload length does not match layer table");
    }
    for (double& p : model.parameters()) r.Le(p);
  } else {
    for (size_t l = 0; l < model.num_layers(); ++l) {
      for (auto tensor : {model.weights(l), model.bias(l)}) {
        TensorCodes t;
        t.codes.resize(tensor.size());
        if (!r.Le(t.min) || !r.Le(t.max) ||
            !r.Bytes(t.codes.data(), t.codes.size())) {
          return FormatError("truncated quantized tensor");
        }
        if (!(t.min <= t.max)) return FormatError("quantized range inverted");
        const auto deq = DequantizeTensor(t);
        std::copy(deq.begin(), deq.end(), tensor.begin());
      }
    }
    if (r.remaining() != 0) return FormatError("trailing bytes");
  }
  if (!model.AllFinite()) return FormatError("non-finite parameter");
  return model;
}

}  // namespace mlark
