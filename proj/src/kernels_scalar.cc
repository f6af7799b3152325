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

#include "mlark/kernels.h"

namespace mlark::kernels {
namespace {

void AffineScalar(const double* w, const double* b, const double* x, double* y,
                  size_t rows, size_t cols) {
  for (size_t r = 0; r < rows; ++r) {
    const double* row = w + r * cols;
    double acc = 0.0;
    for (size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
    y[r] = b[r] + acc;
  }
}

void AffineTransposeScalar(const double* w, const double* d, double* out,
                           size_t rows, size_t cols) {
  for (size_t c = 0; c < cols; ++c) out[c] = 0.0;
  for (size_t r = 0; r < rows; ++r) {
    const double* row = w + r * cols;
    const double dr = d[r];
    for (size_t c = 0; c < cols; ++c) out[c] += row[c] * dr;
  }
}

void OuterAccumulateScalar(const double* d, const double* a, double* g,
                           size_t rows, size_t cols) {
  for (size_t r = 0; r < rows; ++r) {
    double* row = g + r * cols;
    const double dr = d[r];
    for (size_t c = 0; c < cols; ++c) row[c] += dr * a[c];
  }
}

void AxpyScalar(double alpha, const double* x, double* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double DotScalar(const double* a, const double* b, size_t n) {
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace

const KernelTable& ScalarKernels() {
  static constexpr KernelTable kTable = {
      Isa::kScalar,          AffineScalar, AffineTransposeScalar,
      OuterAccumulateScalar, AxpyScalar,   DotScalar,
  };
  return kTable;
}

}  // namespace mlark::kernels
