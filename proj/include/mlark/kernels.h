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

#ifndef MLARK_KERNELS_H_
#define MLARK_KERNELS_H_

#include <cstddef>
#include <span>
#include <string_view>

// Dense float64 kernels behind the MLP forward/backward pass and the helpers'
// masked accumulation. Each kernel has a portable scalar reference and an
// AVX2+FMA variant; the variant is chosen once at startup from CPUID and can
// be pinned with MLARK_KERNELS=scalar|avx2.
//
// Reductions (dot, affine rows) sum in a different order under AVX2, so the
// two variants agree to rounding, not bit-for-bit. Two helpers on the same
// host always pick the same variant.

namespace mlark::kernels {

enum class Isa { kScalar, kAvx2 };

std::string_view IsaName(Isa isa);

struct KernelTable {
  Isa isa;
  // y[r] = b[r] + sum_c w[r * cols + c] * x[c]
  void (*affine)(const double* w, const double* b, const double* x, double* y,
                 size_t rows, size_t cols);
  // out[c] = sum_r w[r * cols + c] * d[r]
  void (*affine_transpose)(const double* w, const double* d, double* out,
                           size_t rows, size_t cols);
  // g[r * cols + c] += d[r] * a[c]
  void (*outer_accumulate)(const double* d, const double* a, double* g,
                           size_t rows, size_t cols);
  // y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, size_t n);
  double (*dot)(const double* a, const double* b, size_t n);
};

const KernelTable& ScalarKernels();
// nullptr when the build or the CPU lacks AVX2+FMA.
const KernelTable* Avx2Kernels();
bool CpuSupportsAvx2();

// The table selected for this process.
const KernelTable& Active();

inline void Affine(std::span<const double> w, std::span<const double> b,
                   std::span<const double> x, std::span<double> y) {
  Active().affine(w.data(), b.data(), x.data(), y.data(), y.size(), x.size());
}

inline void AffineTranspose(std::span<const double> w,
                            std::span<const double> d,
                            std::span<double> out) {
  Active().affine_transpose(w.data(), d.data(), out.data(), d.size(),
                            out.size());
}

inline void OuterAccumulate(std::span<const double> d,
                            std::span<const double> a, std::span<double> g) {
  Active().outer_accumulate(d.data(), a.data(), g.data(), d.size(), a.size());
}

inline void Axpy(double alpha, std::span<const double> x, std::span<double> y) {
  Active().axpy(alpha, x.data(), y.data(), y.size());
}

inline double Dot(std::span<const double> a, std::span<const double> b) {
  return Active().dot(a.data(), b.data(), a.size());
}

}  // namespace mlark::kernels

#endif  // MLARK_KERNELS_H_
