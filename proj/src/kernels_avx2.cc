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

#if defined(__x86_64__) || defined(_M_X64)
#define MLARK_HAVE_AVX2_KERNELS 1
#include <immintrin.h>
#else
#define MLARK_HAVE_AVX2_KERNELS 0
#endif

namespace mlark::kernels {

#if MLARK_HAVE_AVX2_KERNELS
namespace {

#define MLARK_AVX2 __attribute__((target("avx2,fma")))

MLARK_AVX2 inline double HorizontalSum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

MLARK_AVX2 double DotAvx2(const double* a, const double* b, size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4),
                           _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double acc = HorizontalSum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

MLARK_AVX2 void AxpyAvx2(double alpha, const double* x, double* y, size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(
        y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

MLARK_AVX2 void AffineAvx2(const double* w, const double* b, const double* x,
                           double* y, size_t rows, size_t cols) {
  for (size_t r = 0; r < rows; ++r) y[r] = b[r] + DotAvx2(w + r * cols, x, cols);
}

MLARK_AVX2 void AffineTransposeAvx2(const double* w, const double* d,
                                    double* out, size_t rows, size_t cols) {
  for (size_t c = 0; c < cols; ++c) out[c] = 0.0;
  for (size_t r = 0; r < rows; ++r) AxpyAvx2(d[r], w + r * cols, out, cols);
}

MLARK_AVX2 void OuterAccumulateAvx2(const double* d, const double* a, double* g,
                                    size_t rows, size_t cols) {
  for (size_t r = 0; r < rows; ++r) AxpyAvx2(d[r], a, g + r * cols, cols);
}

#undef MLARK_AVX2

}  // namespace

bool CpuSupportsAvx2() {
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}

const KernelTable* Avx2Kernels() {
  static constexpr KernelTable kTable = {
      Isa::kAvx2,          AffineAvx2, AffineTransposeAvx2,
      OuterAccumulateAvx2, AxpyAvx2,   DotAvx2,
  };
  return CpuSupportsAvx2() ? &kTable : nullptr;
}

#else

bool CpuSupportsAvx2() { return false; }
const KernelTable* Avx2Kernels() { return nullptr; }

#endif

}  // namespace mlark::kernels
