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

#include <cstdlib>
#include <cstring>

#include "mlark/kernels.h"

namespace mlark::kernels {

std::string_view IsaName(Isa isa) {
  return isa == Isa::kAvx2 ? "avx2" : "scalar";
}

namespace {

const KernelTable& Select() {
  const char* pinned = std::getenv("MLARK_KERNELS");
  if (pinned != nullptr && std::strcmp(pinned, "scalar") == 0) {
    return ScalarKernels();
  }
  if (const KernelTable* avx2 = Avx2Kernels()) return *avx2;
  return ScalarKernels();
}

}  // namespace

const KernelTable& Active() {
  static const KernelTable& table = Select();
  return table;
}

}  // namespace mlark::kernels
