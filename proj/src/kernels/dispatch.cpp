// Copyright 2026 The demoforge Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstdlib>
#include <string_view>

#include "demoforge/kernels/kernels.hpp"

namespace demoforge::kernels {

#if defined(DEMOFORGE_HAVE_AVX2)
const KernelTable& avx2_table_impl();
#endif

const KernelTable* avx2_table() {
#if defined(DEMOFORGE_HAVE_AVX2)
  static const bool supported = __builtin_cpu_supports("avx2") != 0;
  return supported ? &avx2_table_impl() : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& active() {
  static const KernelTable& table = []() -> const KernelTable& {
    const char* forced = std::getenv("DEMOFORGE_KERNELS");
    const std::string_view choice = forced != nullptr ? forced : "";
    if (choice == "scalar") return scalar_table();
    if (const KernelTable* simd = avx2_table()) return *simd;
    return scalar_table();
  }();
  return table;
}

}  // namespace demoforge::kernels
