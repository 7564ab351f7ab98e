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

#ifndef DEMOFORGE_KERNELS_KERNELS_HPP_
#define DEMOFORGE_KERNELS_KERNELS_HPP_

// Data-parallel inner loops. Each kernel has a scalar reference version and,
// where the target supports it, a SIMD version selected at runtime. The SIMD
// versions perform the same floating-point operations in the same order as
// the scalar ones, so results are bit-identical (tests/kernels_test.cpp).

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace demoforge::kernels {

// Pinhole intrinsics plus a camera-to-world transform as a row-major 3x3
// rotation and translation.
struct UnprojectParams {
  double fx, fy, cx, cy;
  double rot[9];
  double trans[3];
};

struct GridGeometry {
  double origin[3];
  double resolution;
  std::int32_t dims[3];
};

// Unprojects pixels [u0, u0 + n) of image row v. `xyz` receives interleaved
// world coordinates (3 * n doubles); valid[i] is 1 iff depth[i] is finite and
// positive. Invalid entries of xyz are unspecified.
using UnprojectRowFn = void (*)(const float* depth, std::size_t n, int u0, int v,
                                const UnprojectParams& params, double* xyz,
                                std::uint8_t* valid);

// Counts points with |normal . p - offset| < threshold. `xyz` is interleaved.
// If `mask` is non-null it receives 1 for inliers, 0 otherwise.
using PlaneInliersFn = std::size_t (*)(const double* xyz, std::size_t n, const double normal[3],
                                       double offset, double threshold, std::uint8_t* mask);

// Linear voxel index ix + nx * (iy + ny * iz) with i = floor((p - origin) / res),
// or -1 when the point falls outside the grid (or is NaN).
using VoxelIndexFn = void (*)(const double* xyz, std::size_t n, const GridGeometry& grid,
                              std::int64_t* index);

// out = rgb with mask pixels replaced by plate, then overlay (RGBA8, straight
// alpha) blended on top: c = (src * (255 - a) + ov * a) / 255, rounded.
using CompositeFn = void (*)(const std::uint8_t* rgb, const std::uint8_t* mask,
                             const std::uint8_t* plate, const std::uint8_t* overlay_rgba,
                             std::size_t pixels, std::uint8_t* out);

struct KernelTable {
  std::string_view name;
  UnprojectRowFn unproject_row;
  PlaneInliersFn plane_inliers;
  VoxelIndexFn voxel_index;
  CompositeFn composite;
};

const KernelTable& scalar_table();
// nullptr when the build has no AVX2 variant or the CPU lacks AVX2.
const KernelTable* avx2_table();

// Table used by the library. Chosen once: DEMOFORGE_KERNELS=scalar|avx2
// forces a variant, otherwise the widest supported one wins.
const KernelTable& active();

// Exact rounding division by 255 for x in [0, 255 * 255].
constexpr std::uint32_t div255(std::uint32_t x) {
  const std::uint32_t t = x + 128u;
  return (t + (t >> 8)) >> 8;
}

}  // namespace demoforge::kernels

#endif  // DEMOFORGE_KERNELS_KERNELS_HPP_
