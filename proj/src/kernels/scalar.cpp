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

#include <cmath>

#include "demoforge/kernels/kernels.hpp"

namespace demoforge::kernels {
namespace {

void unproject_row_scalar(const float* depth, std::size_t n, int u0, int v,
                          const UnprojectParams& p, double* xyz, std::uint8_t* valid) {
  const double vv = static_cast<double>(v);
  for (std::size_t i = 0; i < n; ++i) {
    const double z = depth[i];
    valid[i] = (z > 0.0 && z < INFINITY) ? 1 : 0;
    const double u = static_cast<double>(u0 + static_cast<int>(i));
    const double xc = (u - p.cx) * z / p.fx;
    const double yc = (vv - p.cy) * z / p.fy;
    double* out = xyz + 3 * i;
    out[0] = p.rot[0] * xc + p.rot[1] * yc + p.rot[2] * z + p.trans[0];
    out[1] = p.rot[3] * xc + p.rot[4] * yc + p.rot[5] * z + p.trans[1];
    out[2] = p.rot[6] * xc + p.rot[7] * yc + p.rot[8] * z + p.trans[2];
  }
}

std::size_t plane_inliers_scalar(const double* xyz, std::size_t n, const double normal[3],
                                 double offset, double threshold, std::uint8_t* mask) {
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* p = xyz + 3 * i;
    const double d = normal[0] * p[0] + normal[1] * p[1] + normal[2] * p[2] - offset;
    const bool in = std::fabs(d) < threshold;
    count += in ? 1 : 0;
    if (mask != nullptr) mask[i] = in ? 1 : 0;
  }
  return count;
}

void voxel_index_scalar(const double* xyz, std::size_t n, const GridGeometry& g,
                        std::int64_t* index) {
  const double nx = g.dims[0];
  const double ny = g.dims[1];
  const double nz = g.dims[2];
  for (std::size_t i = 0; i < n; ++i) {
    const double* p = xyz + 3 * i;
    const double fx = std::floor((p[0] - g.origin[0]) / g.resolution);
    const double fy = std::floor((p[1] - g.origin[1]) / g.resolution);
    const double fz = std::floor((p[2] - g.origin[2]) / g.resolution);
    const bool inside = fx >= 0.0 && fx < nx && fy >= 0.0 && fy < ny && fz >= 0.0 && fz < nz;
    if (!inside) {
      index[i] = -1;
      continue;
    }
    const auto ix = static_cast<std::int64_t>(fx);
    const auto iy = static_cast<std::int64_t>(fy);
    const auto iz = static_cast<std::int64_t>(fz);
    index[i] = ix + g.dims[0] * (iy + static_cast<std::int64_t>(g.dims[1]) * iz);
  }
}

void composite_scalar(const std::uint8_t* rgb, const std::uint8_t* mask,
                      const std::uint8_t* plate, const std::uint8_t* overlay, std::size_t pixels,
                      std::uint8_t* out) {
  for (std::size_t i = 0; i < pixels; ++i) {
    const std::uint8_t* src = (mask != nullptr && mask[i] != 0) ? plate + 3 * i : rgb + 3 * i;
    const std::uint32_t a = overlay != nullptr ? overlay[4 * i + 3] : 0u;
    for (int c = 0; c < 3; ++c) {
      const std::uint32_t ov = overlay != nullptr ? overlay[4 * i + c] : 0u;
      out[3 * i + c] = static_cast<std::uint8_t>(div255(src[c] * (255u - a) + ov * a));
    }
  }
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{"scalar", unproject_row_scalar, plane_inliers_scalar,
                                 voxel_index_scalar, composite_scalar};
  return table;
}

}  // namespace demoforge::kernels
