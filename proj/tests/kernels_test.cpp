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

#include "demoforge/kernels/kernels.hpp"

#include <cmath>
#include <cstring>
#include <random>
#include <vector>

#include <gtest/gtest.h>

namespace demoforge::kernels {
namespace {

std::vector<double> random_points(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> xyz(3 * n);
  for (double& v : xyz) v = u(rng);
  // A few special values to exercise the comparisons.
  if (n > 8) {
    xyz[3] = std::nan("");
    xyz[7] = INFINITY;
    xyz[11] = -INFINITY;
  }
  return xyz;
}

class SimdEquivalence : public ::testing::Test {
 protected:
  void SetUp() override {
    simd_ = avx2_table();
    if (simd_ == nullptr) GTEST_SKIP() << "no SIMD kernels on this CPU";
  }
  const KernelTable* simd_ = nullptr;
};

TEST(Kernels, ActiveTableIsUsable) {
  const KernelTable& t = active();
  EXPECT_FALSE(t.name.empty());
  EXPECT_NE(t.unproject_row, nullptr);
}

TEST(Kernels, Div255IsExactRounding) {
  for (std::uint32_t x = 0; x <= 255u * 255u; ++x) {
    ASSERT_EQ(div255(x), static_cast<std::uint32_t>(std::lround(x / 255.0))) << x;
  }
}

TEST(Kernels, ScalarUnprojectMatchesFormula) {
  const UnprojectParams p{500, 400, 3.5, 2.5, {1, 0, 0, 0, 1, 0, 0, 0, 1}, {0.5, 0, -1}};
  const float depth[3] = {2.0f, 0.0f, NAN};
  double xyz[9];
  std::uint8_t valid[3];
  scalar_table().unproject_row(depth, 3, 1, 4, p, xyz, valid);
  EXPECT_EQ(valid[0], 1);
  EXPECT_EQ(valid[1], 0);
  EXPECT_EQ(valid[2], 0);
  EXPECT_DOUBLE_EQ(xyz[0], (1 - 3.5) * 2 / 500 + 0.5);
  EXPECT_DOUBLE_EQ(xyz[1], (4 - 2.5) * 2 / 400);
  EXPECT_DOUBLE_EQ(xyz[2], 1.0);
}

TEST_F(SimdEquivalence, UnprojectRow) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<float> d(0.05f, 6.0f);
  std::uniform_real_distribution<double> c(-1, 1);
  for (std::size_t n : {1u, 3u, 4u, 7u, 640u, 643u}) {
    std::vector<float> depth(n);
    for (std::size_t i = 0; i < n; ++i) depth[i] = (i % 5 == 3) ? 0.0f : (i % 7 == 2 ? NAN : d(rng));
    UnprojectParams p{612.3, 611.7, 318.2, 241.9, {}, {c(rng), c(rng), c(rng)}};
    for (double& r : p.rot) r = c(rng);
    std::vector<double> a(3 * n), b(3 * n);
    std::vector<std::uint8_t> va(n), vb(n);
    scalar_table().unproject_row(depth.data(), n, 17, 33, p, a.data(), va.data());
    simd_->unproject_row(depth.data(), n, 17, 33, p, b.data(), vb.data());
    ASSERT_EQ(va, vb);
    for (std::size_t i = 0; i < n; ++i) {
      if (!va[i]) continue;
      ASSERT_EQ(std::memcmp(&a[3 * i], &b[3 * i], 3 * sizeof(double)), 0) << "pixel " << i;
    }
  }
}

TEST_F(SimdEquivalence, PlaneInliers) {
  std::mt19937_64 rng(12);
  for (std::size_t n : {0u, 1u, 5u, 1000u, 10001u}) {
    const std::vector<double> xyz = random_points(rng, n, -1, 1);
    const double normal[3] = {0.267261, 0.534522, 0.801784};
    std::vector<std::uint8_t> ma(n), mb(n);
    const std::size_t ca = scalar_table().plane_inliers(xyz.data(), n, normal, 0.1, 0.2, ma.data());
    const std::size_t cb = simd_->plane_inliers(xyz.data(), n, normal, 0.1, 0.2, mb.data());
    ASSERT_EQ(ca, cb);
    ASSERT_EQ(ma, mb);
    ASSERT_EQ(simd_->plane_inliers(xyz.data(), n, normal, 0.1, 0.2, nullptr), ca);
  }
}

TEST_F(SimdEquivalence, VoxelIndex) {
  std::mt19937_64 rng(13);
  const GridGeometry g{{-0.5, -0.25, 0.1}, 0.01, {100, 60, 37}};
  for (std::size_t n : {1u, 4u, 9u, 50000u}) {
    // Range wider than the grid so some points fall outside every face.
    const std::vector<double> xyz = random_points(rng, n, -0.7, 1.2);
    std::vector<std::int64_t> a(n), b(n);
    scalar_table().voxel_index(xyz.data(), n, g, a.data());
    simd_->voxel_index(xyz.data(), n, g, b.data());
    ASSERT_EQ(a, b);
  }
  // Points exactly on voxel boundaries.
  std::vector<double> edge;
  for (int i = -1; i <= 101; ++i) {
    edge.insert(edge.end(), {-0.5 + i * 0.01, -0.25 + 0.3, 0.1 + 0.05});
  }
  std::vector<std::int64_t> a(edge.size() / 3), b(edge.size() / 3);
  scalar_table().voxel_index(edge.data(), a.size(), g, a.data());
  simd_->voxel_index(edge.data(), b.size(), g, b.data());
  EXPECT_EQ(a, b);
}

TEST_F(SimdEquivalence, Composite) {
  std::mt19937_64 rng(14);
  std::uniform_int_distribution<int> byte(0, 255);
  for (std::size_t n : {1u, 5u, 6u, 7u, 10u, 4096u + 3u}) {
    std::vector<std::uint8_t> rgb(3 * n), plate(3 * n), ov(4 * n), mask(n);
    for (auto& v : rgb) v = static_cast<std::uint8_t>(byte(rng));
    for (auto& v : plate) v = static_cast<std::uint8_t>(byte(rng));
    for (auto& v : ov) v = static_cast<std::uint8_t>(byte(rng));
    for (std::size_t i = 0; i < n; ++i) {
      mask[i] = static_cast<std::uint8_t>(byte(rng) % 3 == 0 ? byte(rng) | 1 : 0);
      if (i % 4 == 0) ov[4 * i + 3] = 0;
      if (i % 4 == 1) ov[4 * i + 3] = 255;
    }
    std::vector<std::uint8_t> a(3 * n), b(3 * n);
    scalar_table().composite(rgb.data(), mask.data(), plate.data(), ov.data(), n, a.data());
    simd_->composite(rgb.data(), mask.data(), plate.data(), ov.data(), n, b.data());
    ASSERT_EQ(a, b) << n;
    // In place on the source buffer.
    std::vector<std::uint8_t> inplace = rgb;
    simd_->composite(inplace.data(), mask.data(), plate.data(), ov.data(), n, inplace.data());
    ASSERT_EQ(inplace, a) << n;
  }
}

}  // namespace
}  // namespace demoforge::kernels
