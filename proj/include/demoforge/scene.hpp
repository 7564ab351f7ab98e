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

#ifndef DEMOFORGE_SCENE_HPP_
#define DEMOFORGE_SCENE_HPP_

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "demoforge/geom.hpp"
#include "demoforge/kernels/kernels.hpp"
#include "demoforge/kinematics.hpp"

namespace demoforge {

struct Rgb8 {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb8&, const Rgb8&) = default;
};

struct PointCloud {
  std::vector<Vec3> points;  // world frame
  std::vector<Rgb8> colors;  // empty, or one per point

  std::size_t size() const { return points.size(); }
  bool has_colors() const { return !colors.empty(); }
  // Interleaved xyz view used by the kernels.
  const double* xyz() const { return points.empty() ? nullptr : points.front().data(); }
  void validate() const;
};

struct CloudOptions {
  int stride = 1;  // keep every stride-th pixel in both directions
  // Optional per-pixel mask (1 = drop), e.g. hand pixels.
  std::span<const std::uint8_t> exclude;
};

// One world point per valid depth pixel. Throws EmptyFrame when no pixel has
// valid depth.
PointCloud build_point_cloud(const RgbdFrame& frame, const CloudOptions& opts = {});

struct Plane {
  Vec3 normal = Vec3::UnitZ();  // unit length
  double offset = 0.0;          // {p : normal . p = offset}
  std::size_t inlier_count = 0;

  double signed_distance(const Vec3& p) const { return normal.dot(p) - offset; }
  Vec3 project(const Vec3& p) const { return p - signed_distance(p) * normal; }
};

struct PlaneOptions {
  int iterations = 500;
  double inlier_dist = 0.01;
  std::size_t min_inliers = 3;
  std::uint64_t seed = 1;
  // The returned normal points toward this point (typically the camera).
  Vec3 viewpoint = Vec3::Zero();
};

// RANSAC over 3-point hypotheses followed by a least-squares refit on the
// best inlier set. Deterministic for a fixed seed. Throws NoPlaneFound.
Plane detect_dominant_plane(const PointCloud& cloud, const PlaneOptions& opts = {});

struct Aabb {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();
};

// Dense occupancy grid; voxel (ix, iy, iz) covers
// origin + [i, i + 1) * resolution on each axis and has linear index
// ix + nx * (iy + ny * iz).
class VoxelGrid {
 public:
  VoxelGrid() = default;
  VoxelGrid(const Vec3& origin, double resolution, std::array<int, 3> dims, bool with_color);

  const Vec3& origin() const { return origin_; }
  double resolution() const { return resolution_; }
  const std::array<int, 3>& dims() const { return dims_; }
  std::size_t size() const { return static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2]; }
  Aabb bounds() const;
  kernels::GridGeometry geometry() const;

  bool occupied(std::size_t index) const { return (bits_[index >> 6] >> (index & 63)) & 1u; }
  bool occupied(int ix, int iy, int iz) const { return occupied(linear(ix, iy, iz)); }
  void set_occupied(std::size_t index, bool value = true);
  std::size_t occupied_count() const;
  std::vector<std::size_t> occupied_indices() const;

  bool has_color() const { return !colors_.empty(); }
  const Rgb8& color(std::size_t index) const { return colors_[index]; }
  void set_color(std::size_t index, Rgb8 c) { colors_[index] = c; }

  std::size_t linear(int ix, int iy, int iz) const {
    return static_cast<std::size_t>(ix) +
           static_cast<std::size_t>(dims_[0]) *
               (static_cast<std::size_t>(iy) + static_cast<std::size_t>(dims_[1]) * iz);
  }
  std::array<int, 3> coords(std::size_t index) const;
  Vec3 center(std::size_t index) const;
  // Enclosing voxel of p, if inside the grid.
  std::optional<std::array<int, 3>> locate(const Vec3& p) const;

  const std::vector<std::uint64_t>& words() const { return bits_; }

  friend bool operator==(const VoxelGrid& a, const VoxelGrid& b);

 private:
  Vec3 origin_ = Vec3::Zero();
  double resolution_ = 1.0;
  std::array<int, 3> dims_{0, 0, 0};
  std::vector<std::uint64_t> bits_;
  std::vector<Rgb8> colors_;
};

struct VoxelizeOptions {
  std::size_t occupancy_min_points = 1;
  std::size_t max_voxels = std::size_t{512} * 512 * 512;
};

// Throws InvalidArgument for degenerate bounds or resolution, GridTooLarge when
// the grid would exceed max_voxels.
VoxelGrid voxelize(const PointCloud& cloud, const Aabb& bounds, double resolution,
                   const VoxelizeOptions& opts = {});

struct WorldSphere {
  int link_index = 0;
  int sphere_index = 0;
  Vec3 center;
  double radius = 0.0;
};

// Collision spheres of every link posed at q, world frame.
std::vector<WorldSphere> robot_spheres(const KinematicChain& chain, const JointState& q,
                                       LimitCheck check = LimitCheck::kEnforce);

struct Contact {
  int link_index = 0;
  int sphere_index = 0;
  std::size_t voxel_index = 0;
  double penetration_depth = 0.0;
  friend bool operator==(const Contact&, const Contact&) = default;
};

struct ContactReport {
  std::vector<Contact> contacts;  // ordered by (link, sphere, voxel)
  bool collision_free() const { return contacts.empty(); }
};

// Contact for every (sphere, occupied voxel) with
// |sphere center - voxel center| < radius + voxel half-diagonal.
ContactReport collide(const KinematicChain& chain, const JointState& q, const VoxelGrid& grid);
ContactReport collide(std::span<const WorldSphere> spheres, const VoxelGrid& grid);

}  // namespace demoforge

#endif  // DEMOFORGE_SCENE_HPP_
