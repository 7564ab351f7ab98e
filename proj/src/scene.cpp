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

#include "demoforge/scene.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <random>
#include <string>

#include <Eigen/Eigenvalues>

#include "demoforge/error.hpp"

namespace demoforge {

static_assert(sizeof(Vec3) == 3 * sizeof(double), "kernels read Vec3 arrays as interleaved xyz");

void PointCloud::validate() const {
  if (!colors.empty() && colors.size() != points.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "colors must be parallel to points");
  }
  for (const Vec3& p : points) {
    if (!p.allFinite()) throw Error(ErrorCode::kInvalidArgument, "non-finite point");
  }
}

PointCloud build_point_cloud(const RgbdFrame& frame, const CloudOptions& opts) {
  frame.validate();
  if (opts.stride < 1) throw Error(ErrorCode::kInvalidArgument, "stride must be >= 1");
  const int w = frame.width();
  const int h = frame.height();
  if (!opts.exclude.empty() && opts.exclude.size() != static_cast<std::size_t>(w) * h) {
    throw Error(ErrorCode::kDimensionMismatch, "exclusion mask size");
  }

  const CameraIntrinsics& k = frame.intrinsics;
  kernels::UnprojectParams params{k.fx, k.fy, k.cx, k.cy, {}, {}};
  const Mat3 r = frame.camera_pose.rotation_matrix();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) params.rot[3 * i + j] = r(i, j);
    params.trans[i] = frame.camera_pose.translation()[i];
  }

  const auto& kern = kernels::active();
  PointCloud cloud;
  std::vector<double> xyz(3 * static_cast<std::size_t>(w));
  std::vector<std::uint8_t> valid(static_cast<std::size_t>(w));
  for (int v = 0; v < h; v += opts.stride) {
    const float* row = frame.depth.depth.data() + static_cast<std::size_t>(v) * w;
    if (opts.stride == 1) {
      kern.unproject_row(row, static_cast<std::size_t>(w), 0, v, params, xyz.data(), valid.data());
    } else {
      for (int u = 0; u < w; u += opts.stride) {
        kern.unproject_row(row + u, 1, u, v, params, &xyz[3 * static_cast<std::size_t>(u)],
                           &valid[static_cast<std::size_t>(u)]);
      }
    }
    for (int u = 0; u < w; u += opts.stride) {
      const std::size_t pix = static_cast<std::size_t>(v) * w + u;
      if (!valid[static_cast<std::size_t>(u)]) continue;
      if (!opts.exclude.empty() && opts.exclude[pix] != 0) continue;
      const double* p = &xyz[3 * static_cast<std::size_t>(u)];
      cloud.points.emplace_back(p[0], p[1], p[2]);
      const std::uint8_t* c = frame.color.data() + 3 * pix;
      cloud.colors.push_back({c[0], c[1], c[2]});
    }
  }
  if (cloud.points.empty()) throw Error(ErrorCode::kEmptyFrame, "frame has no valid depth");
  return cloud;
}

namespace {

// Least-squares plane through the selected points: normal = eigenvector of
// the smallest covariance eigenvalue.
bool fit_plane(const PointCloud& cloud, std::span<const std::uint8_t> mask, Vec3& normal,
               double& offset) {
  Vec3 mean = Vec3::Zero();
  std::size_t n = 0;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (!mask[i]) continue;
    mean += cloud.points[i];
    ++n;
  }
  if (n < 3) return false;
  mean /= static_cast<double>(n);
  Mat3 cov = Mat3::Zero();
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (!mask[i]) continue;
    const Vec3 d = cloud.points[i] - mean;
    cov += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Mat3> solver(cov);
  if (solver.info() != Eigen::Success) return false;
  normal = solver.eigenvectors().col(0).normalized();
  offset = normal.dot(mean);
  return normal.allFinite();
}

}  // namespace

Plane detect_dominant_plane(const PointCloud& cloud, const PlaneOptions& opts) {
  const std::size_t n = cloud.size();
  if (n < 3) throw Error(ErrorCode::kNoPlaneFound, "need at least 3 points, got " + std::to_string(n));
  if (!(opts.inlier_dist > 0.0)) throw Error(ErrorCode::kInvalidArgument, "inlier_dist must be positive");

  const auto& kern = kernels::active();
  std::mt19937_64 rng(opts.seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);

  std::size_t best_count = 0;
  Vec3 best_normal = Vec3::UnitZ();
  double best_offset = 0.0;
  const int iterations = n == 3 ? 1 : std::max(1, opts.iterations);
  for (int it = 0; it < iterations; ++it) {
    std::size_t a = 0, b = 1, c = 2;
    if (n > 3) {
      a = pick(rng);
      do b = pick(rng); while (b == a);
      do c = pick(rng); while (c == a || c == b);
    }
    const Vec3 cross = (cloud.points[b] - cloud.points[a]).cross(cloud.points[c] - cloud.points[a]);
    const double len = cross.norm();
    if (len < 1e-12) continue;
    const Vec3 normal = cross / len;
    const double offset = normal.dot(cloud.points[a]);
    const std::size_t count =
        kern.plane_inliers(cloud.xyz(), n, normal.data(), offset, opts.inlier_dist, nullptr);
    if (count > best_count) {
      best_count = count;
      best_normal = normal;
      best_offset = offset;
    }
  }
  if (best_count < std::max<std::size_t>(opts.min_inliers, 3)) {
    throw Error(ErrorCode::kNoPlaneFound,
                "best hypothesis has " + std::to_string(best_count) + " inliers");
  }

  std::vector<std::uint8_t> mask(n);
  kern.plane_inliers(cloud.xyz(), n, best_normal.data(), best_offset, opts.inlier_dist, mask.data());
  Plane plane{best_normal, best_offset, best_count};
  Vec3 refit_normal;
  double refit_offset = 0.0;
  if (fit_plane(cloud, mask, refit_normal, refit_offset)) {
    const std::size_t refit_count = kern.plane_inliers(cloud.xyz(), n, refit_normal.data(),
                                                       refit_offset, opts.inlier_dist, nullptr);
    if (refit_count >= best_count) plane = Plane{refit_normal, refit_offset, refit_count};
  }
  if (plane.signed_distance(opts.viewpoint) < 0.0) {
    plane.normal = -plane.normal;
    plane.offset = -plane.offset;
  }
  return plane;
}

VoxelGrid::VoxelGrid(const Vec3& origin, double resolution, std::array<int, 3> dims,
                     bool with_color)
    : origin_(origin), resolution_(resolution), dims_(dims) {
  if (!(resolution > 0.0) || dims[0] < 1 || dims[1] < 1 || dims[2] < 1) {
    throw Error(ErrorCode::kInvalidArgument, "voxel grid needs resolution > 0 and dims >= 1");
  }
  bits_.assign((size() + 63) / 64, 0);
  if (with_color) colors_.assign(size(), Rgb8{});
}

Aabb VoxelGrid::bounds() const {
  return {origin_, origin_ + resolution_ * Vec3(dims_[0], dims_[1], dims_[2])};
}

kernels::GridGeometry VoxelGrid::geometry() const {
  return {{origin_.x(), origin_.y(), origin_.z()}, resolution_, {dims_[0], dims_[1], dims_[2]}};
}

void VoxelGrid::set_occupied(std::size_t index, bool value) {
  const std::uint64_t bit = std::uint64_t{1} << (index & 63);
  if (value) {
    bits_[index >> 6] |= bit;
  } else {
    bits_[index >> 6] &= ~bit;
  }
}

std::size_t VoxelGrid::occupied_count() const {
  std::size_t count = 0;
  for (std::uint64_t w : bits_) count += static_cast<std::size_t>(std::popcount(w));
  return count;
}

std::vector<std::size_t> VoxelGrid::occupied_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t w = 0; w < bits_.size(); ++w) {
    std::uint64_t word = bits_[w];
    while (word != 0) {
      out.push_back(w * 64 + static_cast<std::size_t>(std::countr_zero(word)));
      word &= word - 1;
    }
  }
  return out;
}

std::array<int, 3> VoxelGrid::coords(std::size_t index) const {
  const auto nx = static_cast<std::size_t>(dims_[0]);
  const auto ny = static_cast<std::size_t>(dims_[1]);
  return {static_cast<int>(index % nx), static_cast<int>((index / nx) % ny),
          static_cast<int>(index / (nx * ny))};
}

Vec3 VoxelGrid::center(std::size_t index) const {
  const auto c = coords(index);
  return origin_ + resolution_ * Vec3(c[0] + 0.5, c[1] + 0.5, c[2] + 0.5);
}

std::optional<std::array<int, 3>> VoxelGrid::locate(const Vec3& p) const {
  std::array<int, 3> out{};
  for (int a = 0; a < 3; ++a) {
    const double f = std::floor((p[a] - origin_[a]) / resolution_);
    if (!(f >= 0.0 && f < dims_[a])) return std::nullopt;
    out[a] = static_cast<int>(f);
  }
  return out;
}

bool operator==(const VoxelGrid& a, const VoxelGrid& b) {
  return a.origin_ == b.origin_ && a.resolution_ == b.resolution_ && a.dims_ == b.dims_ &&
         a.bits_ == b.bits_ && a.colors_ == b.colors_;
}

VoxelGrid voxelize(const PointCloud& cloud, const Aabb& bounds, double resolution,
                   const VoxelizeOptions& opts) {
  if (!(resolution > 0.0)) throw Error(ErrorCode::kInvalidArgument, "resolution must be positive");
  const Vec3 extent = bounds.max - bounds.min;
  if (!extent.allFinite() || (extent.array() <= 0.0).any()) {
    throw Error(ErrorCode::kInvalidArgument, "degenerate voxel bounds");
  }
  cloud.validate();
  std::array<int, 3> dims{};
  double total = 1.0;
  for (int a = 0; a < 3; ++a) {
    // Tolerate representation error so that 1.0 / 0.01 gives 100 cells.
    const double cells = std::max(1.0, std::ceil(extent[a] / resolution - 1e-9));
    total *= cells;
    if (total > static_cast<double>(opts.max_voxels)) {
      throw Error(ErrorCode::kGridTooLarge, "grid exceeds " + std::to_string(opts.max_voxels) + " voxels");
    }
    dims[a] = static_cast<int>(cells);
  }

  VoxelGrid grid(bounds.min, resolution, dims, cloud.has_colors());
  const std::size_t n = cloud.size();
  if (n == 0) return grid;
  std::vector<std::int64_t> index(n);
  kernels::active().voxel_index(cloud.xyz(), n, grid.geometry(), index.data());

  // Group points by voxel; sort keeps the per-voxel color sums deterministic.
  std::vector<std::pair<std::int64_t, std::uint32_t>> hits;
  hits.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (index[i] >= 0) hits.emplace_back(index[i], static_cast<std::uint32_t>(i));
  }
  std::sort(hits.begin(), hits.end());
  const std::size_t min_points = std::max<std::size_t>(1, opts.occupancy_min_points);
  for (std::size_t begin = 0; begin < hits.size();) {
    std::size_t end = begin;
    std::uint64_t sum[3] = {0, 0, 0};
    while (end < hits.size() && hits[end].first == hits[begin].first) {
      if (cloud.has_colors()) {
        const Rgb8& c = cloud.colors[hits[end].second];
        sum[0] += c.r;
        sum[1] += c.g;
        sum[2] += c.b;
      }
      ++end;
    }
    const std::size_t count = end - begin;
    if (count >= min_points) {
      const auto voxel = static_cast<std::size_t>(hits[begin].first);
      grid.set_occupied(voxel);
      if (cloud.has_colors()) {
        auto mean = [count](std::uint64_t s) {
          return static_cast<std::uint8_t>((s + count / 2) / count);
        };
        grid.set_color(voxel, {mean(sum[0]), mean(sum[1]), mean(sum[2])});
      }
    }
    begin = end;
  }
  return grid;
}

std::vector<WorldSphere> robot_spheres(const KinematicChain& chain, const JointState& q,
                                       LimitCheck check) {
  const FkResult fk = forward_kinematics(chain, q, check);
  std::vector<WorldSphere> out;
  const auto links = chain.links();
  for (std::size_t i = 0; i < links.size(); ++i) {
    const auto& spheres = links[i].collision_spheres;
    for (std::size_t s = 0; s < spheres.size(); ++s) {
      out.push_back({static_cast<int>(i), static_cast<int>(s), fk.link_poses[i].apply(spheres[s].center),
                     spheres[s].radius});
    }
  }
  return out;
}

ContactReport collide(std::span<const WorldSphere> spheres, const VoxelGrid& grid) {
  ContactReport report;
  if (grid.size() == 0) return report;
  const double res = grid.resolution();
  const double half_diagonal = 0.5 * std::sqrt(3.0) * res;
  const auto& dims = grid.dims();
  std::vector<Contact> found;
  for (const WorldSphere& s : spheres) {
    const double reach = s.radius + half_diagonal;
    int lo[3], hi[3];
    bool empty = false;
    for (int a = 0; a < 3; ++a) {
      // Voxel centers sit at origin + (i + 0.5) res; pad by one cell.
      const double f0 = std::floor((s.center[a] - reach - grid.origin()[a]) / res) - 1.0;
      const double f1 = std::floor((s.center[a] + reach - grid.origin()[a]) / res) + 1.0;
      lo[a] = static_cast<int>(std::max(0.0, f0));
      hi[a] = static_cast<int>(std::min<double>(dims[a] - 1, f1));
      if (lo[a] > hi[a]) empty = true;
    }
    if (empty) continue;
    found.clear();
    for (int iz = lo[2]; iz <= hi[2]; ++iz) {
      for (int iy = lo[1]; iy <= hi[1]; ++iy) {
        for (int ix = lo[0]; ix <= hi[0]; ++ix) {
          const std::size_t idx = grid.linear(ix, iy, iz);
          if (!grid.occupied(idx)) continue;
          const double d = (grid.center(idx) - s.center).norm();
          if (d < reach) found.push_back({s.link_index, s.sphere_index, idx, reach - d});
        }
      }
    }
    std::sort(found.begin(), found.end(),
              [](const Contact& a, const Contact& b) { return a.voxel_index < b.voxel_index; });
    report.contacts.insert(report.contacts.end(), found.begin(), found.end());
  }
  return report;
}

ContactReport collide(const KinematicChain& chain, const JointState& q, const VoxelGrid& grid) {
  const auto spheres = robot_spheres(chain, q);
  return collide(spheres, grid);
}

}  // namespace demoforge
