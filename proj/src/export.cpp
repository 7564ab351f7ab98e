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

#include "demoforge/export.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numbers>
#include <string>

#include "demoforge/error.hpp"
#include "demoforge/kernels/kernels.hpp"
#include "demoforge/parallel.hpp"

namespace demoforge {

Vec3 euler_xyz(const Mat3& r) {
  const double s = std::clamp(r(0, 2), -1.0, 1.0);
  if (std::abs(s) < 1.0 - 1e-12) {
    return {std::atan2(-r(1, 2), r(2, 2)), std::asin(s), std::atan2(-r(0, 1), r(0, 0))};
  }
  return {std::atan2(r(2, 1), r(1, 1)), std::copysign(std::numbers::pi / 2, s), 0.0};
}

Mat3 from_euler_xyz(const Vec3& a) {
  return (Eigen::AngleAxisd(a.x(), Vec3::UnitX()) * Eigen::AngleAxisd(a.y(), Vec3::UnitY()) *
          Eigen::AngleAxisd(a.z(), Vec3::UnitZ()))
      .toRotationMatrix();
}

namespace {

int bins_per_turn(double rot_bin_deg) {
  const double n = 360.0 / rot_bin_deg;
  if (!(rot_bin_deg > 0.0) || std::abs(n - std::round(n)) > 1e-9) {
    throw Error(ErrorCode::kInvalidArgument, "360 / rot_bin_deg must be a positive integer");
  }
  return static_cast<int>(std::round(n));
}

}  // namespace

DiscreteAction discretize_action(const RigidTransform& tcp, GripperState gripper, const kernels::GridGeometry& grid,
                                 double rot_bin_deg) {
  const int bins = bins_per_turn(rot_bin_deg);
  DiscreteAction a;
  for (int k = 0; k < 3; ++k) {
    const double c = std::floor((tcp.translation()[k] - grid.origin[k]) / grid.resolution);
    if (!(c >= 0.0 && c < grid.dims[k])) {
      throw Error(ErrorCode::kOutOfWorkspace, "TCP translation outside the voxel workspace");
    }
    a.trans_index[k] = static_cast<int>(c);
  }
  const Vec3 e = euler_xyz(tcp.rotation_matrix());
  for (int k = 0; k < 3; ++k) {
    const long b = std::lround(e[k] * 180.0 / std::numbers::pi / rot_bin_deg);
    a.rot_bins[k] = static_cast<int>(((b % bins) + bins) % bins);
  }
  a.gripper = gripper == GripperState::kOpen ? 1 : 0;
  return a;
}

RigidTransform undiscretize_action(const DiscreteAction& a, const kernels::GridGeometry& grid, double rot_bin_deg) {
  bins_per_turn(rot_bin_deg);
  Vec3 p;
  Vec3 e;
  for (int k = 0; k < 3; ++k) {
    p[k] = grid.origin[k] + (a.trans_index[k] + 0.5) * grid.resolution;
    e[k] = a.rot_bins[k] * rot_bin_deg * std::numbers::pi / 180.0;
  }
  return RigidTransform::from_rotation(from_euler_xyz(e), p);
}

std::size_t RobotOverlay::covered() const {
  std::size_t n = 0;
  for (std::size_t i = 3; i < rgba.size(); i += 4) n += rgba[i] != 0;
  return n;
}

std::array<std::uint8_t, 3> link_color(int link_index) {
  static constexpr std::array<std::array<std::uint8_t, 3>, 6> kPalette{{
      {235, 235, 235}, {200, 200, 205}, {240, 240, 240}, {70, 70, 80}, {225, 225, 230}, {40, 40, 45},
  }};
  return kPalette[static_cast<std::size_t>(link_index) % kPalette.size()];
}

RobotOverlay render_spheres(std::span<const WorldSphere> spheres, const CameraIntrinsics& k,
                            const RigidTransform& camera_pose, const DepthFrame* scene_depth) {
  k.validate();
  const bool occlude = scene_depth != nullptr && !scene_depth->depth.empty();
  if (occlude && (scene_depth->width != k.width || scene_depth->height != k.height)) {
    throw Error(ErrorCode::kDimensionMismatch, "scene depth does not match the intrinsics");
  }
  RobotOverlay out;
  out.width = k.width;
  out.height = k.height;
  const std::size_t pixels = static_cast<std::size_t>(k.width) * k.height;
  out.rgba.assign(4 * pixels, 0);
  out.depth.assign(pixels, std::numeric_limits<float>::infinity());
  const RigidTransform world_to_cam = camera_pose.inverse();

  for (const WorldSphere& s : spheres) {
    const Vec3 c = world_to_cam.apply(s.center);
    const double r = s.radius;
    if (c.z() + r <= 0.0) continue;
    int u0 = 0, u1 = k.width - 1, v0 = 0, v1 = k.height - 1;
    if (c.z() - r > 1e-6) {
      // The sphere's box lies in front of the camera, so the projected box
      // corners bound its silhouette.
      double umin = 1e300, umax = -1e300, vmin = 1e300, vmax = -1e300;
      for (int corner = 0; corner < 8; ++corner) {
        const Vec3 p = c + r * Vec3(corner & 1 ? 1 : -1, corner & 2 ? 1 : -1, corner & 4 ? 1 : -1);
        const double u = k.fx * p.x() / p.z() + k.cx;
        const double v = k.fy * p.y() / p.z() + k.cy;
        umin = std::min(umin, u);
        umax = std::max(umax, u);
        vmin = std::min(vmin, v);
        vmax = std::max(vmax, v);
      }
      if (umax < 0 || vmax < 0 || umin > k.width - 1 || vmin > k.height - 1) continue;
      u0 = std::max(0, static_cast<int>(std::floor(umin)));
      u1 = std::min(k.width - 1, static_cast<int>(std::ceil(umax)));
      v0 = std::max(0, static_cast<int>(std::floor(vmin)));
      v1 = std::min(k.height - 1, static_cast<int>(std::ceil(vmax)));
    }
    const auto color = link_color(s.link_index);
    const double cc = c.squaredNorm() - r * r;
    for (int v = v0; v <= v1; ++v) {
      const double dy = (v - k.cy) / k.fy;
      for (int u = u0; u <= u1; ++u) {
        const double dx = (u - k.cx) / k.fx;
        // Ray p = t * (dx, dy, 1); t is the camera z of the hit.
        const double a = dx * dx + dy * dy + 1.0;
        const double b = dx * c.x() + dy * c.y() + c.z();
        const double disc = b * b - a * cc;
        if (disc < 0.0) continue;
        const double sq = std::sqrt(disc);
        double t = (b - sq) / a;
        if (t <= 0.0) t = (b + sq) / a;
        if (t <= 0.0) continue;
        const std::size_t i = static_cast<std::size_t>(v) * k.width + u;
        if (!(t < out.depth[i])) continue;
        if (occlude && scene_depth->valid(u, v) && !(t < scene_depth->at(u, v))) continue;
        out.depth[i] = static_cast<float>(t);
        std::memcpy(&out.rgba[4 * i], color.data(), 3);
        out.rgba[4 * i + 3] = 255;
      }
    }
  }
  return out;
}

RobotOverlay render_robot(const KinematicChain& chain, const JointState& q, const CameraIntrinsics& intrinsics,
                          const RigidTransform& camera_pose, const DepthFrame* scene_depth) {
  const std::vector<WorldSphere> spheres = robot_spheres(chain, q);
  return render_spheres(spheres, intrinsics, camera_pose, scene_depth);
}

std::vector<std::uint8_t> composite_frame(std::span<const std::uint8_t> rgb, int width, int height,
                                          std::span<const std::uint8_t> mask, std::span<const std::uint8_t> plate,
                                          const RobotOverlay* overlay) {
  if (width <= 0 || height <= 0) throw Error(ErrorCode::kInvalidArgument, "image dimensions must be positive");
  const std::size_t pixels = static_cast<std::size_t>(width) * height;
  if (rgb.size() != 3 * pixels) throw Error(ErrorCode::kDimensionMismatch, "frame size mismatch");
  if (!mask.empty() && mask.size() != pixels) throw Error(ErrorCode::kDimensionMismatch, "mask size mismatch");
  if (!mask.empty() && plate.size() != 3 * pixels) {
    throw Error(ErrorCode::kDimensionMismatch, "background plate size mismatch");
  }
  if (overlay != nullptr && (overlay->width != width || overlay->height != height)) {
    throw Error(ErrorCode::kDimensionMismatch, "overlay size mismatch");
  }
  std::vector<std::uint8_t> out(3 * pixels);
  kernels::active().composite(rgb.data(), mask.empty() ? nullptr : mask.data(),
                              mask.empty() ? nullptr : plate.data(), overlay ? overlay->rgba.data() : nullptr,
                              pixels, out.data());
  return out;
}

std::size_t FrameSource::nearest(double t) const {
  const std::size_t n = size();
  if (n == 0) throw Error(ErrorCode::kEmptyFrame, "frame source is empty");
  std::size_t lo = 0, hi = n;  // first frame with timestamp >= t
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    if (timestamp(mid) < t) {
      lo = mid + 1;
    } else {
      hi = mid;
    }
  }
  if (lo == 0) return 0;
  if (lo == n) return n - 1;
  return (t - timestamp(lo - 1) <= timestamp(lo) - t) ? lo - 1 : lo;
}

Aabb default_workspace(const RigidTransform& base) {
  const Vec3 b = base.translation();
  return {b + Vec3(-0.2, -0.5, -0.02), b + Vec3(0.8, 0.5, 0.98)};
}

std::vector<PerActSample> export_peract(const KinematicChain& chain, const Demonstration& demo,
                                        const FrameSource& frames, const PerActOptions& opts) {
  const auto& kf = demo.keyframes;
  if (kf.size() < 2) return {};
  const Aabb workspace = opts.workspace.value_or(default_workspace(chain.base_pose()));
  std::vector<PerActSample> out(kf.size() - 1);
  parallel_for(out.size(), opts.threads, [&](std::size_t i) {
    PerActSample& s = out[i];
    s.keyframe_obs = i;
    s.frame_index = frames.nearest(kf[i].t);
    s.language_goal = demo.language_goal;
    const SceneFrame sf = frames.load(s.frame_index);
    CloudOptions co;
    co.stride = opts.cloud_stride;
    co.exclude = sf.mask;
    PointCloud cloud = build_point_cloud(sf.frame, co);
    if (!opts.color) cloud.colors.clear();
    VoxelizeOptions vo;
    vo.occupancy_min_points = opts.occupancy_min_points;
    s.voxel_obs = voxelize(cloud, workspace, opts.resolution, vo);
    s.action = discretize_action(kf[i + 1].tcp, kf[i + 1].gripper, s.voxel_obs.geometry(), opts.rot_bin_deg);
  });
  return out;
}

std::vector<ImageBcSample> export_imagebc(const KinematicChain& chain, const Demonstration& demo,
                                          const FrameSource& frames, const ImageBcOptions& opts) {
  if (opts.stride < 1) throw Error(ErrorCode::kInvalidArgument, "stride must be >= 1");
  const auto& traj = demo.trajectory.samples;
  const auto& kf = demo.keyframes;
  if (traj.empty() || kf.empty()) throw Error(ErrorCode::kEmptySession, "demonstration has no trajectory");
  const std::size_t count = (traj.size() + static_cast<std::size_t>(opts.stride) - 1) / opts.stride;
  const std::vector<std::uint8_t> plate = frames.background_plate();
  std::vector<ImageBcSample> out(count);
  parallel_for(count, opts.threads, [&](std::size_t k) {
    ImageBcSample& s = out[k];
    s.trajectory_index = k * static_cast<std::size_t>(opts.stride);
    const TrajectorySample& ts = traj[s.trajectory_index];
    s.t = ts.t;
    s.frame_index = frames.nearest(ts.t);
    SceneFrame sf = frames.load(s.frame_index);
    if (sf.hand_present && sf.mask.empty()) {
      throw Error(ErrorCode::kMissingMask, "frame " + std::to_string(s.frame_index) + " has a hand but no mask");
    }
    if (!sf.mask.empty() && plate.empty()) {
      throw Error(ErrorCode::kInvalidArgument, "hand removal needs a background plate");
    }
    s.width = sf.frame.width();
    s.height = sf.frame.height();
    std::optional<RobotOverlay> overlay;
    if (opts.render_robot) {
      // The robot replaces the hand, so masked pixels do not occlude it.
      DepthFrame depth = sf.frame.depth;
      for (std::size_t i = 0; i < sf.mask.size(); ++i) {
        if (sf.mask[i] != 0) depth.depth[i] = std::numeric_limits<float>::quiet_NaN();
      }
      overlay = render_robot(chain, ts.q, sf.frame.intrinsics, sf.frame.camera_pose, &depth);
    }
    s.image = composite_frame(sf.frame.color, s.width, s.height, sf.mask, plate, overlay ? &*overlay : nullptr);
    const auto next = std::find_if(kf.begin(), kf.end(),
                                   [&](const KeyFrame& f) { return f.index > s.trajectory_index; });
    const KeyFrame& target = next == kf.end() ? kf.back() : *next;
    s.action_tcp = target.tcp;
    s.action_gripper = target.gripper;
  });
  return out;
}

namespace {

constexpr std::uint32_t kVoxelVersion = 1;

void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& b, double d) {
  std::uint64_t v;
  std::memcpy(&v, &d, 8);
  for (int i = 0; i < 8; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}
  void need(std::size_t n) const {
    if (b_.size() - pos_ < n) throw Error(ErrorCode::kSchema, "voxel payload truncated");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b_[pos_++]) << (8 * i);
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b_[pos_++]) << (8 * i);
    double d;
    std::memcpy(&d, &v, 8);
    return d;
  }
  std::uint8_t u8() {
    need(1);
    return b_[pos_++];
  }
  bool done() const { return pos_ == b_.size(); }

 private:
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_voxels(const VoxelGrid& grid) {
  std::vector<std::uint8_t> b{'D', 'F', 'V', 'X'};
  put_u32(b, kVoxelVersion);
  for (int d : grid.dims()) put_u32(b, static_cast<std::uint32_t>(d));
  for (int k = 0; k < 3; ++k) put_f64(b, grid.origin()[k]);
  put_f64(b, grid.resolution());
  put_u32(b, grid.has_color() ? 1u : 0u);
  const std::size_t n = grid.size();
  const std::size_t start = b.size();
  b.resize(start + (n + 7) / 8, 0);
  for (std::size_t w = 0; w < grid.words().size(); ++w) {
    const std::uint64_t word = grid.words()[w];
    for (int byte = 0; byte < 8; ++byte) {
      const std::size_t at = w * 8 + static_cast<std::size_t>(byte);
      if (at < (n + 7) / 8) b[start + at] = static_cast<std::uint8_t>(word >> (8 * byte));
    }
  }
  if (grid.has_color()) {
    for (std::size_t i : grid.occupied_indices()) {
      const Rgb8& c = grid.color(i);
      b.insert(b.end(), {c.r, c.g, c.b});
    }
  }
  return b;
}

VoxelGrid decode_voxels(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  r.need(4);
  if (!(bytes[0] == 'D' && bytes[1] == 'F' && bytes[2] == 'V' && bytes[3] == 'X')) {
    throw Error(ErrorCode::kSchema, "not a voxel payload");
  }
  for (int i = 0; i < 4; ++i) r.u8();
  const std::uint32_t version = r.u32();
  if (version != kVoxelVersion) throw Error(ErrorCode::kSchema, "unsupported voxel payload version");
  std::array<int, 3> dims{};
  std::uint64_t n = 1;
  for (int& d : dims) {
    const std::uint32_t v = r.u32();
    if (v == 0 || v > (1u << 16)) throw Error(ErrorCode::kSchema, "bad voxel dims");
    d = static_cast<int>(v);
    n *= v;
  }
  if (n > std::uint64_t{1} << 32) throw Error(ErrorCode::kSchema, "voxel grid too large");
  Vec3 origin;
  for (int k = 0; k < 3; ++k) origin[k] = r.f64();
  const double res = r.f64();
  if (!origin.allFinite() || !(res > 0.0) || !std::isfinite(res)) throw Error(ErrorCode::kSchema, "bad voxel geometry");
  const std::uint32_t flags = r.u32();
  if (flags & ~1u) throw Error(ErrorCode::kSchema, "unknown voxel flags");
  const bool color = flags & 1u;
  r.need((n + 7) / 8);
  VoxelGrid grid(origin, res, dims, color);
  std::vector<std::uint8_t> bits((n + 7) / 8);
  for (auto& b : bits) b = r.u8();
  for (std::size_t i = 0; i < n; ++i) {
    if ((bits[i >> 3] >> (i & 7)) & 1u) grid.set_occupied(i);
  }
  if (n % 8 != 0 && (bits.back() >> (n % 8)) != 0) throw Error(ErrorCode::kSchema, "padding bits set");
  if (color) {
    for (std::size_t i : grid.occupied_indices()) {
      const std::uint8_t cr = r.u8(), cg = r.u8(), cb = r.u8();
      grid.set_color(i, {cr, cg, cb});
    }
  }
  if (!r.done()) throw Error(ErrorCode::kSchema, "trailing bytes in voxel payload");
  return grid;
}

}  // namespace demoforge
