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

#ifndef DEMOFORGE_EXPORT_HPP_
#define DEMOFORGE_EXPORT_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "demoforge/demo.hpp"
#include "demoforge/geom.hpp"
#include "demoforge/kinematics.hpp"
#include "demoforge/scene.hpp"

namespace demoforge {

struct DiscreteAction {
  std::array<int, 3> trans_index{0, 0, 0};
  std::array<int, 3> rot_bins{0, 0, 0};
  int gripper = 1;  // 1 = open

  friend bool operator==(const DiscreteAction&, const DiscreteAction&) = default;
};

// Intrinsic x-y-z Euler angles (R = Rx(a) Ry(b) Rz(c)), radians, with
// a, c in (-pi, pi] and b in [-pi/2, pi/2]. At gimbal lock c = 0.
Vec3 euler_xyz(const Mat3& r);
Mat3 from_euler_xyz(const Vec3& angles);

// Throws OutOfWorkspace when the translation is outside the grid and
// InvalidArgument unless 360 / rot_bin_deg is a positive integer.
DiscreteAction discretize_action(const RigidTransform& tcp, GripperState gripper,
                                 const kernels::GridGeometry& grid, double rot_bin_deg = 5.0);
// Voxel centre and bin-centre rotation of an action.
RigidTransform undiscretize_action(const DiscreteAction& a, const kernels::GridGeometry& grid,
                                   double rot_bin_deg = 5.0);

struct RobotOverlay {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgba;  // straight alpha, 0 or 255
  std::vector<float> depth;        // camera z, +inf where empty

  std::size_t covered() const;
};

// Flat colour of link i in renders.
std::array<std::uint8_t, 3> link_color(int link_index);

// Ray-cast collision spheres with a z-buffer. A pixel is written only where
// the robot is strictly nearer than scene_depth (NaN counts as far). With an
// empty scene_depth nothing occludes.
RobotOverlay render_spheres(std::span<const WorldSphere> spheres, const CameraIntrinsics& intrinsics,
                            const RigidTransform& camera_pose, const DepthFrame* scene_depth);
RobotOverlay render_robot(const KinematicChain& chain, const JointState& q, const CameraIntrinsics& intrinsics,
                          const RigidTransform& camera_pose, const DepthFrame* scene_depth);

// out = frame colour, mask pixels (non-zero) replaced by the plate, overlay
// blended on top. Empty mask / plate / overlay spans mean "none". Throws
// DimensionMismatch.
std::vector<std::uint8_t> composite_frame(std::span<const std::uint8_t> rgb, int width, int height,
                                          std::span<const std::uint8_t> mask,
                                          std::span<const std::uint8_t> plate,
                                          const RobotOverlay* overlay);

// One recorded frame of a scene.
struct SceneFrame {
  RgbdFrame frame;
  std::vector<std::uint8_t> mask;  // empty when none recorded
  bool hand_present = false;
};

// Random access to recorded frames; implemented by the session archive.
class FrameSource {
 public:
  virtual ~FrameSource() = default;
  virtual std::size_t size() const = 0;
  virtual double timestamp(std::size_t i) const = 0;
  virtual SceneFrame load(std::size_t i) const = 0;
  // Hand-free colour image of the static scene, empty when none.
  virtual std::vector<std::uint8_t> background_plate() const = 0;

  // Frame whose timestamp is nearest to t (earlier one on ties).
  std::size_t nearest(double t) const;
};

class MemoryFrameSource : public FrameSource {
 public:
  explicit MemoryFrameSource(std::vector<SceneFrame> frames, std::vector<std::uint8_t> plate = {})
      : frames_(std::move(frames)), plate_(std::move(plate)) {}
  std::size_t size() const override { return frames_.size(); }
  double timestamp(std::size_t i) const override { return frames_.at(i).frame.timestamp; }
  SceneFrame load(std::size_t i) const override { return frames_.at(i); }
  std::vector<std::uint8_t> background_plate() const override { return plate_; }

 private:
  std::vector<SceneFrame> frames_;
  std::vector<std::uint8_t> plate_;
};

// Default voxel workspace: 1 m cube in front of the base, aligned with the
// world axes, base translation + [(-0.2, -0.5, -0.02), (0.8, 0.5, 0.98)].
Aabb default_workspace(const RigidTransform& base);

struct PerActOptions {
  std::optional<Aabb> workspace;  // default_workspace(chain base) when unset
  double resolution = 0.01;
  double rot_bin_deg = 5.0;
  int cloud_stride = 1;
  std::size_t occupancy_min_points = 1;
  bool color = true;
  unsigned threads = 1;
};

struct PerActSample {
  VoxelGrid voxel_obs;
  std::string language_goal;
  DiscreteAction action;
  std::size_t keyframe_obs = 0;     // index into Demonstration::keyframes
  std::size_t frame_index = 0;      // source frame voxelized
};

// One sample per consecutive keyframe pair (i, i + 1): observation from the
// frame nearest keyframe i with hand pixels excluded, action from keyframe
// i + 1. Fewer than two keyframes give no samples. Throws OutOfWorkspace.
std::vector<PerActSample> export_peract(const KinematicChain& chain, const Demonstration& demo,
                                        const FrameSource& frames, const PerActOptions& opts = {});

struct ImageBcOptions {
  int stride = 1;  // trajectory samples; count = ceil(n / stride)
  bool render_robot = true;
  unsigned threads = 1;
};

struct ImageBcSample {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> image;  // RGB8
  std::size_t trajectory_index = 0;
  std::size_t frame_index = 0;
  double t = 0.0;
  RigidTransform action_tcp;  // next keyframe strictly after the sample
  GripperState action_gripper = GripperState::kOpen;
};

// Throws MissingMask when a hand-present frame has no mask, InvalidArgument
// when masks are needed but no background plate exists.
std::vector<ImageBcSample> export_imagebc(const KinematicChain& chain, const Demonstration& demo,
                                          const FrameSource& frames, const ImageBcOptions& opts = {});

// Voxel payload: "DFVX", u32 version (1), u32 dims[3], f64 origin[3],
// f64 resolution, u32 flags (bit 0 = colour), occupancy bitset in linear
// index order (LSB first, ceil(N / 8) bytes), then 3 bytes RGB per occupied
// voxel in index order when coloured. Little-endian.
std::vector<std::uint8_t> encode_voxels(const VoxelGrid& grid);
// Throws Schema on malformed input.
VoxelGrid decode_voxels(std::span<const std::uint8_t> bytes);

}  // namespace demoforge

#endif  // DEMOFORGE_EXPORT_HPP_
