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

#ifndef DEMOFORGE_DEMO_HPP_
#define DEMOFORGE_DEMO_HPP_

#include <cstddef>
#include <optional>
#include <stop_token>
#include <string>
#include <string_view>
#include <vector>

#include "demoforge/geom.hpp"
#include "demoforge/handtrack.hpp"
#include "demoforge/kinematics.hpp"
#include "demoforge/scene.hpp"

namespace demoforge {

enum class Mode { kPointing, kGui, kKinesthetic };

std::string_view mode_name(Mode m);
// Throws InvalidArgument for an unknown name.
Mode parse_mode(std::string_view name);
std::string_view gripper_name(GripperState g);
GripperState parse_gripper(std::string_view name);

struct TrajectorySample {
  double t = 0.0;
  JointState q;
  GripperState gripper = GripperState::kOpen;
  bool collision = false;
  bool reachable = true;  // false when IK failed and q was carried forward
};

struct Trajectory {
  std::vector<TrajectorySample> samples;

  bool empty() const { return samples.empty(); }
  std::size_t size() const { return samples.size(); }
  // Strictly increasing timestamps; with a chain, every q within limits.
  void validate(const KinematicChain* chain = nullptr) const;
  std::size_t collision_count() const;
};

struct KeyPoint {
  RigidTransform target;  // TCP, world
  GripperState gripper_command = GripperState::kOpen;
  JointState solved_q;
  double dwell = 0.0;  // seconds held after arrival
};

struct KeyFrame {
  std::size_t index = 0;  // trajectory sample
  double t = 0.0;
  RigidTransform tcp;
  GripperState gripper = GripperState::kOpen;
  JointState q;
};

struct Demonstration {
  std::string language_goal;
  std::string scene_ref;
  Mode mode = Mode::kPointing;
  RigidTransform base_pose;  // robot base, world
  std::vector<KeyPoint> keypoints;
  Trajectory trajectory;
  std::vector<KeyFrame> keyframes;
};

// Gripper aperture applied to JointState for a binary command.
double aperture_for(const KinematicChain& chain, GripperState g);

// TCP orientation pointing straight down onto a plane: TCP z anti-parallel to
// the normal, TCP x along the projection of `heading` onto the plane.
Eigen::Quaterniond top_down_orientation(const Vec3& plane_normal, const Vec3& heading = Vec3::UnitX());

// IK for a keypoint from `current`. A point-only input gets the top-down
// orientation. Throws UnreachableKeypoint.
KeyPoint make_keypoint(const KinematicChain& chain, const JointState& current,
                       const RigidTransform& target, GripperState gripper, double dwell = 0.0,
                       const IkOptions& ik = {});
KeyPoint make_keypoint(const KinematicChain& chain, const JointState& current, const Vec3& point,
                       const Vec3& plane_normal, GripperState gripper, double dwell = 0.0,
                       const IkOptions& ik = {});

struct PlanOptions {
  double cartesian_step = 0.01;   // m between waypoints
  double rotation_step = 0.05;    // rad between waypoints
  double max_joint_jump = 0.2;    // rad, per joint between consecutive samples
  double dt = 1.0 / 30.0;         // s between samples
  double t0 = 0.0;                // timestamp of the first sample
  GripperState start_gripper = GripperState::kOpen;
  IkOptions ik = {.restarts = 0};
  std::stop_token stop;
};

struct Segment {
  Trajectory trajectory;
  std::size_t arrival = 0;  // sample where solved_q is reached, before the dwell
};

// Straight-line TCP interpolation from FK(from) to the keypoint, IK per
// waypoint seeded by the previous one. Failed or jumping waypoints are
// bridged by joint-space interpolation; the final sample is the keypoint's
// solved_q, carrying its gripper command, followed by the dwell hold. Every
// sample is collision-checked against `grid` (may be null).
// Throws PlanningFailed (invalid endpoints) or Cancelled.
Segment plan_segment(const KinematicChain& chain, const JointState& from, const KeyPoint& to,
                     const VoxelGrid* grid, const PlanOptions& opts = {});

// Joint-space linear interpolation from `from` to `to`, subdivided so no joint
// moves more than max_joint_jump per sample. Includes both ends.
std::vector<JointVector> joint_interpolate(const JointVector& from, const JointVector& to,
                                           double max_joint_jump);

struct MimicOptions {
  IkOptions first_ik = {};                // full restarts for the initial sample
  IkOptions track_ik = {.restarts = 0};   // seeded tracking afterwards
  GripperOptions gripper = {};
  std::stop_token stop;
};

// Per-sample IK target = sample.frame * offset. Failures carry the previous q
// forward and are marked unreachable. Throws AllSamplesUnreachable.
Trajectory mimic_hand(const KinematicChain& chain, const HandTrack& track, const RigidTransform& offset,
                      const VoxelGrid* grid, const MimicOptions& opts = {});

struct KeyframeOptions {
  double vel_eps = 0.01;  // rad/s
  int min_gap = 5;        // samples
};

// Keyframe rule: gripper change, or the first sample of a stationary run
// (every joint speed < vel_eps by central differences) at least min_gap
// samples after the previous keyframe. First and last samples always.
std::vector<std::size_t> extract_keyframe_indices(const Trajectory& traj, const KeyframeOptions& opts = {});
std::vector<KeyFrame> extract_keyframes(const KinematicChain& chain, const Trajectory& traj,
                                        const KeyframeOptions& opts = {});
KeyFrame keyframe_at(const KinematicChain& chain, const Trajectory& traj, std::size_t index);

// Appends `segment`. A non-empty trajectory must end where the segment starts
// (same time and q); that shared sample is kept once. Throws InvalidState.
void append_segment(Trajectory& traj, const Trajectory& segment);

enum class SessionState { kCreated, kSceneLoaded, kAnchored, kCollecting, kFinalized };
std::string_view state_name(SessionState s);

// Static scene a session works against.
struct SceneModel {
  std::string ref;
  PointCloud cloud;
  std::optional<Plane> plane;
  VoxelGrid grid;  // occupancy in world coordinates
};

// Pending result of a mode-specific input; applied with DemoSession::commit.
struct Proposal {
  std::optional<KeyPoint> keypoint;
  Trajectory segment;       // times continue the session trajectory
  std::size_t arrival = 0;  // segment sample where the keypoint is reached
};

// Single-writer demonstration builder. Not thread-safe; the service layer
// serialises access.
class DemoSession {
 public:
  DemoSession(KinematicChain chain, SceneModel scene, KeyframeOptions keyframe_opts = {});

  SessionState state() const { return state_; }
  std::optional<Mode> mode() const { return mode_; }
  const KinematicChain& chain() const { return chain_; }
  const SceneModel& scene() const { return scene_; }
  const JointState& current() const { return current_; }
  GripperState gripper() const { return gripper_; }
  const Trajectory& trajectory() const { return trajectory_; }
  const std::vector<KeyPoint>& keypoints() const { return keypoints_; }
  const std::vector<std::size_t>& arrivals() const { return arrivals_; }
  std::size_t segment_count() const { return segments_; }

  // Places the base at the plane projection of `point`, z along the normal.
  // Allowed until collecting starts. Throws NoPlane, PointOffPlane,
  // InvalidState.
  const RigidTransform& anchor(const Vec3& point, double max_distance = 0.05,
                               const Vec3& heading = Vec3::UnitX());
  // Enters (or stays in) collecting. Throws InvalidState before anchoring.
  void set_mode(Mode m);

  // Throws WrongMode, UnreachableKeypoint, PlanningFailed, Cancelled.
  Proposal propose_point(const Vec3& point, GripperState gripper, double dwell = 0.0,
                         std::stop_token stop = {}) const;
  Proposal propose_pose(const RigidTransform& tcp, GripperState gripper, double dwell = 0.0,
                        std::stop_token stop = {}) const;
  // Kinesthetic: joint-space approach from current q to the first mimic
  // sample, then the mimic trajectory.
  Proposal propose_mimic(const HandTrack& track, const RigidTransform& offset = {},
                         std::stop_token stop = {}) const;

  // Throws InvalidState if the proposal no longer continues the trajectory.
  void commit(const Proposal& p);

  // Throws EmptySession (no segments) or InvalidArgument (empty goal). Once
  // finalized, later calls return the stored record.
  const Demonstration& finalize(const std::string& language_goal);
  const std::optional<Demonstration>& demonstration() const { return demo_; }

 private:
  void require_collecting(Mode m) const;
  Proposal plan_to(const KeyPoint& kp, std::stop_token stop) const;
  double next_time() const;

  KinematicChain chain_;
  SceneModel scene_;
  KeyframeOptions keyframe_opts_;
  SessionState state_ = SessionState::kSceneLoaded;
  std::optional<Mode> mode_;
  JointState current_;
  GripperState gripper_ = GripperState::kOpen;
  Trajectory trajectory_;
  std::vector<KeyPoint> keypoints_;
  std::vector<std::size_t> arrivals_;
  std::size_t segments_ = 0;
  std::optional<Demonstration> demo_;
};

}  // namespace demoforge

#endif  // DEMOFORGE_DEMO_HPP_
