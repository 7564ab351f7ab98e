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

#include "demoforge/demo.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "demoforge/error.hpp"

namespace demoforge {

std::string_view mode_name(Mode m) {
  switch (m) {
    case Mode::kPointing: return "pointing";
    case Mode::kGui: return "gui";
    case Mode::kKinesthetic: return "kinesthetic";
  }
  return "?";
}

Mode parse_mode(std::string_view name) {
  if (name == "pointing") return Mode::kPointing;
  if (name == "gui") return Mode::kGui;
  if (name == "kinesthetic") return Mode::kKinesthetic;
  throw Error(ErrorCode::kInvalidArgument, "unknown mode '" + std::string(name) + "'");
}

std::string_view gripper_name(GripperState g) { return g == GripperState::kOpen ? "open" : "closed"; }

GripperState parse_gripper(std::string_view name) {
  if (name == "open") return GripperState::kOpen;
  if (name == "closed") return GripperState::kClosed;
  throw Error(ErrorCode::kInvalidArgument, "unknown gripper state '" + std::string(name) + "'");
}

std::string_view state_name(SessionState s) {
  switch (s) {
    case SessionState::kCreated: return "created";
    case SessionState::kSceneLoaded: return "scene_loaded";
    case SessionState::kAnchored: return "anchored";
    case SessionState::kCollecting: return "collecting";
    case SessionState::kFinalized: return "finalized";
  }
  return "?";
}

void Trajectory::validate(const KinematicChain* chain) const {
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (i > 0 && !(samples[i].t > samples[i - 1].t)) {
      throw Error(ErrorCode::kInvalidArgument, "trajectory timestamps not strictly increasing at " + std::to_string(i));
    }
    if (chain && !within_limits(*chain, samples[i].q.angles)) {
      throw Error(ErrorCode::kJointLimitViolation, "trajectory sample " + std::to_string(i) + " outside joint limits");
    }
  }
}

std::size_t Trajectory::collision_count() const {
  return static_cast<std::size_t>(
      std::count_if(samples.begin(), samples.end(), [](const TrajectorySample& s) { return s.collision; }));
}

double aperture_for(const KinematicChain& chain, GripperState g) {
  return g == GripperState::kOpen ? chain.max_aperture() : 0.0;
}

Eigen::Quaterniond top_down_orientation(const Vec3& plane_normal, const Vec3& heading) {
  const Vec3 n = plane_normal.normalized();
  Vec3 x = heading - heading.dot(n) * n;
  if (x.norm() < 1e-9) {
    // Heading parallel to the normal: any in-plane direction will do.
    x = n.unitOrthogonal();
  }
  x.normalize();
  const Vec3 z = -n;
  const Vec3 y = z.cross(x);
  Mat3 r;
  r.col(0) = x;
  r.col(1) = y;
  r.col(2) = z;
  return Eigen::Quaterniond(r).normalized();
}

KeyPoint make_keypoint(const KinematicChain& chain, const JointState& current, const RigidTransform& target,
                       GripperState gripper, double dwell, const IkOptions& ik) {
  if (!(dwell >= 0.0) || !std::isfinite(dwell)) throw Error(ErrorCode::kInvalidArgument, "dwell must be >= 0");
  const IkResult r = solve_ik(chain, target, current, ik);
  if (!r.converged) {
    throw Error(ErrorCode::kUnreachableKeypoint,
                "no IK solution within tolerance (residual " + std::to_string(r.position_error) + " m, " +
                    std::to_string(r.rotation_error) + " rad)");
  }
  KeyPoint kp;
  kp.target = target;
  kp.gripper_command = gripper;
  kp.solved_q = r.q;
  kp.solved_q.gripper_aperture = aperture_for(chain, gripper);
  kp.dwell = dwell;
  return kp;
}

KeyPoint make_keypoint(const KinematicChain& chain, const JointState& current, const Vec3& point,
                       const Vec3& plane_normal, GripperState gripper, double dwell, const IkOptions& ik) {
  const Vec3 heading = chain.base_pose().rotate(Vec3::UnitX());
  return make_keypoint(chain, current, RigidTransform(top_down_orientation(plane_normal, heading), point),
                       gripper, dwell, ik);
}

std::vector<JointVector> joint_interpolate(const JointVector& from, const JointVector& to, double max_joint_jump) {
  if (!(max_joint_jump > 0.0)) throw Error(ErrorCode::kInvalidArgument, "max_joint_jump must be > 0");
  const double span = (to - from).cwiseAbs().maxCoeff();
  const int steps = std::max(1, static_cast<int>(std::ceil(span / max_joint_jump - 1e-12)));
  std::vector<JointVector> out;
  out.reserve(static_cast<std::size_t>(steps) + 1);
  for (int k = 0; k <= steps; ++k) {
    if (k == steps) {
      out.push_back(to);
    } else {
      const double s = static_cast<double>(k) / steps;
      out.push_back(from + s * (to - from));
    }
  }
  return out;
}

namespace {

void check_stop(const std::stop_token& stop) {
  if (stop.stop_requested()) throw Error(ErrorCode::kCancelled, "planning cancelled");
}

bool in_collision(const KinematicChain& chain, const JointState& q, const VoxelGrid* grid) {
  if (grid == nullptr || grid->size() == 0) return false;
  return !collide(chain, q, *grid).collision_free();
}

bool valid_config(const KinematicChain& chain, const JointState& q) {
  return q.angles.size() == chain.dof() && q.angles.allFinite() && within_limits(chain, q.angles);
}

}  // namespace

Segment plan_segment(const KinematicChain& chain, const JointState& from, const KeyPoint& to, const VoxelGrid* grid,
                     const PlanOptions& opts) {
  if (!valid_config(chain, from)) throw Error(ErrorCode::kPlanningFailed, "start configuration invalid");
  if (!valid_config(chain, to.solved_q)) throw Error(ErrorCode::kPlanningFailed, "keypoint has no valid solution");
  if (!(opts.cartesian_step > 0.0) || !(opts.rotation_step > 0.0) || !(opts.dt > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "plan steps must be > 0");
  }

  const RigidTransform start = tcp_pose(chain, from.angles);
  const RigidTransform& goal = to.target;
  const double dist = (goal.translation() - start.translation()).norm();
  const double angle = rotation_distance(start.rotation(), goal.rotation());
  const int n = std::max(static_cast<int>(std::ceil(dist / opts.cartesian_step - 1e-9)),
                         static_cast<int>(std::ceil(angle / opts.rotation_step - 1e-9)));

  // Interior Cartesian waypoints that IK tracks; failures are skipped and the
  // gap bridged in joint space below.
  std::vector<JointVector> waypoints;
  JointState seed = from;
  for (int k = 1; k < n; ++k) {
    check_stop(opts.stop);
    const double s = static_cast<double>(k) / n;
    const RigidTransform target(start.rotation().slerp(s, goal.rotation()),
                                start.translation() + s * (goal.translation() - start.translation()));
    const IkResult r = solve_ik(chain, target, seed, opts.ik);
    if (r.converged) {
      waypoints.push_back(r.q.angles);
      seed = r.q;
    }
  }
  waypoints.push_back(to.solved_q.angles);

  std::vector<JointVector> path{from.angles};
  for (const JointVector& w : waypoints) {
    const JointVector& last = path.back();
    if (w == last) continue;
    if ((w - last).cwiseAbs().maxCoeff() <= opts.max_joint_jump) {
      path.push_back(w);
    } else {
      const auto bridge = joint_interpolate(last, w, opts.max_joint_jump);
      path.insert(path.end(), bridge.begin() + 1, bridge.end());
    }
  }

  const std::size_t arrival = path.size() - 1;
  const int hold = static_cast<int>(std::ceil(to.dwell / opts.dt - 1e-9));
  for (int i = 0; i < hold; ++i) path.push_back(to.solved_q.angles);

  Segment seg;
  seg.arrival = arrival;
  seg.trajectory.samples.reserve(path.size());
  for (std::size_t i = 0; i < path.size(); ++i) {
    check_stop(opts.stop);
    TrajectorySample sample;
    sample.t = opts.t0 + static_cast<double>(i) * opts.dt;
    sample.gripper = i >= arrival ? to.gripper_command : opts.start_gripper;
    sample.q.angles = path[i];
    sample.q.gripper_aperture = aperture_for(chain, sample.gripper);
    sample.collision = in_collision(chain, sample.q, grid);
    seg.trajectory.samples.push_back(std::move(sample));
  }
  return seg;
}

Trajectory mimic_hand(const KinematicChain& chain, const HandTrack& track, const RigidTransform& offset,
                      const VoxelGrid* grid, const MimicOptions& opts) {
  if (track.samples.empty()) throw Error(ErrorCode::kInvalidArgument, "empty hand track");
  track.validate();
  std::vector<double> apertures;
  apertures.reserve(track.samples.size());
  for (const HandPose6D& s : track.samples) apertures.push_back(s.aperture);
  const std::vector<GripperState> grip = gripper_state(apertures, opts.gripper);

  Trajectory out;
  out.samples.reserve(track.samples.size());
  JointState prev = chain.home();
  bool have = false;
  for (std::size_t i = 0; i < track.samples.size(); ++i) {
    check_stop(opts.stop);
    const HandPose6D& s = track.samples[i];
    TrajectorySample sample;
    sample.t = s.timestamp;
    sample.gripper = grip[i];
    bool ok = false;
    if (s.valid) {
      const RigidTransform target = s.frame * offset;
      IkResult r = solve_ik(chain, target, prev, have ? opts.track_ik : opts.first_ik);
      if (!r.converged && have) r = solve_ik(chain, target, prev, opts.first_ik);
      if (r.converged) {
        prev = r.q;
        have = true;
        ok = true;
      }
    }
    sample.q = prev;
    sample.q.gripper_aperture = aperture_for(chain, sample.gripper);
    sample.reachable = ok;
    sample.collision = in_collision(chain, sample.q, grid);
    out.samples.push_back(std::move(sample));
  }
  if (!have) throw Error(ErrorCode::kAllSamplesUnreachable, "no hand sample is reachable");
  // Samples before the first solution carry the first solution back instead
  // of the home pose, so the trajectory does not start with a jump.
  for (TrajectorySample& s : out.samples) {
    if (s.reachable) break;
    s.q.angles = prev.angles;
  }
  return out;
}

std::vector<std::size_t> extract_keyframe_indices(const Trajectory& traj, const KeyframeOptions& opts) {
  const auto& s = traj.samples;
  const std::size_t n = s.size();
  if (n == 0) throw Error(ErrorCode::kInvalidArgument, "empty trajectory");
  std::vector<bool> stationary(n, true);
  if (n > 1) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t a = i == 0 ? 0 : i - 1;
      const std::size_t b = i + 1 == n ? n - 1 : i + 1;
      const double dt = s[b].t - s[a].t;
      const JointVector v = (s[b].q.angles - s[a].q.angles) / dt;
      stationary[i] = v.cwiseAbs().maxCoeff() < opts.vel_eps;
    }
  }
  std::vector<std::size_t> out{0};
  std::size_t last = 0;
  bool consumed = stationary[0];
  for (std::size_t i = 1; i < n; ++i) {
    if (!stationary[i]) consumed = false;
    bool key = i + 1 == n;
    if (s[i].gripper != s[i - 1].gripper) {
      key = true;
    } else if (stationary[i] && !consumed && i - last >= static_cast<std::size_t>(opts.min_gap)) {
      key = true;
    }
    if (key) {
      out.push_back(i);
      last = i;
      if (stationary[i]) consumed = true;
    }
  }
  return out;
}

KeyFrame keyframe_at(const KinematicChain& chain, const Trajectory& traj, std::size_t index) {
  const TrajectorySample& s = traj.samples.at(index);
  KeyFrame k;
  k.index = index;
  k.t = s.t;
  k.tcp = tcp_pose(chain, s.q.angles);
  k.gripper = s.gripper;
  k.q = s.q;
  return k;
}

std::vector<KeyFrame> extract_keyframes(const KinematicChain& chain, const Trajectory& traj,
                                        const KeyframeOptions& opts) {
  std::vector<KeyFrame> out;
  for (std::size_t i : extract_keyframe_indices(traj, opts)) out.push_back(keyframe_at(chain, traj, i));
  return out;
}

void append_segment(Trajectory& traj, const Trajectory& segment) {
  if (segment.empty()) return;
  if (traj.empty()) {
    traj.samples = segment.samples;
    return;
  }
  const TrajectorySample& last = traj.samples.back();
  const TrajectorySample& first = segment.samples.front();
  if (first.t != last.t || first.q.angles != last.q.angles) {
    throw Error(ErrorCode::kInvalidState, "segment does not continue the trajectory");
  }
  traj.samples.insert(traj.samples.end(), segment.samples.begin() + 1, segment.samples.end());
}

DemoSession::DemoSession(KinematicChain chain, SceneModel scene, KeyframeOptions keyframe_opts)
    : chain_(std::move(chain)), scene_(std::move(scene)), keyframe_opts_(keyframe_opts) {
  current_ = chain_.home();
  current_.gripper_aperture = aperture_for(chain_, gripper_);
}

const RigidTransform& DemoSession::anchor(const Vec3& point, double max_distance, const Vec3& heading) {
  if (state_ != SessionState::kSceneLoaded && state_ != SessionState::kAnchored) {
    throw Error(ErrorCode::kInvalidState, "anchor is only allowed before collecting starts");
  }
  if (!scene_.plane) throw Error(ErrorCode::kNoPlane, "scene has no support plane");
  const Plane& plane = *scene_.plane;
  const double d = std::abs(plane.signed_distance(point));
  if (!(d <= max_distance)) {
    throw Error(ErrorCode::kPointOffPlane, "point is " + std::to_string(d) + " m from the plane");
  }
  // Base frame: z along the normal, x along the heading projected on the plane.
  const Vec3 z = plane.normal;
  Vec3 x = heading - heading.dot(z) * z;
  if (x.norm() < 1e-9) x = z.unitOrthogonal();
  x.normalize();
  Mat3 r;
  r.col(0) = x;
  r.col(1) = z.cross(x);
  r.col(2) = z;
  chain_ = chain_.with_base(RigidTransform::from_rotation(r, plane.project(point)));
  current_ = chain_.home();
  current_.gripper_aperture = aperture_for(chain_, gripper_);
  state_ = SessionState::kAnchored;
  return chain_.base_pose();
}

void DemoSession::set_mode(Mode m) {
  if (state_ != SessionState::kAnchored && state_ != SessionState::kCollecting) {
    throw Error(ErrorCode::kInvalidState,
                "mode can only be set after anchoring (state " + std::string(state_name(state_)) + ")");
  }
  mode_ = m;
  state_ = SessionState::kCollecting;
}

void DemoSession::require_collecting(Mode m) const {
  if (state_ != SessionState::kCollecting) {
    throw Error(ErrorCode::kInvalidState, "session is " + std::string(state_name(state_)) + ", not collecting");
  }
  if (mode_ != m) {
    throw Error(ErrorCode::kWrongMode, "input requires mode " + std::string(mode_name(m)) + ", session is in " +
                                           std::string(mode_name(*mode_)));
  }
}

double DemoSession::next_time() const { return trajectory_.empty() ? 0.0 : trajectory_.samples.back().t; }

Proposal DemoSession::plan_to(const KeyPoint& kp, std::stop_token stop) const {
  PlanOptions opts;
  opts.t0 = next_time();
  opts.start_gripper = gripper_;
  opts.stop = std::move(stop);
  Segment seg = plan_segment(chain_, current_, kp, &scene_.grid, opts);
  Proposal p;
  p.keypoint = kp;
  p.segment = std::move(seg.trajectory);
  p.arrival = seg.arrival;
  return p;
}

Proposal DemoSession::propose_point(const Vec3& point, GripperState gripper, double dwell,
                                    std::stop_token stop) const {
  require_collecting(Mode::kPointing);
  const KeyPoint kp = make_keypoint(chain_, current_, point, scene_.plane->normal, gripper, dwell);
  return plan_to(kp, std::move(stop));
}

Proposal DemoSession::propose_pose(const RigidTransform& tcp, GripperState gripper, double dwell,
                                   std::stop_token stop) const {
  require_collecting(Mode::kGui);
  return plan_to(make_keypoint(chain_, current_, tcp, gripper, dwell), std::move(stop));
}

Proposal DemoSession::propose_mimic(const HandTrack& track, const RigidTransform& offset,
                                    std::stop_token stop) const {
  require_collecting(Mode::kKinesthetic);
  MimicOptions mo;
  mo.stop = stop;
  Trajectory mimic = mimic_hand(chain_, track, offset, &scene_.grid, mo);

  const double dt = 1.0 / 30.0;
  const double t0 = next_time();
  Proposal p;
  std::size_t k = 0;
  for (const JointVector& q : joint_interpolate(current_.angles, mimic.samples.front().q.angles, 0.2)) {
    if (stop.stop_requested()) throw Error(ErrorCode::kCancelled, "planning cancelled");
    TrajectorySample s;
    s.t = t0 + static_cast<double>(k++) * dt;
    s.q.angles = q;
    s.gripper = gripper_;
    s.q.gripper_aperture = aperture_for(chain_, gripper_);
    s.collision = in_collision(chain_, s.q, &scene_.grid);
    p.segment.samples.push_back(std::move(s));
  }
  // The approach ends on the first mimic configuration; mimic times follow.
  const double shift = p.segment.samples.back().t - mimic.samples.front().t;
  p.segment.samples.pop_back();
  for (TrajectorySample& s : mimic.samples) {
    s.t += shift;
    p.segment.samples.push_back(std::move(s));
  }
  p.arrival = p.segment.samples.size() - 1;
  return p;
}

void DemoSession::commit(const Proposal& p) {
  if (state_ != SessionState::kCollecting) {
    throw Error(ErrorCode::kInvalidState, "session is " + std::string(state_name(state_)) + ", not collecting");
  }
  if (p.segment.empty() || p.arrival >= p.segment.size()) {
    throw Error(ErrorCode::kInvalidArgument, "empty proposal");
  }
  if (p.segment.samples.front().q.angles != current_.angles) {
    throw Error(ErrorCode::kInvalidState, "proposal does not start at the current configuration");
  }
  const std::size_t base = trajectory_.empty() ? 0 : trajectory_.size() - 1;
  append_segment(trajectory_, p.segment);
  if (p.keypoint) {
    keypoints_.push_back(*p.keypoint);
    arrivals_.push_back(base + p.arrival);
  }
  current_ = trajectory_.samples.back().q;
  gripper_ = trajectory_.samples.back().gripper;
  ++segments_;
}

const Demonstration& DemoSession::finalize(const std::string& language_goal) {
  if (demo_) return *demo_;
  if (segments_ == 0) throw Error(ErrorCode::kEmptySession, "no accepted segments");
  if (language_goal.empty()) throw Error(ErrorCode::kInvalidArgument, "language goal is required");
  Demonstration d;
  d.language_goal = language_goal;
  d.scene_ref = scene_.ref;
  d.mode = mode_.value_or(Mode::kPointing);
  d.base_pose = chain_.base_pose();
  d.keypoints = keypoints_;
  d.trajectory = trajectory_;
  std::set<std::size_t> idx(arrivals_.begin(), arrivals_.end());
  for (std::size_t i : extract_keyframe_indices(trajectory_, keyframe_opts_)) idx.insert(i);
  for (std::size_t i : idx) d.keyframes.push_back(keyframe_at(chain_, trajectory_, i));
  demo_ = std::move(d);
  state_ = SessionState::kFinalized;
  return *demo_;
}

}  // namespace demoforge
