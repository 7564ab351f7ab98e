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

#ifndef DEMOFORGE_KINEMATICS_HPP_
#define DEMOFORGE_KINEMATICS_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "demoforge/geom.hpp"

namespace demoforge {

inline constexpr int kMaxJoints = 8;
inline constexpr int kMaxLinks = 16;

using JointVector = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxJoints, 1>;
using Jacobian = Eigen::Matrix<double, 6, Eigen::Dynamic, Eigen::ColMajor, 6, kMaxJoints>;

enum class JointType { kRevolute, kFixed };

struct CollisionSphere {
  Vec3 center;  // link frame
  double radius = 0.0;
};

struct Link {
  std::string name;
  JointType joint_type = JointType::kRevolute;
  RigidTransform joint_origin;  // parent link frame -> joint frame at q = 0
  Vec3 joint_axis = Vec3::UnitZ();
  double lower_limit = 0.0;
  double upper_limit = 0.0;
  std::vector<CollisionSphere> collision_spheres;
};

struct JointState {
  JointVector angles;
  double gripper_aperture = 0.0;

  friend bool operator==(const JointState& a, const JointState& b) {
    return a.angles.size() == b.angles.size() && a.angles == b.angles &&
           a.gripper_aperture == b.gripper_aperture;
  }
};

// Serial chain of links, immutable after construction. One revolute joint
// contributes one entry to JointState::angles; fixed joints contribute none.
class KinematicChain {
 public:
  KinematicChain(std::string name, std::vector<Link> links, RigidTransform flange_to_tcp,
                 RigidTransform base_pose, double max_aperture, JointVector home);

  // Kinematic description file (docs/chain_format.md). Throws ChainFormat.
  static KinematicChain from_json(std::string_view text);
  static KinematicChain load(const std::filesystem::path& path);

  const std::string& name() const { return name_; }
  std::span<const Link> links() const { return links_; }
  int dof() const { return dof_; }
  const RigidTransform& flange_to_tcp() const { return flange_to_tcp_; }
  const RigidTransform& base_pose() const { return base_pose_; }
  double max_aperture() const { return max_aperture_; }
  const JointVector& lower() const { return lower_; }
  const JointVector& upper() const { return upper_; }
  JointState home() const;
  // Upper bound on the TCP distance from the base origin.
  double reach() const { return reach_; }
  // Index into JointState::angles for link i, or -1 for a fixed joint.
  int joint_index(std::size_t link) const { return joint_index_[link]; }

  KinematicChain with_base(const RigidTransform& base_pose) const;

 private:
  std::string name_;
  std::vector<Link> links_;
  std::vector<int> joint_index_;
  RigidTransform flange_to_tcp_;
  RigidTransform base_pose_;
  double max_aperture_;
  JointVector home_;
  JointVector lower_;
  JointVector upper_;
  int dof_ = 0;
  double reach_ = 0.0;
};

enum class LimitCheck { kEnforce, kIgnore };

struct FkResult {
  std::vector<RigidTransform> link_poses;  // world pose of each link frame
  RigidTransform tcp;
};

// Throws JointLimitViolation (kEnforce only) or InvalidArgument on a size
// mismatch.
FkResult forward_kinematics(const KinematicChain& chain, const JointState& q,
                            LimitCheck check = LimitCheck::kEnforce);
RigidTransform tcp_pose(const KinematicChain& chain, const JointVector& angles,
                        LimitCheck check = LimitCheck::kEnforce);

// 6 x dof geometric Jacobian in the world frame about the TCP; linear rows on
// top, angular rows below.
Jacobian jacobian(const KinematicChain& chain, const JointVector& angles,
                  LimitCheck check = LimitCheck::kEnforce);

// Signed distance (rad) of every joint to its nearest limit; negative means
// the joint is outside its range.
JointVector check_limits(const KinematicChain& chain, const JointVector& angles);
bool within_limits(const KinematicChain& chain, const JointVector& angles);

struct IkOptions {
  double pos_tol = 1e-4;
  double rot_tol = 1e-3;
  int max_iters = 200;
  double damping = 0.05;
  // Largest joint update per iteration (rad); longer steps are scaled down.
  double max_step = 0.4;
  // Additional attempts from pseudo-random in-limit seeds when the first
  // attempt stalls. Every attempt gets max_iters iterations.
  int restarts = 20;
  std::uint64_t restart_seed = 0x5eed;
};

struct IkResult {
  JointState q;
  bool converged = false;
  int iterations = 0;  // total over all attempts
  int attempts = 0;
  double position_error = 0.0;
  double rotation_error = 0.0;
};

// Damped least squares: dq = J^T (J J^T + damping^2 I)^-1 e, clamped to the
// joint limits each iteration. Never throws for unreachable targets; the
// result reports convergence. The seed's gripper aperture is carried over.
IkResult solve_ik(const KinematicChain& chain, const RigidTransform& target,
                  const JointState& seed, const IkOptions& opts = {});

// As solve_ik but throws Unreachable when it does not converge.
JointState inverse_kinematics(const KinematicChain& chain, const RigidTransform& target,
                              const JointState& seed, const IkOptions& opts = {});

}  // namespace demoforge

#endif  // DEMOFORGE_KINEMATICS_HPP_
