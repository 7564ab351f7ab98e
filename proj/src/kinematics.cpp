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

#include "demoforge/kinematics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <Eigen/Cholesky>
#include "json.hpp"

#include "demoforge/error.hpp"

namespace demoforge {
namespace {

using json = nlohmann::json;

void require_size(const KinematicChain& chain, const JointVector& angles) {
  if (angles.size() != chain.dof()) {
    throw Error(ErrorCode::kInvalidArgument,
                "expected " + std::to_string(chain.dof()) + " joint angles, got " +
                    std::to_string(angles.size()));
  }
}

void enforce_limits(const KinematicChain& chain, const JointVector& angles, LimitCheck check) {
  require_size(chain, angles);
  if (check == LimitCheck::kIgnore) return;
  for (int j = 0; j < chain.dof(); ++j) {
    if (!(angles[j] >= chain.lower()[j] && angles[j] <= chain.upper()[j])) {
      throw Error(ErrorCode::kJointLimitViolation,
                  "joint " + std::to_string(j) + " = " + std::to_string(angles[j]));
    }
  }
}

// World pose of every link frame. Returns the flange pose (last link).
RigidTransform link_frames(const KinematicChain& chain, const JointVector& angles,
                           std::array<RigidTransform, kMaxLinks>& frames) {
  RigidTransform pose = chain.base_pose();
  const auto links = chain.links();
  for (std::size_t i = 0; i < links.size(); ++i) {
    const Link& link = links[i];
    pose = pose * link.joint_origin;
    const int j = chain.joint_index(i);
    if (j >= 0) pose = pose * RigidTransform::from_axis_angle(link.joint_axis, angles[j]);
    frames[i] = pose;
  }
  return pose;
}

Vec3 read_vec3(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) {
    throw Error(ErrorCode::kChainFormat, std::string(what) + " must be a 3-element array");
  }
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

RigidTransform read_transform(const json& j, const char* what) {
  if (!j.is_object()) throw Error(ErrorCode::kChainFormat, std::string(what) + " must be an object");
  Vec3 t = Vec3::Zero();
  Eigen::Quaterniond q = Eigen::Quaterniond::Identity();
  for (const auto& [key, value] : j.items()) {
    if (key == "translation") {
      t = read_vec3(value, what);
    } else if (key == "rotation") {
      if (!value.is_array() || value.size() != 4) {
        throw Error(ErrorCode::kChainFormat, std::string(what) + ".rotation must be [w,x,y,z]");
      }
      q = Eigen::Quaterniond(value[0].get<double>(), value[1].get<double>(),
                             value[2].get<double>(), value[3].get<double>());
      if (std::abs(q.norm() - 1.0) > 1e-6) {
        throw Error(ErrorCode::kChainFormat, std::string(what) + ".rotation is not unit length");
      }
    } else {
      throw Error(ErrorCode::kChainFormat, std::string(what) + ": unknown key '" + key + "'");
    }
  }
  return RigidTransform(q, t);
}

Link read_link(const json& j, std::size_t index) {
  const std::string where = "links[" + std::to_string(index) + "]";
  Link link;
  link.name = j.value("name", where);
  if (!j.contains("joint")) throw Error(ErrorCode::kChainFormat, where + ": missing joint");
  const json& joint = j.at("joint");
  const std::string type = joint.value("type", "");
  if (type == "revolute") {
    link.joint_type = JointType::kRevolute;
  } else if (type == "fixed") {
    link.joint_type = JointType::kFixed;
  } else {
    throw Error(ErrorCode::kChainFormat, where + ": unknown joint type '" + type + "'");
  }
  if (joint.contains("origin")) link.joint_origin = read_transform(joint.at("origin"), "origin");
  if (link.joint_type == JointType::kRevolute) {
    const Vec3 axis = read_vec3(joint.at("axis"), "axis");
    if (axis.norm() < 1e-9) throw Error(ErrorCode::kChainFormat, where + ": zero joint axis");
    link.joint_axis = axis.normalized();
    const json& limits = joint.at("limits");
    if (!limits.is_array() || limits.size() != 2) {
      throw Error(ErrorCode::kChainFormat, where + ": limits must be [lower, upper]");
    }
    link.lower_limit = limits[0].get<double>();
    link.upper_limit = limits[1].get<double>();
    if (!(link.lower_limit < link.upper_limit)) {
      throw Error(ErrorCode::kChainFormat, where + ": lower limit must be below upper limit");
    }
  }
  for (const json& s : j.value("collision_spheres", json::array())) {
    CollisionSphere sphere{read_vec3(s.at("center"), "center"), s.at("radius").get<double>()};
    if (!(sphere.radius > 0.0)) {
      throw Error(ErrorCode::kChainFormat, where + ": collision sphere radius must be positive");
    }
    link.collision_spheres.push_back(sphere);
  }
  return link;
}

}  // namespace

KinematicChain::KinematicChain(std::string name, std::vector<Link> links,
                               RigidTransform flange_to_tcp, RigidTransform base_pose,
                               double max_aperture, JointVector home)
    : name_(std::move(name)),
      links_(std::move(links)),
      flange_to_tcp_(flange_to_tcp),
      base_pose_(base_pose),
      max_aperture_(max_aperture) {
  if (links_.empty() || links_.size() > static_cast<std::size_t>(kMaxLinks)) {
    throw Error(ErrorCode::kChainFormat, "chain must have 1.." + std::to_string(kMaxLinks) + " links");
  }
  std::vector<double> lo;
  std::vector<double> hi;
  double reach = 0.0;
  for (const Link& link : links_) {
    reach += link.joint_origin.translation().norm();
    if (link.joint_type == JointType::kRevolute) {
      if (!(link.lower_limit < link.upper_limit)) {
        throw Error(ErrorCode::kChainFormat, "link '" + link.name + "': empty joint range");
      }
      joint_index_.push_back(static_cast<int>(lo.size()));
      lo.push_back(link.lower_limit);
      hi.push_back(link.upper_limit);
    } else {
      joint_index_.push_back(-1);
    }
    for (const CollisionSphere& s : link.collision_spheres) {
      if (!(s.radius > 0.0)) throw Error(ErrorCode::kChainFormat, "sphere radius must be positive");
    }
  }
  if (lo.empty() || lo.size() > static_cast<std::size_t>(kMaxJoints)) {
    throw Error(ErrorCode::kChainFormat, "chain must have 1.." + std::to_string(kMaxJoints) +
                                             " revolute joints");
  }
  if (max_aperture_ < 0.0) throw Error(ErrorCode::kChainFormat, "negative gripper aperture");
  dof_ = static_cast<int>(lo.size());
  lower_ = Eigen::Map<const Eigen::VectorXd>(lo.data(), dof_);
  upper_ = Eigen::Map<const Eigen::VectorXd>(hi.data(), dof_);
  reach_ = reach + flange_to_tcp_.translation().norm();
  if (home.size() == 0) {
    home_ = 0.5 * (lower_ + upper_);
  } else if (home.size() != dof_) {
    throw Error(ErrorCode::kChainFormat, "home configuration has the wrong size");
  } else {
    home_ = home;
  }
  for (int j = 0; j < dof_; ++j) {
    if (home_[j] < lower_[j] || home_[j] > upper_[j]) {
      throw Error(ErrorCode::kChainFormat, "home configuration violates joint limits");
    }
  }
}

KinematicChain KinematicChain::from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kChainFormat, e.what());
  }
  try {
    if (doc.value("format", "") != "demoforge.chain") {
      throw Error(ErrorCode::kChainFormat, "format must be 'demoforge.chain'");
    }
    if (doc.value("version", 0) != 1) throw Error(ErrorCode::kChainFormat, "unsupported version");
    std::vector<Link> links;
    const json& jl = doc.at("links");
    for (std::size_t i = 0; i < jl.size(); ++i) links.push_back(read_link(jl[i], i));
    RigidTransform tcp;
    if (doc.contains("flange_to_tcp")) tcp = read_transform(doc.at("flange_to_tcp"), "flange_to_tcp");
    RigidTransform base;
    if (doc.contains("base_pose")) base = read_transform(doc.at("base_pose"), "base_pose");
    JointVector home;
    if (doc.contains("home")) {
      const auto values = doc.at("home").get<std::vector<double>>();
      home = Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
    }
    return KinematicChain(doc.value("name", "chain"), std::move(links), tcp, base,
                          doc.value("max_gripper_aperture", 0.08), home);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kChainFormat, e.what());
  }
}

KinematicChain KinematicChain::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return from_json(buffer.str());
}

JointState KinematicChain::home() const { return JointState{home_, max_aperture_}; }

KinematicChain KinematicChain::with_base(const RigidTransform& base_pose) const {
  KinematicChain copy = *this;
  copy.base_pose_ = base_pose;
  return copy;
}

FkResult forward_kinematics(const KinematicChain& chain, const JointState& q, LimitCheck check) {
  enforce_limits(chain, q.angles, check);
  std::array<RigidTransform, kMaxLinks> frames;
  const RigidTransform flange = link_frames(chain, q.angles, frames);
  FkResult result;
  result.link_poses.assign(frames.begin(), frames.begin() + static_cast<long>(chain.links().size()));
  result.tcp = flange * chain.flange_to_tcp();
  return result;
}

RigidTransform tcp_pose(const KinematicChain& chain, const JointVector& angles, LimitCheck check) {
  enforce_limits(chain, angles, check);
  std::array<RigidTransform, kMaxLinks> frames;
  return link_frames(chain, angles, frames) * chain.flange_to_tcp();
}

namespace {

Jacobian jacobian_from_frames(const KinematicChain& chain,
                              const std::array<RigidTransform, kMaxLinks>& frames,
                              const Vec3& tcp_position) {
  Jacobian jac(6, chain.dof());
  const auto links = chain.links();
  for (std::size_t i = 0; i < links.size(); ++i) {
    const int j = chain.joint_index(i);
    if (j < 0) continue;
    const Vec3 axis = frames[i].rotate(links[i].joint_axis);
    jac.block<3, 1>(0, j) = axis.cross(tcp_position - frames[i].translation());
    jac.block<3, 1>(3, j) = axis;
  }
  return jac;
}

}  // namespace

Jacobian jacobian(const KinematicChain& chain, const JointVector& angles, LimitCheck check) {
  enforce_limits(chain, angles, check);
  std::array<RigidTransform, kMaxLinks> frames;
  const RigidTransform tcp = link_frames(chain, angles, frames) * chain.flange_to_tcp();
  return jacobian_from_frames(chain, frames, tcp.translation());
}

JointVector check_limits(const KinematicChain& chain, const JointVector& angles) {
  require_size(chain, angles);
  JointVector margin(chain.dof());
  for (int j = 0; j < chain.dof(); ++j) {
    margin[j] = std::min(angles[j] - chain.lower()[j], chain.upper()[j] - angles[j]);
  }
  return margin;
}

bool within_limits(const KinematicChain& chain, const JointVector& angles) {
  return angles.size() == chain.dof() && (check_limits(chain, angles).array() >= 0.0).all();
}

IkResult solve_ik(const KinematicChain& chain, const RigidTransform& target,
                  const JointState& seed, const IkOptions& opts) {
  enforce_limits(chain, seed.angles, LimitCheck::kEnforce);
  if (!(opts.damping > 0.0)) throw Error(ErrorCode::kInvalidArgument, "damping must be positive");

  IkResult result;
  result.q = seed;
  const Vec3 target_p = target.translation();
  const Mat3 target_r = target.rotation_matrix();
  if (!target_p.allFinite() || !target.rotation().coeffs().allFinite()) {
    throw Error(ErrorCode::kInvalidArgument, "non-finite IK target");
  }

  // Targets beyond the chain's reach cannot converge; skip the iterations.
  const double distance = (target_p - chain.base_pose().translation()).norm();
  const bool reachable = distance <= chain.reach();

  const int dof = chain.dof();
  const double lambda2 = opts.damping * opts.damping;
  std::mt19937_64 rng(opts.restart_seed);
  std::array<RigidTransform, kMaxLinks> frames;

  double best_cost = INFINITY;
  JointVector best = seed.angles;
  double best_pos = INFINITY;
  double best_rot = INFINITY;

  for (int attempt = 0; attempt <= opts.restarts && reachable; ++attempt) {
    JointVector q = seed.angles;
    if (attempt > 0) {
      for (int j = 0; j < dof; ++j) {
        std::uniform_real_distribution<double> dist(chain.lower()[j], chain.upper()[j]);
        q[j] = dist(rng);
      }
    }
    ++result.attempts;
    for (int iter = 0;; ++iter) {
      const RigidTransform tcp = link_frames(chain, q, frames) * chain.flange_to_tcp();
      Eigen::Matrix<double, 6, 1> err;
      err.head<3>() = target_p - tcp.translation();
      err.tail<3>() = rotation_error(target_r, tcp.rotation_matrix());
      const double pos_err = err.head<3>().norm();
      const double rot_err = err.tail<3>().norm();
      const double cost = pos_err + rot_err;
      if (cost < best_cost) {
        best_cost = cost;
        best = q;
        best_pos = pos_err;
        best_rot = rot_err;
      }
      if (pos_err <= opts.pos_tol && rot_err <= opts.rot_tol) {
        result.q.angles = q;
        result.converged = true;
        result.position_error = pos_err;
        result.rotation_error = rot_err;
        return result;
      }
      if (iter >= opts.max_iters) break;
      ++result.iterations;

      const Jacobian jac = jacobian_from_frames(chain, frames, tcp.translation());
      Eigen::Matrix<double, 6, 6> jjt = jac * jac.transpose();
      jjt.diagonal().array() += lambda2;
      JointVector dq = jac.transpose() * jjt.ldlt().solve(err);
      const double largest = dq.cwiseAbs().maxCoeff();
      if (largest > opts.max_step) dq *= opts.max_step / largest;
      q = (q + dq).cwiseMax(chain.lower()).cwiseMin(chain.upper());
    }
  }

  result.q.angles = best;
  result.position_error = best_pos;
  result.rotation_error = best_rot;
  if (!reachable) {
    result.position_error = distance - chain.reach();
    result.rotation_error = 0.0;
  }
  return result;
}

JointState inverse_kinematics(const KinematicChain& chain, const RigidTransform& target,
                              const JointState& seed, const IkOptions& opts) {
  IkResult r = solve_ik(chain, target, seed, opts);
  if (!r.converged) {
    throw Error(ErrorCode::kUnreachable,
                "residual " + std::to_string(r.position_error) + " m / " +
                    std::to_string(r.rotation_error) + " rad after " +
                    std::to_string(r.iterations) + " iterations");
  }
  return r.q;
}

}  // namespace demoforge
