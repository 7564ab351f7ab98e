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

#include "demoforge/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "demoforge/error.hpp"
#include "demoforge/handtrack.hpp"

namespace demoforge {

namespace {

constexpr double kHandDiscRadius = 0.009;
constexpr std::array<int, 6> kRequiredLandmarks = {kWrist, kIndexMcp, kMiddleMcp, kPinkyMcp, kThumbTip, kIndexTip};

RigidTransform look_at(const Vec3& eye, const Vec3& target) {
  const Vec3 f = (target - eye).normalized();
  const Vec3 right = f.cross(Vec3::UnitZ()).normalized();
  const Vec3 down = f.cross(right);
  Mat3 r;
  r.col(0) = right;
  r.col(1) = down;
  r.col(2) = f;
  return RigidTransform::from_rotation(r, eye);
}

// Slab test; returns the entry distance and the hit face axis.
bool hit_box(const SyntheticBox& b, const Vec3& o, const Vec3& d, double& t, int& axis) {
  double t0 = 0.0, t1 = std::numeric_limits<double>::infinity();
  int a0 = -1;
  for (int k = 0; k < 3; ++k) {
    if (std::abs(d[k]) < 1e-15) {
      if (o[k] < b.min[k] || o[k] > b.max[k]) return false;
      continue;
    }
    double ta = (b.min[k] - o[k]) / d[k], tb = (b.max[k] - o[k]) / d[k];
    if (ta > tb) std::swap(ta, tb);
    if (ta > t0) {
      t0 = ta;
      a0 = k;
    }
    t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  if (a0 < 0) return false;  // eye inside the box
  t = t0;
  axis = a0;
  return true;
}

Rgb8 shade(Rgb8 c, double f) {
  auto s = [f](std::uint8_t v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v * f), 0L, 255L)); };
  return {s(c.r), s(c.g), s(c.b)};
}

double smoothstep(double x) { return x * x * (3.0 - 2.0 * x); }

Json plan_to_json(const SyntheticPlan& p, const SyntheticOptions& o) {
  Json path = Json::array();
  for (const JointVector& q : p.path) path.push_back(std::vector<double>(q.data(), q.data() + q.size()));
  Json holds = Json::array();
  for (const auto& h : p.holds) holds.push_back({h[0], h[1]});
  return {{"generator", "demoforge.synthetic"},
          {"options",
           {{"width", o.width},
            {"height", o.height},
            {"rate", o.rate},
            {"hold", o.hold},
            {"move", o.move},
            {"grasp_hold", o.grasp_hold},
            {"gripper_delay", o.gripper_delay},
            {"open_aperture", o.open_aperture},
            {"closed_aperture", o.closed_aperture}}},
          {"joint_path", path},
          {"gripper_changes", p.gripper_changes},
          {"holds", holds}};
}

}  // namespace

SyntheticScene tabletop_scene(int width, int height) {
  if (width < 16 || height < 12) throw Error(ErrorCode::kInvalidArgument, "synthetic image too small");
  SyntheticScene s;
  const double f = 300.0 * width / 320.0;
  s.intrinsics = {f, f, (width - 1) / 2.0, (height - 1) / 2.0, width, height};
  s.camera_pose = look_at(Vec3(1.3, 0.0, 0.6), Vec3(0.35, 0.0, 0.05));
  s.boxes = {
      {Vec3(0.475, -0.175, 0.0), Vec3(0.525, -0.125, 0.05), {200, 40, 35}},  // block
      {Vec3(0.40, 0.15, 0.0), Vec3(0.50, 0.25, 0.01), {40, 70, 190}},        // pad
      {Vec3(0.16, 0.31, 0.0), Vec3(0.24, 0.39, 0.25), {90, 150, 80}},        // tall box
  };
  return s;
}

SceneRender render_scene(const SyntheticScene& scene) {
  const CameraIntrinsics& k = scene.intrinsics;
  const std::size_t n = static_cast<std::size_t>(k.width) * k.height;
  SceneRender out;
  out.color.resize(3 * n);
  out.depth.assign(n, std::numeric_limits<float>::quiet_NaN());
  const Vec3 o = scene.camera_pose.translation();
  for (int v = 0; v < k.height; ++v) {
    for (int u = 0; u < k.width; ++u) {
      const Vec3 d = scene.camera_pose.rotate(Vec3((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0));
      double best = std::numeric_limits<double>::infinity();
      Rgb8 c{200, 210, 230};
      if (d.z() < 0.0) {
        best = -o.z() / d.z();
        const Vec3 p = o + best * d;
        const bool dark = (static_cast<long>(std::floor(p.x() / 0.05)) + static_cast<long>(std::floor(p.y() / 0.05))) & 1;
        c = dark ? Rgb8{140, 118, 92} : Rgb8{176, 152, 120};
      }
      for (const SyntheticBox& b : scene.boxes) {
        double t = 0.0;
        int axis = 0;
        if (hit_box(b, o, d, t, axis) && t < best) {
          best = t;
          c = shade(b.color, axis == 2 ? 1.0 : axis == 0 ? 0.8 : 0.65);
        }
      }
      const std::size_t i = static_cast<std::size_t>(v) * k.width + u;
      if (best <= scene.max_range) {
        out.depth[i] = static_cast<float>(best);
      } else {
        c = {200, 210, 230};
      }
      out.color[3 * i] = c.r;
      out.color[3 * i + 1] = c.g;
      out.color[3 * i + 2] = c.b;
    }
  }
  return out;
}

std::array<Vec3, kHandLandmarks> hand_template(double aperture) {
  std::array<Vec3, kHandLandmarks> p;
  p[kWrist] = Vec3(0.0, 0.0, 0.0);
  p[kIndexMcp] = Vec3(0.09, -0.025, 0.0);
  p[6] = Vec3(0.12, -0.025, 0.005);
  p[7] = Vec3(0.14, -0.025, 0.012);
  p[kIndexTip] = Vec3(0.155, -0.025, 0.02);
  p[kMiddleMcp] = Vec3(0.095, 0.0, 0.0);
  p[10] = Vec3(0.13, 0.0, 0.005);
  p[11] = Vec3(0.15, 0.0, 0.012);
  p[12] = Vec3(0.165, 0.0, 0.02);
  p[13] = Vec3(0.09, 0.02, 0.0);
  p[14] = Vec3(0.12, 0.02, 0.005);
  p[15] = Vec3(0.14, 0.02, 0.012);
  p[16] = Vec3(0.152, 0.02, 0.02);
  p[kPinkyMcp] = Vec3(0.08, 0.04, 0.0);
  p[18] = Vec3(0.1, 0.04, 0.005);
  p[19] = Vec3(0.115, 0.04, 0.012);
  p[20] = Vec3(0.125, 0.04, 0.02);
  p[kThumbTip] = p[kIndexTip] + Vec3(0.0, -aperture, 0.0);
  p[1] = Vec3(0.02, -0.03, 0.0);
  p[2] = Vec3(0.045, -0.045, 0.005);
  p[3] = 0.5 * (p[2] + p[kThumbTip]);
  const Vec3 c = 0.25 * (p[kWrist] + p[kIndexMcp] + p[kMiddleMcp] + p[kPinkyMcp]);
  for (Vec3& x : p) x -= c;
  return p;
}

SyntheticPlan plan_synthetic(const KinematicChain& chain, const SyntheticOptions& o) {
  if (o.hold < 2 || o.move < 2 || o.grasp_hold < 2 || o.gripper_delay < 1 || o.gripper_delay >= o.grasp_hold) {
    throw Error(ErrorCode::kInvalidArgument, "synthetic phase lengths out of range");
  }
  const Vec3 up = chain.base_pose().rotate(Vec3::UnitZ());
  const Eigen::Quaterniond down = top_down_orientation(up, chain.base_pose().rotate(Vec3::UnitX()));
  const std::array<Vec3, 4> waypoints = {Vec3(0.45, 0.0, 0.30), Vec3(0.50, -0.15, 0.07), Vec3(0.45, 0.20, 0.08),
                                         Vec3(0.40, 0.05, 0.30)};
  std::vector<JointVector> q;
  JointState seed = chain.home();
  for (const Vec3& w : waypoints) {
    const IkResult r = solve_ik(chain, RigidTransform(down, chain.base_pose().apply(w)), seed);
    if (!r.converged) throw Error(ErrorCode::kUnreachable, "synthetic waypoint unreachable for this chain");
    q.push_back(r.q.angles);
    seed = r.q;
  }

  SyntheticPlan p;
  auto hold = [&](const JointVector& at, int frames) {
    p.holds.push_back({p.path.size(), p.path.size() + frames - 1});
    for (int i = 0; i < frames; ++i) p.path.push_back(at);
  };
  auto move = [&](const JointVector& a, const JointVector& b) {
    for (int i = 1; i <= o.move; ++i) p.path.push_back(a + smoothstep(static_cast<double>(i) / o.move) * (b - a));
  };
  hold(q[0], o.hold);
  move(q[0], q[1]);
  const std::size_t close_at = p.path.size() + o.gripper_delay;
  hold(q[1], o.grasp_hold);
  move(q[1], q[2]);
  const std::size_t open_at = p.path.size() + o.gripper_delay;
  hold(q[2], o.grasp_hold);
  move(q[2], q[3]);
  hold(q[3], o.hold);

  p.gripper_changes = {close_at, open_at};
  for (std::size_t i = 0; i < p.path.size(); ++i) {
    const bool closed = i >= close_at && i < open_at;
    p.gripper.push_back(closed ? GripperState::kClosed : GripperState::kOpen);
    p.aperture.push_back(closed ? o.closed_aperture : o.open_aperture);
  }
  return p;
}

SyntheticPlan write_synthetic_session(const std::filesystem::path& root, const KinematicChain& chain,
                                      const SyntheticOptions& o) {
  const SyntheticPlan plan = plan_synthetic(chain, o);
  const SyntheticScene scene = tabletop_scene(o.width, o.height);
  const SceneRender base = render_scene(scene);
  const CameraIntrinsics& k = scene.intrinsics;
  const RigidTransform world_to_cam = scene.camera_pose.inverse();

  ArchiveWriter w(root, k, o.rate);
  w.set_language_goal(o.language_goal);
  w.set_robot_base(chain.base_pose());
  std::vector<FrameKeypoints> stream;
  for (std::size_t f = 0; f < plan.path.size(); ++f) {
    const double t = static_cast<double>(f) / o.rate;
    const RigidTransform tcp = tcp_pose(chain, plan.path[f]);
    const auto local = hand_template(plan.aperture[f]);

    std::vector<std::uint8_t> color = base.color;
    std::vector<float> depth = base.depth;
    std::vector<std::uint8_t> mask(depth.size(), 0);
    FrameKeypoints kp;
    kp.frame = f;
    kp.keypoints.timestamp = t;
    std::array<Vec3, kHandLandmarks> cam;
    for (int j = 0; j < kHandLandmarks; ++j) {
      cam[j] = world_to_cam.apply(tcp.apply(local[j]));
      const Pixel px = project(cam[j], k);
      if (!k.contains(px.u, px.v)) throw Error(ErrorCode::kOutOfBounds, "synthetic hand leaves the image");
      kp.keypoints.points[j] = px;
      kp.keypoints.confidence[j] = 0.95;
      const double r = k.fx * kHandDiscRadius / cam[j].z();
      const int u0 = std::max(0, static_cast<int>(std::floor(px.u - r)));
      const int u1 = std::min(k.width - 1, static_cast<int>(std::ceil(px.u + r)));
      const int v0 = std::max(0, static_cast<int>(std::floor(px.v - r)));
      const int v1 = std::min(k.height - 1, static_cast<int>(std::ceil(px.v + r)));
      const Rgb8 skin = shade({222, 170, 138}, 1.0 - 0.01 * j);
      for (int v = v0; v <= v1; ++v) {
        for (int u = u0; u <= u1; ++u) {
          if ((u - px.u) * (u - px.u) + (v - px.v) * (v - px.v) > r * r) continue;
          const std::size_t i = static_cast<std::size_t>(v) * k.width + u;
          const float z = static_cast<float>(cam[j].z());
          if (!(depth[i] <= z)) {
            depth[i] = z;
            color[3 * i] = skin.r;
            color[3 * i + 1] = skin.g;
            color[3 * i + 2] = skin.b;
            mask[i] = 1;
          }
        }
      }
    }
    // Frame-defining landmarks see their own depth.
    for (int j : kRequiredLandmarks) {
      const Pixel px = kp.keypoints.points[j];
      const long u = std::min<long>(std::lround(px.u), k.width - 1), v = std::min<long>(std::lround(px.v), k.height - 1);
      const std::size_t i = static_cast<std::size_t>(v) * k.width + u;
      depth[i] = static_cast<float>(cam[j].z());
      mask[i] = 1;
    }
    stream.push_back(kp);

    RgbdFrame frame;
    frame.intrinsics = k;
    frame.camera_pose = scene.camera_pose;
    frame.timestamp = t;
    frame.color = std::move(color);
    frame.depth = DepthFrame::from_raw(k.width, k.height, std::move(depth), t);
    w.add_frame(frame, o.masks ? std::span<const std::uint8_t>(mask) : std::span<const std::uint8_t>{}, true);
  }
  w.set_hand_keypoints(stream);
  if (o.plate) w.set_background_plate(base.color);
  w.set_extra(plan_to_json(plan, o));
  w.finish();
  return plan;
}

}  // namespace demoforge
