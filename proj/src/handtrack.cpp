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

#include "demoforge/handtrack.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "demoforge/error.hpp"

namespace demoforge {

void HandKeypoints2D::validate() const {
  for (int i = 0; i < kHandLandmarks; ++i) {
    if (!(confidence[i] >= 0.0 && confidence[i] <= 1.0)) {
      throw Error(ErrorCode::kInvalidArgument, "confidence out of [0, 1] at landmark " + std::to_string(i));
    }
    if (!std::isfinite(points[i].u) || !std::isfinite(points[i].v)) {
      throw Error(ErrorCode::kInvalidArgument, "non-finite pixel at landmark " + std::to_string(i));
    }
  }
}

int LiftedHand::valid_count() const {
  return static_cast<int>(std::count(valid.begin(), valid.end(), true));
}

namespace {

// Median of the valid depths in the window, or NaN if there are none.
double window_median(const DepthFrame& depth, int u, int v, int radius, std::vector<float>& scratch) {
  scratch.clear();
  for (int dv = -radius; dv <= radius; ++dv) {
    const int y = v + dv;
    if (y < 0 || y >= depth.height) continue;
    for (int du = -radius; du <= radius; ++du) {
      const int x = u + du;
      if (x < 0 || x >= depth.width) continue;
      if (depth.valid(x, y)) scratch.push_back(depth.at(x, y));
    }
  }
  if (scratch.empty()) return NAN;
  const auto mid = scratch.begin() + static_cast<long>((scratch.size() - 1) / 2);
  std::nth_element(scratch.begin(), mid, scratch.end());
  return *mid;
}

}  // namespace

LiftedHand lift_keypoints(const HandKeypoints2D& kp, const RgbdFrame& frame, const LiftOptions& opts) {
  kp.validate();
  if (std::abs(kp.timestamp - frame.timestamp) > opts.frame_period + 1e-9) {
    throw Error(ErrorCode::kInvalidArgument, "keypoints and frame are more than one frame period apart");
  }
  LiftedHand out;
  out.timestamp = kp.timestamp;
  std::vector<float> scratch;
  const RigidTransform& pose = frame.camera_pose;
  for (int i = 0; i < kHandLandmarks; ++i) {
    out.valid[i] = false;
    if (kp.confidence[i] < opts.conf_min) continue;
    const Pixel px = kp.points[i];
    if (!frame.intrinsics.contains(px.u, px.v)) continue;
    const int u = std::min(frame.width() - 1, static_cast<int>(std::lround(px.u)));
    const int v = std::min(frame.height() - 1, static_cast<int>(std::lround(px.v)));
    double z = frame.depth.valid(u, v) ? frame.depth.at(u, v)
                                       : window_median(frame.depth, u, v, opts.hole_radius_px, scratch);
    if (!std::isfinite(z)) continue;
    out.points[i] = pose.apply(unproject(px, z, frame.intrinsics));
    out.valid[i] = out.points[i].allFinite();
  }
  if (out.valid_count() < 4) {
    throw Error(ErrorCode::kTooFewValidPoints,
                std::to_string(out.valid_count()) + " valid keypoints at t=" + std::to_string(kp.timestamp));
  }
  return out;
}

HandPose6D estimate_hand_frame(const LiftedHand& hand) {
  for (int required : {kWrist, kIndexMcp, kMiddleMcp, kPinkyMcp, kThumbTip, kIndexTip}) {
    if (!hand.valid[required]) {
      throw Error(ErrorCode::kTooFewValidPoints, "landmark " + std::to_string(required) + " is not valid");
    }
  }
  const Vec3& wrist = hand.points[kWrist];
  const Vec3& index_mcp = hand.points[kIndexMcp];
  const Vec3& middle_mcp = hand.points[kMiddleMcp];
  const Vec3& pinky_mcp = hand.points[kPinkyMcp];

  const Vec3 forward = middle_mcp - wrist;
  if (forward.norm() < 1e-6) throw Error(ErrorCode::kDegenerateHand, "wrist coincides with middle MCP");
  const Vec3 x = forward.normalized();
  const Vec3 across = pinky_mcp - index_mcp;
  const Vec3 normal = x.cross(across);
  if (normal.norm() < 1e-6) throw Error(ErrorCode::kDegenerateHand, "palm vectors are collinear");
  const Vec3 z = normal.normalized();
  const Vec3 y = z.cross(x);

  Mat3 r;
  r.col(0) = x;
  r.col(1) = y;
  r.col(2) = z;
  HandPose6D pose;
  pose.frame = RigidTransform::from_rotation(r, 0.25 * (wrist + index_mcp + middle_mcp + pinky_mcp));
  pose.aperture = (hand.points[kThumbTip] - hand.points[kIndexTip]).norm();
  pose.valid = true;
  pose.timestamp = hand.timestamp;
  return pose;
}

void HandTrack::validate() const {
  for (std::size_t i = 1; i < samples.size(); ++i) {
    if (!(samples[i].timestamp > samples[i - 1].timestamp)) {
      throw Error(ErrorCode::kInvalidArgument, "hand track timestamps must be strictly increasing");
    }
  }
}

std::vector<GripperState> gripper_state(std::span<const double> apertures, const GripperOptions& opts) {
  if (!(opts.open_above > opts.close_below)) {
    throw Error(ErrorCode::kInvalidArgument, "open_above must exceed close_below");
  }
  std::vector<GripperState> out;
  out.reserve(apertures.size());
  GripperState state = GripperState::kOpen;
  for (double a : apertures) {
    if (state == GripperState::kOpen && a < opts.close_below) {
      state = GripperState::kClosed;
    } else if (state == GripperState::kClosed && a > opts.open_above) {
      state = GripperState::kOpen;
    }
    out.push_back(state);
  }
  return out;
}

HandTrack smooth_track(const HandTrack& track, const SmoothOptions& opts) {
  if (track.samples.empty()) throw Error(ErrorCode::kInvalidArgument, "empty hand track");
  track.validate();
  if (!(opts.alpha > 0.0 && opts.alpha <= 1.0) ||
      !(opts.rotation_alpha > 0.0 && opts.rotation_alpha <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "smoothing factors must be in (0, 1]");
  }
  HandTrack out;
  out.nominal_rate = track.nominal_rate;
  bool initialised = false;
  Vec3 position = Vec3::Zero();
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
  double aperture = 0.0;
  int rejected = 0;
  for (const HandPose6D& s : track.samples) {
    if (!s.valid) continue;
    const Vec3& p = s.frame.translation();
    if (initialised && (p - position).norm() > opts.outlier_jump) {
      if (rejected < opts.max_consecutive_outliers) {
        ++rejected;
        continue;
      }
      initialised = false;
    }
    rejected = 0;
    if (!initialised) {
      position = p;
      rotation = s.frame.rotation();
      aperture = s.aperture;
      initialised = true;
    } else {
      position += opts.alpha * (p - position);
      aperture += opts.alpha * (s.aperture - aperture);
      rotation = rotation.slerp(opts.rotation_alpha, s.frame.rotation()).normalized();
    }
    HandPose6D smoothed = s;
    smoothed.frame = RigidTransform(rotation, position);
    smoothed.aperture = aperture;
    out.samples.push_back(smoothed);
  }
  return out;
}

}  // namespace demoforge
