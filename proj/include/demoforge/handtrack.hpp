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

#ifndef DEMOFORGE_HANDTRACK_HPP_
#define DEMOFORGE_HANDTRACK_HPP_

#include <array>
#include <span>
#include <vector>

#include "demoforge/geom.hpp"

namespace demoforge {

inline constexpr int kHandLandmarks = 21;

// Standard 21-landmark layout: wrist, then 4 joints per finger from the base
// (CMC/MCP) to the tip, thumb first.
enum HandLandmark : int {
  kWrist = 0,
  kThumbCmc = 1, kThumbMcp = 2, kThumbIp = 3, kThumbTip = 4,
  kIndexMcp = 5, kIndexPip = 6, kIndexDip = 7, kIndexTip = 8,
  kMiddleMcp = 9, kMiddlePip = 10, kMiddleDip = 11, kMiddleTip = 12,
  kRingMcp = 13, kRingPip = 14, kRingDip = 15, kRingTip = 16,
  kPinkyMcp = 17, kPinkyPip = 18, kPinkyDip = 19, kPinkyTip = 20,
};

struct HandKeypoints2D {
  std::array<Pixel, kHandLandmarks> points{};
  std::array<double, kHandLandmarks> confidence{};
  double timestamp = 0.0;

  // Throws InvalidArgument for confidences outside [0, 1] or non-finite pixels.
  void validate() const;
};

struct LiftedHand {
  std::array<Vec3, kHandLandmarks> points{};  // world frame
  std::array<bool, kHandLandmarks> valid{};
  double timestamp = 0.0;

  int valid_count() const;
};

struct LiftOptions {
  double conf_min = 0.5;
  int hole_radius_px = 5;
  // Keypoints and frame must be at most this far apart in time (s).
  double frame_period = 1.0 / 30.0;
};

// Unprojects every confident keypoint at its pixel's depth. Holes are filled
// with the median of valid depths in the (2r+1)^2 window. Throws
// TooFewValidPoints when fewer than 4 keypoints survive.
LiftedHand lift_keypoints(const HandKeypoints2D& kp, const RgbdFrame& frame,
                          const LiftOptions& opts = {});

struct HandPose6D {
  RigidTransform frame;  // palm frame, world
  double aperture = 0.0;  // thumb tip to index tip, meters
  bool valid = false;
  double timestamp = 0.0;
};

// Palm frame convention:
//   origin = centroid(wrist, index MCP, middle MCP, pinky MCP)
//   x = normalize(middle MCP - wrist)
//   z = normalize(x cross (pinky MCP - index MCP))
//   y = z cross x
// Throws TooFewValidPoints if a required landmark is missing and
// DegenerateHand if the construction vectors are (near) collinear.
HandPose6D estimate_hand_frame(const LiftedHand& hand);

struct HandTrack {
  std::vector<HandPose6D> samples;  // strictly increasing timestamps
  double nominal_rate = 30.0;       // Hz

  void validate() const;
};

enum class GripperState { kOpen, kClosed };

struct GripperOptions {
  double close_below = 0.03;
  double open_above = 0.06;
};

// Hysteresis: closes when aperture < close_below, opens when > open_above,
// starts open.
std::vector<GripperState> gripper_state(std::span<const double> apertures,
                                        const GripperOptions& opts = {});

struct SmoothOptions {
  double alpha = 0.5;           // translation and aperture EMA weight of the new sample
  double rotation_alpha = 0.5;  // slerp fraction toward the new rotation
  double outlier_jump = 0.15;   // meters from the current estimate
  // After this many consecutive rejected samples the filter re-initialises
  // on the next one instead of rejecting it.
  int max_consecutive_outliers = 3;
};

// Exponential smoothing. Invalid samples and outliers are dropped; the
// remaining samples keep their timestamps. Deterministic.
HandTrack smooth_track(const HandTrack& track, const SmoothOptions& opts = {});

}  // namespace demoforge

#endif  // DEMOFORGE_HANDTRACK_HPP_
