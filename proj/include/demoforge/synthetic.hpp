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

#ifndef DEMOFORGE_SYNTHETIC_HPP_
#define DEMOFORGE_SYNTHETIC_HPP_

// Analytic tabletop scenes with a scripted hand, written as session archives.
// The hand follows the TCP of a known joint path so pipeline output can be
// checked against the path that generated it.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "demoforge/archive.hpp"
#include "demoforge/demo.hpp"
#include "demoforge/geom.hpp"
#include "demoforge/kinematics.hpp"

namespace demoforge {

struct SyntheticOptions {
  int width = 320;
  int height = 240;
  double rate = 30.0;
  // Phase lengths in frames. Gripper changes happen `gripper_delay` frames
  // into the second and third holds.
  int hold = 12;
  int move = 30;
  int grasp_hold = 14;
  int gripper_delay = 6;
  double open_aperture = 0.08;
  double closed_aperture = 0.015;
  bool masks = true;
  bool plate = true;
  std::string language_goal = "put the red block on the blue pad";
};

struct SyntheticBox {
  Vec3 min;
  Vec3 max;
  Rgb8 color;
};

struct SyntheticScene {
  CameraIntrinsics intrinsics;
  RigidTransform camera_pose;  // camera-to-world
  std::vector<SyntheticBox> boxes;
  double max_range = 3.0;  // beyond this the sensor reports a hole
};

SyntheticScene tabletop_scene(int width, int height);

// Static scene render: RGB8 plus depth (NaN for holes).
struct SceneRender {
  std::vector<std::uint8_t> color;
  std::vector<float> depth;
};
SceneRender render_scene(const SyntheticScene& scene);

// Hand landmarks in the palm frame for a given thumb-index aperture; the
// estimated hand frame of these points is the identity.
std::array<Vec3, kHandLandmarks> hand_template(double aperture);

struct SyntheticPlan {
  std::vector<JointVector> path;       // one per frame
  std::vector<GripperState> gripper;   // commanded state per frame
  std::vector<double> aperture;        // hand aperture per frame
  std::vector<std::size_t> gripper_changes;
  // [first, last] frame ranges where the path is at rest.
  std::vector<std::array<std::size_t, 2>> holds;
};

// Joint path through fixed pick/place waypoints. Deterministic.
SyntheticPlan plan_synthetic(const KinematicChain& chain, const SyntheticOptions& opts = {});

// Writes the archive at `root` and returns the plan it was generated from.
// The plan is also stored under the manifest's "extra" field.
SyntheticPlan write_synthetic_session(const std::filesystem::path& root, const KinematicChain& chain,
                                      const SyntheticOptions& opts = {});

}  // namespace demoforge

#endif  // DEMOFORGE_SYNTHETIC_HPP_
