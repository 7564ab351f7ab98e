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

#ifndef DEMOFORGE_PIPELINE_HPP_
#define DEMOFORGE_PIPELINE_HPP_

// Batch kinesthetic pipeline over a session archive:
// lift -> hand frame -> smooth -> mimic -> keyframes -> export.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "demoforge/archive.hpp"
#include "demoforge/demo.hpp"
#include "demoforge/export.hpp"
#include "demoforge/handtrack.hpp"
#include "demoforge/kinematics.hpp"

namespace demoforge {

struct ProcessOptions {
  LiftOptions lift;  // frame_period is taken from the archive rate
  bool smooth = true;
  SmoothOptions smoothing;
  MimicOptions mimic;
  KeyframeOptions keyframes;
  RigidTransform hand_offset;               // TCP = hand frame * offset
  std::optional<RigidTransform> base_pose;  // overrides the archive's robot_base
  double collision_resolution = 0.01;       // voxel size for collision flags
  bool peract = true;
  bool imagebc = true;
  PerActOptions peract_opts;
  ImageBcOptions imagebc_opts;
  unsigned threads = 1;
};

// One hand sample per keypoint record. Records whose lift or frame estimate
// fails become invalid samples; they are counted, not thrown.
struct TrackStats {
  std::size_t records = 0;
  std::size_t invalid = 0;
};

HandTrack lift_track(std::span<const FrameKeypoints> keypoints, std::span<const RgbdFrame> frames,
                     const LiftOptions& opts, unsigned threads = 1, TrackStats* stats = nullptr);

// Robot chain placed at the effective base for this archive.
KinematicChain chain_for_session(const KinematicChain& chain, const SessionManifest& m,
                                 const std::optional<RigidTransform>& base_override);

// Occupancy of the first frame with hand pixels removed, over the default
// workspace of the chain.
VoxelGrid collision_grid(const KinematicChain& chain, const SceneFrame& frame, double resolution);

struct ProcessResult {
  Demonstration demo;
  HandTrack track;  // after smoothing
  TrackStats stats;
  std::vector<PerActSample> peract;
  std::vector<ImageBcSample> imagebc;
};

ProcessResult process_session(const SessionArchive& archive, const KinematicChain& chain,
                              const ProcessOptions& opts = {});

struct BenchOptions {
  unsigned threads = 0;  // parallel run; 0 = hardware concurrency
  int repeats = 3;       // best of
  ProcessOptions process;
};

struct BenchReport {
  std::size_t frames = 0;
  int width = 0;
  int height = 0;
  double single_seconds = 0.0;
  double parallel_seconds = 0.0;
  unsigned threads = 1;
  std::size_t reachable = 0;
  std::uint32_t output_crc = 0;  // over the joint trajectory; timing-free

  double single_fps() const { return frames / single_seconds; }
  double parallel_fps() const { return frames / parallel_seconds; }
  Json to_json() const;
};

// Frames are decoded before timing; the timed part is lift, smoothing and IK.
BenchReport bench_session(const SessionArchive& archive, const KinematicChain& chain, const BenchOptions& opts = {});

}  // namespace demoforge

#endif  // DEMOFORGE_PIPELINE_HPP_
