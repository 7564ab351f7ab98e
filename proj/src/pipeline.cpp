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

#include "demoforge/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <thread>

#include "demoforge/error.hpp"
#include "demoforge/parallel.hpp"

namespace demoforge {

namespace {

unsigned resolve_threads(unsigned t) { return t == 0 ? std::max(1u, std::thread::hardware_concurrency()) : t; }

LiftOptions lift_options_for(const SessionManifest& m, LiftOptions o) {
  o.frame_period = 1.0 / m.nominal_rate;
  return o;
}

std::vector<RgbdFrame> load_frames(const SessionArchive& archive, unsigned threads) {
  std::vector<RgbdFrame> frames(archive.size());
  parallel_for(frames.size(), threads, [&](std::size_t i) { frames[i] = archive.load(i).frame; });
  return frames;
}

Trajectory track_and_mimic(const KinematicChain& chain, std::span<const FrameKeypoints> keypoints,
                           std::span<const RgbdFrame> frames, const ProcessOptions& o, double rate,
                           unsigned threads, const VoxelGrid* grid, HandTrack* smoothed, TrackStats* stats) {
  HandTrack track = lift_track(keypoints, frames, o.lift, threads, stats);
  track.nominal_rate = rate;
  if (std::none_of(track.samples.begin(), track.samples.end(), [](const HandPose6D& s) { return s.valid; })) {
    throw Error(ErrorCode::kTooFewValidPoints, "no hand sample could be lifted");
  }
  if (o.smooth) {
    track = smooth_track(track, o.smoothing);
  } else {
    std::erase_if(track.samples, [](const HandPose6D& s) { return !s.valid; });
  }
  Trajectory traj = mimic_hand(chain, track, o.hand_offset, grid, o.mimic);
  if (smoothed) *smoothed = std::move(track);
  return traj;
}

}  // namespace

HandTrack lift_track(std::span<const FrameKeypoints> keypoints, std::span<const RgbdFrame> frames,
                     const LiftOptions& opts, unsigned threads, TrackStats* stats) {
  HandTrack track;
  track.samples.resize(keypoints.size());
  parallel_for(keypoints.size(), threads, [&](std::size_t i) {
    const FrameKeypoints& k = keypoints[i];
    HandPose6D& s = track.samples[i];
    s.timestamp = k.keypoints.timestamp;
    if (k.frame >= frames.size()) return;
    try {
      s = estimate_hand_frame(lift_keypoints(k.keypoints, frames[k.frame], opts));
    } catch (const Error& e) {
      // A hand that cannot be lifted in one frame is a gap, not a failure.
      switch (e.code()) {
        case ErrorCode::kTooFewValidPoints:
        case ErrorCode::kDegenerateHand:
          s.valid = false;
          s.timestamp = k.keypoints.timestamp;
          break;
        default:
          throw;
      }
    }
  });
  if (stats) {
    stats->records = track.samples.size();
    stats->invalid = static_cast<std::size_t>(
        std::count_if(track.samples.begin(), track.samples.end(), [](const HandPose6D& s) { return !s.valid; }));
  }
  return track;
}

KinematicChain chain_for_session(const KinematicChain& chain, const SessionManifest& m,
                                 const std::optional<RigidTransform>& base_override) {
  if (base_override) return chain.with_base(*base_override);
  if (m.robot_base) return chain.with_base(*m.robot_base);
  return chain;
}

VoxelGrid collision_grid(const KinematicChain& chain, const SceneFrame& frame, double resolution) {
  CloudOptions co;
  co.exclude = frame.mask;
  const PointCloud cloud = build_point_cloud(frame.frame, co);
  return voxelize(cloud, default_workspace(chain.base_pose()), resolution);
}

ProcessResult process_session(const SessionArchive& archive, const KinematicChain& base_chain,
                              const ProcessOptions& opts) {
  const SessionManifest& m = archive.manifest();
  if (archive.size() == 0) throw Error(ErrorCode::kSceneCorrupt, "archive has no frames");
  const KinematicChain chain = chain_for_session(base_chain, m, opts.base_pose);
  const unsigned threads = resolve_threads(opts.threads);
  ProcessOptions o = opts;
  o.lift = lift_options_for(m, opts.lift);

  const std::vector<FrameKeypoints> keypoints = archive.hand_keypoints();
  if (keypoints.empty()) throw Error(ErrorCode::kTooFewValidPoints, "archive has no hand keypoints");
  const std::vector<RgbdFrame> frames = load_frames(archive, threads);
  const VoxelGrid grid = collision_grid(chain, archive.load(0), opts.collision_resolution);

  ProcessResult r;
  Trajectory traj =
      track_and_mimic(chain, keypoints, frames, o, m.nominal_rate, threads, &grid, &r.track, &r.stats);
  r.demo.language_goal = m.language_goal;
  r.demo.scene_ref = archive.root().filename().string();
  r.demo.mode = Mode::kKinesthetic;
  r.demo.base_pose = chain.base_pose();
  r.demo.keyframes = extract_keyframes(chain, traj, opts.keyframes);
  r.demo.trajectory = std::move(traj);

  if (opts.peract) {
    PerActOptions po = opts.peract_opts;
    po.threads = threads;
    r.peract = export_peract(chain, r.demo, archive, po);
  }
  if (opts.imagebc) {
    ImageBcOptions io = opts.imagebc_opts;
    io.threads = threads;
    r.imagebc = export_imagebc(chain, r.demo, archive, io);
  }
  return r;
}

Json BenchReport::to_json() const {
  return {{"format", "demoforge.bench"},
          {"version", 1},
          {"frames", frames},
          {"width", width},
          {"height", height},
          {"single_thread", {{"seconds", single_seconds}, {"frames_per_second", single_fps()}}},
          {"parallel", {{"threads", threads}, {"seconds", parallel_seconds}, {"frames_per_second", parallel_fps()}}},
          {"reachable", reachable},
          {"output_crc32", crc32_hex(output_crc)}};
}

BenchReport bench_session(const SessionArchive& archive, const KinematicChain& base_chain, const BenchOptions& opts) {
  const SessionManifest& m = archive.manifest();
  const KinematicChain chain = chain_for_session(base_chain, m, opts.process.base_pose);
  ProcessOptions o = opts.process;
  o.lift = lift_options_for(m, o.lift);
  const std::vector<FrameKeypoints> keypoints = archive.hand_keypoints();
  if (keypoints.empty()) throw Error(ErrorCode::kTooFewValidPoints, "archive has no hand keypoints");
  const unsigned threads = resolve_threads(opts.threads);
  const std::vector<RgbdFrame> frames = load_frames(archive, threads);

  BenchReport report;
  report.frames = keypoints.size();
  report.width = m.intrinsics.width;
  report.height = m.intrinsics.height;
  report.threads = threads;
  auto run = [&](unsigned t, Trajectory* out) {
    double best = 0.0;
    for (int rep = 0; rep < std::max(1, opts.repeats); ++rep) {
      const auto start = std::chrono::steady_clock::now();
      Trajectory traj = track_and_mimic(chain, keypoints, frames, o, m.nominal_rate, t, nullptr, nullptr, nullptr);
      const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      if (rep == 0 || s < best) best = s;
      if (out) *out = std::move(traj);
    }
    return best;
  };
  Trajectory traj;
  report.single_seconds = run(1, &traj);
  report.parallel_seconds = run(threads, nullptr);
  std::vector<std::uint8_t> bytes;
  for (const TrajectorySample& s : traj.samples) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(s.q.angles.data());
    bytes.insert(bytes.end(), p, p + s.q.angles.size() * sizeof(double));
    bytes.push_back(s.gripper == GripperState::kOpen);
    report.reachable += s.reachable;
  }
  report.output_crc = crc32_of(bytes);
  return report;
}

}  // namespace demoforge
