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

#include "demoforge/serialize.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <string>

#include "demoforge/error.hpp"
#include "test_util.hpp"

namespace demoforge {
namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kInvalidArgument;
}

TEST(Serialize, Crc32CheckValue) {
  // Standard CRC-32 check value for the ASCII string "123456789".
  const std::string s = "123456789";
  EXPECT_EQ(crc32_of(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size())), 0xcbf43926u);
  EXPECT_EQ(crc32_hex(0xcbf43926u), "cbf43926");
  EXPECT_EQ(crc32_hex(0x1u), "00000001");
}

TEST(Serialize, TransformRoundTrip) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    const RigidTransform t = testing::random_transform(rng);
    const RigidTransform back = transform_from_json(parse_json(dump(to_json(t)), "t"));
    EXPECT_EQ(back.translation(), t.translation());
    // Loading renormalizes, which may move the last bit.
    EXPECT_LT((back.rotation().coeffs() - t.rotation().coeffs()).cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(Serialize, TransformRejectsBadInput) {
  EXPECT_EQ(code_of([] { transform_from_json(Json::parse(R"({"translation":[0,0,0],"rotation":[2,0,0,0]})")); }),
            ErrorCode::kSchema);
  EXPECT_EQ(code_of([] {
              transform_from_json(Json::parse(R"({"translation":[0,0,0],"rotation":[1,0,0,0],"scale":1})"));
            }),
            ErrorCode::kSchema);
  EXPECT_EQ(code_of([] { transform_from_json(Json::parse(R"({"translation":[0,0],"rotation":[1,0,0,0]})")); }),
            ErrorCode::kSchema);
  EXPECT_EQ(code_of([] { parse_json("{not json", "x"); }), ErrorCode::kSchema);
}

TEST(Serialize, IntrinsicsRoundTrip) {
  const CameraIntrinsics k{300.0, 301.5, 159.5, 119.5, 320, 240};
  const CameraIntrinsics b = intrinsics_from_json(to_json(k));
  EXPECT_EQ(b.fx, k.fx);
  EXPECT_EQ(b.fy, k.fy);
  EXPECT_EQ(b.cx, k.cx);
  EXPECT_EQ(b.cy, k.cy);
  EXPECT_EQ(b.width, k.width);
  EXPECT_EQ(b.height, k.height);
  Json bad = to_json(k);
  bad["fx"] = -1.0;
  EXPECT_EQ(code_of([&] { intrinsics_from_json(bad); }), ErrorCode::kSchema);
}

Trajectory sample_trajectory() {
  Trajectory t;
  for (int i = 0; i < 5; ++i) {
    TrajectorySample s;
    s.t = i / 30.0;
    s.q.angles = JointVector::Constant(7, 0.1 * i);
    s.q.gripper_aperture = i < 3 ? 0.08 : 0.0;
    s.gripper = i < 3 ? GripperState::kOpen : GripperState::kClosed;
    s.collision = i == 2;
    s.reachable = i != 4;
    t.samples.push_back(s);
  }
  return t;
}

TEST(Serialize, DemonstrationRoundTrip) {
  Demonstration d;
  d.language_goal = "put the red block on the blue pad";
  d.scene_ref = "sessions/a";
  d.mode = Mode::kKinesthetic;
  d.base_pose = RigidTransform::from_translation(Vec3(0.1, -0.2, 0.0));
  d.trajectory = sample_trajectory();
  KeyPoint kp;
  kp.target = RigidTransform::from_axis_angle(Vec3::UnitY(), 0.3, Vec3(0.4, 0.0, 0.2));
  kp.gripper_command = GripperState::kClosed;
  kp.solved_q = d.trajectory.samples[3].q;
  kp.dwell = 0.5;
  d.keypoints.push_back(kp);
  d.keyframes.push_back({3, d.trajectory.samples[3].t, kp.target, GripperState::kClosed, kp.solved_q});

  const Json j = to_json(d);
  EXPECT_EQ(j["format"], "demoforge.demonstration");
  const Demonstration b = demonstration_from_json(parse_json(dump_pretty(j), "demo"));
  EXPECT_EQ(b.language_goal, d.language_goal);
  EXPECT_EQ(b.scene_ref, d.scene_ref);
  EXPECT_EQ(b.mode, d.mode);
  EXPECT_EQ(b.base_pose.translation(), d.base_pose.translation());
  ASSERT_EQ(b.trajectory.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(b.trajectory.samples[i].t, d.trajectory.samples[i].t);
    EXPECT_EQ(b.trajectory.samples[i].q, d.trajectory.samples[i].q);
    EXPECT_EQ(b.trajectory.samples[i].gripper, d.trajectory.samples[i].gripper);
    EXPECT_EQ(b.trajectory.samples[i].collision, d.trajectory.samples[i].collision);
    EXPECT_EQ(b.trajectory.samples[i].reachable, d.trajectory.samples[i].reachable);
  }
  ASSERT_EQ(b.keypoints.size(), 1u);
  EXPECT_EQ(b.keypoints[0].dwell, 0.5);
  EXPECT_EQ(b.keypoints[0].solved_q, kp.solved_q);
  ASSERT_EQ(b.keyframes.size(), 1u);
  EXPECT_EQ(b.keyframes[0].index, 3u);
  // Same JSON text after a second round trip.
  EXPECT_EQ(dump(to_json(b)), dump(j));
}

TEST(Serialize, TrajectoryRejectsNonIncreasingTime) {
  Json j = to_json(sample_trajectory());
  j["samples"][2]["t"] = 0.0;
  EXPECT_EQ(code_of([&] { trajectory_from_json(j); }), ErrorCode::kSchema);
}

TEST(Serialize, FrameKeypointsRoundTrip) {
  FrameKeypoints k;
  k.frame = 17;
  k.keypoints.timestamp = 0.5;
  for (int i = 0; i < kHandLandmarks; ++i) {
    k.keypoints.points[i] = {10.25 + i, 20.5 - i};
    k.keypoints.confidence[i] = i / 21.0;
  }
  const std::string line = dump(to_json(k));
  EXPECT_EQ(line.back(), '\n');
  EXPECT_EQ(line.find('\n'), line.size() - 1);
  const FrameKeypoints b = frame_keypoints_from_json(parse_json(line, "kp"));
  EXPECT_EQ(b.frame, 17u);
  EXPECT_EQ(b.keypoints.timestamp, 0.5);
  for (int i = 0; i < kHandLandmarks; ++i) {
    EXPECT_EQ(b.keypoints.points[i].u, k.keypoints.points[i].u);
    EXPECT_EQ(b.keypoints.points[i].v, k.keypoints.points[i].v);
    EXPECT_EQ(b.keypoints.confidence[i], k.keypoints.confidence[i]);
  }
  Json short_points = to_json(k);
  short_points["points"].erase(0);
  EXPECT_EQ(code_of([&] { frame_keypoints_from_json(short_points); }), ErrorCode::kSchema);
}

TEST(Serialize, FileHelpers) {
  const auto dir = std::filesystem::temp_directory_path() / "demoforge_serialize_test";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  write_text(dir / "a.txt", "hello");
  EXPECT_EQ(read_text(dir / "a.txt"), "hello");
  write_text(dir / "a.txt", "again");
  EXPECT_EQ(read_text(dir / "a.txt"), "again");
  EXPECT_EQ(code_of([&] { read_file(dir / "missing.bin"); }), ErrorCode::kIo);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace demoforge
