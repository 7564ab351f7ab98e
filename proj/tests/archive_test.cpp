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

#include "demoforge/archive.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "demoforge/error.hpp"

namespace demoforge {
namespace {

namespace fs = std::filesystem;

const CameraIntrinsics kK{40.0, 40.0, 7.5, 5.5, 16, 12};

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("demoforge_archive_" + name);
  fs::remove_all(p);
  return p;
}

RgbdFrame make_frame(int i, int dw = 16, int dh = 12) {
  RgbdFrame f;
  f.intrinsics = kK;
  f.timestamp = i / 30.0;
  f.camera_pose = RigidTransform::from_translation(Vec3(0.01 * i, 0.0, 1.0));
  f.color.resize(3 * 16 * 12);
  for (std::size_t p = 0; p < f.color.size(); ++p) f.color[p] = static_cast<std::uint8_t>(p * 7 + i);
  std::vector<float> d(static_cast<std::size_t>(dw) * dh);
  for (std::size_t p = 0; p < d.size(); ++p) d[p] = 0.5f + 0.001f * static_cast<float>(p + i);
  d[3] = 0.0f;  // hole
  f.depth = DepthFrame::from_raw(dw, dh, std::move(d), f.timestamp);
  return f;
}

std::vector<std::uint8_t> make_mask(int i) {
  std::vector<std::uint8_t> m(16 * 12, 0);
  for (int p = 0; p < 10 + i; ++p) m[p] = 255;
  return m;
}

FrameKeypoints make_keypoints(std::size_t frame) {
  FrameKeypoints k;
  k.frame = frame;
  k.keypoints.timestamp = frame / 30.0 + 0.004;
  for (int j = 0; j < kHandLandmarks; ++j) {
    k.keypoints.points[j] = {1.0 + j * 0.5, 2.0 + j * 0.25};
    k.keypoints.confidence[j] = 0.9;
  }
  return k;
}

fs::path write_archive(const std::string& name, int frames = 3) {
  const fs::path root = fresh_dir(name);
  ArchiveWriter w(root, kK, 30.0);
  for (int i = 0; i < frames; ++i) w.add_frame(make_frame(i), i == 1 ? make_mask(i) : std::vector<std::uint8_t>{}, i == 1);
  std::vector<FrameKeypoints> kps;
  for (int i = 0; i < frames; ++i) kps.push_back(make_keypoints(i));
  w.set_hand_keypoints(kps);
  w.set_background_plate(make_frame(99).color);
  w.set_language_goal("stack the blocks");
  w.set_robot_base(RigidTransform::from_translation(Vec3(0.2, 0.0, 0.0)));
  w.set_extra({{"generator", "test"}});
  w.finish();
  return root;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kInvalidArgument;
}

std::string message_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

void flip_byte(const fs::path& p, std::size_t offset) {
  std::fstream f(p, std::ios::in | std::ios::out | std::ios::binary);
  f.seekg(static_cast<std::streamoff>(offset));
  char c = 0;
  f.read(&c, 1);
  c = static_cast<char>(c ^ 0x5a);
  f.seekp(static_cast<std::streamoff>(offset));
  f.write(&c, 1);
}

TEST(Archive, DeflateRoundTrip) {
  std::mt19937 rng(1);
  std::vector<std::uint8_t> raw(5000);
  for (auto& b : raw) b = static_cast<std::uint8_t>(rng() % 4);
  const auto packed = deflate_bytes(raw);
  EXPECT_LT(packed.size(), raw.size());
  EXPECT_EQ(inflate_bytes(packed, raw.size()), raw);
  EXPECT_EQ(code_of([&] { inflate_bytes(packed, raw.size() - 1); }), ErrorCode::kSceneCorrupt);
  EXPECT_EQ(code_of([&] { inflate_bytes(packed, raw.size() + 1); }), ErrorCode::kSceneCorrupt);
  EXPECT_EQ(code_of([&] { inflate_bytes(std::span(packed).first(packed.size() / 2), raw.size()); }),
            ErrorCode::kSceneCorrupt);
}

TEST(Archive, RoundTrip) {
  const fs::path root = write_archive("roundtrip");
  const SessionArchive a = SessionArchive::open(root);
  ASSERT_EQ(a.size(), 3u);
  EXPECT_EQ(a.manifest().language_goal, "stack the blocks");
  ASSERT_TRUE(a.manifest().robot_base);
  EXPECT_EQ(a.manifest().robot_base->translation(), Vec3(0.2, 0.0, 0.0));
  EXPECT_EQ(a.manifest().extra["generator"], "test");
  for (int i = 0; i < 3; ++i) {
    const RgbdFrame ref = make_frame(i);
    const SceneFrame s = a.load(i);
    EXPECT_EQ(s.frame.color, ref.color);
    EXPECT_EQ(s.frame.timestamp, ref.timestamp);
    EXPECT_EQ(s.frame.camera_pose.translation(), ref.camera_pose.translation());
    ASSERT_EQ(s.frame.depth.depth.size(), ref.depth.depth.size());
    for (std::size_t p = 0; p < ref.depth.depth.size(); ++p) {
      const float x = ref.depth.depth[p], y = s.frame.depth.depth[p];
      EXPECT_TRUE((std::isnan(x) && std::isnan(y)) || x == y) << p;
    }
    EXPECT_TRUE(std::isnan(s.frame.depth.depth[3]));
    EXPECT_EQ(s.hand_present, i == 1);
    if (i == 1) {
      std::vector<std::uint8_t> expect = make_mask(1);
      for (auto& b : expect) b = b != 0;
      EXPECT_EQ(s.mask, expect);
    } else {
      EXPECT_TRUE(s.mask.empty());
    }
  }
  EXPECT_EQ(a.background_plate(), make_frame(99).color);
  const auto kps = a.hand_keypoints();
  ASSERT_EQ(kps.size(), 3u);
  EXPECT_EQ(kps[2].frame, 2u);
  EXPECT_EQ(kps[2].keypoints.points[4].u, 3.0);
  EXPECT_TRUE(validate_archive(root).ok());
  EXPECT_EQ(validate_archive(root).frames_checked, 3u);
}

TEST(Archive, DepthAtOtherResolutionIsResampled) {
  const fs::path root = fresh_dir("resample");
  ArchiveWriter w(root, kK);
  w.add_frame(make_frame(0, 8, 6), {}, false);
  w.finish();
  const SceneFrame s = SessionArchive::open(root).load(0);
  EXPECT_EQ(s.frame.depth.width, 16);
  EXPECT_EQ(s.frame.depth.height, 12);
  const DepthFrame expect = resample_depth(make_frame(0, 8, 6).depth, 16, 12);
  for (std::size_t p = 0; p < expect.depth.size(); ++p) {
    const float x = expect.depth[p], y = s.frame.depth.depth[p];
    EXPECT_TRUE((std::isnan(x) && std::isnan(y)) || x == y);
  }
}

TEST(Archive, MissingDirectoryIsNotFound) {
  EXPECT_EQ(code_of([] { SessionArchive::open(fresh_dir("absent")); }), ErrorCode::kSceneNotFound);
  const auto r = validate_archive(fresh_dir("absent"));
  EXPECT_FALSE(r.ok());
}

TEST(Archive, CorruptChecksumNamesFrame) {
  const fs::path root = write_archive("crc");
  flip_byte(root / "frames/000002.rgb.z", 4);
  const SessionArchive a = SessionArchive::open(root);
  EXPECT_NO_THROW(a.load(0));
  const std::string msg = message_of([&] { a.load(2); });
  EXPECT_NE(msg.find("frame 2"), std::string::npos) << msg;
  EXPECT_EQ(code_of([&] { a.load(2); }), ErrorCode::kSceneCorrupt);
  const ValidationReport r = validate_archive(root);
  ASSERT_EQ(r.errors.size(), 1u);
  EXPECT_NE(r.errors[0].find("frame 2"), std::string::npos);
  EXPECT_NE(r.errors[0].find("checksum"), std::string::npos);
}

TEST(Archive, TruncatedManifestIsCorrupt) {
  const fs::path root = write_archive("truncated");
  const std::string text = read_text(root / "manifest.json");
  write_text(root / "manifest.json", text.substr(0, text.size() / 2));
  EXPECT_EQ(code_of([&] { SessionArchive::open(root); }), ErrorCode::kSceneCorrupt);
  EXPECT_FALSE(validate_archive(root).ok());
}

TEST(Archive, TruncatedPayloadIsCorrupt) {
  // Rewrite a payload and its checksum so only the size check can catch it.
  const fs::path root = write_archive("shortpayload");
  const auto packed = deflate_bytes(std::vector<std::uint8_t>(10, 1));
  write_file(root / "frames/000000.depth.z", packed);
  Json m = parse_json(read_text(root / "manifest.json"), "m");
  m["frames"][0]["depth"]["crc32"] = crc32_hex(crc32_of(packed));
  write_text(root / "manifest.json", dump(m));
  const SessionArchive a = SessionArchive::open(root);
  EXPECT_EQ(code_of([&] { a.load(0); }), ErrorCode::kSceneCorrupt);
  EXPECT_NE(message_of([&] { a.load(0); }).find("frame 0"), std::string::npos);
}

TEST(Archive, OutOfOrderTimestampsReported) {
  const fs::path root = write_archive("order");
  Json m = parse_json(read_text(root / "manifest.json"), "m");
  m["frames"][2]["timestamp"] = 0.0;
  write_text(root / "manifest.json", dump(m));
  const ValidationReport r = validate_archive(root);
  EXPECT_FALSE(r.ok());
  bool named = false;
  for (const auto& e : r.errors) named |= e.find("frame 2: timestamp") != std::string::npos;
  EXPECT_TRUE(named);
}

TEST(Archive, SchemaViolations) {
  const fs::path root = write_archive("schema");
  const Json good = parse_json(read_text(root / "manifest.json"), "m");
  auto expect_corrupt = [&](const Json& m) {
    write_text(root / "manifest.json", dump(m));
    EXPECT_EQ(code_of([&] { SessionArchive::open(root); }), ErrorCode::kSceneCorrupt) << dump(m);
  };
  Json m = good;
  m["frame_count"] = 4;
  expect_corrupt(m);
  m = good;
  m["unexpected"] = 1;
  expect_corrupt(m);
  m = good;
  m["version"] = 2;
  expect_corrupt(m);
  m = good;
  m["frames"][0]["color"]["file"] = "../escape.rgb.z";
  expect_corrupt(m);
  m = good;
  m["frames"][1]["index"] = 5;
  expect_corrupt(m);
}

TEST(Archive, KeypointTimestampChecked) {
  const fs::path root = fresh_dir("kpts");
  ArchiveWriter w(root, kK);
  w.add_frame(make_frame(0), {}, true);
  w.add_frame(make_frame(1), {}, true);
  FrameKeypoints k = make_keypoints(1);
  k.keypoints.timestamp = 1.0;  // far from frame 1
  w.set_hand_keypoints({make_keypoints(0), k});
  w.finish();
  const ValidationReport r = validate_archive(root);
  ASSERT_EQ(r.errors.size(), 1u);
  EXPECT_NE(r.errors[0].find("frame 1"), std::string::npos);
}

TEST(Archive, WriterRejectsBadInput) {
  const fs::path root = fresh_dir("writer");
  ArchiveWriter w(root, kK);
  w.add_frame(make_frame(1), {}, false);
  EXPECT_EQ(code_of([&] { w.add_frame(make_frame(0), {}, false); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([&] { w.add_frame(make_frame(2), std::vector<std::uint8_t>(5), false); }),
            ErrorCode::kDimensionMismatch);
  EXPECT_EQ(code_of([&] { w.set_background_plate(std::vector<std::uint8_t>(3)); }), ErrorCode::kDimensionMismatch);
}

}  // namespace
}  // namespace demoforge
