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

#ifndef DEMOFORGE_ARCHIVE_HPP_
#define DEMOFORGE_ARCHIVE_HPP_

// Session archive: a directory with manifest.json, zlib-compressed per-frame
// payloads and a JSON-lines hand keypoint stream. Layout in
// docs/session_archive.md.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "demoforge/export.hpp"
#include "demoforge/geom.hpp"
#include "demoforge/serialize.hpp"

namespace demoforge {

inline constexpr int kArchiveVersion = 1;

struct ArchiveFile {
  std::string file;  // relative to the archive root
  std::uint32_t crc32 = 0;
};

struct FrameRecord {
  double timestamp = 0.0;
  RigidTransform camera_pose;
  bool hand_present = false;
  ArchiveFile color;
  ArchiveFile depth;
  int depth_width = 0;  // may differ from the colour size; resampled on load
  int depth_height = 0;
  std::optional<ArchiveFile> mask;
};

struct SessionManifest {
  CameraIntrinsics intrinsics;
  double nominal_rate = 30.0;
  std::string language_goal;
  std::optional<RigidTransform> robot_base;
  std::vector<FrameRecord> frames;
  std::optional<ArchiveFile> hand_keypoints;
  std::optional<ArchiveFile> background_plate;
  Json extra;  // free-form generator metadata, null when absent
};

Json to_json(const SessionManifest& m);
// Throws Schema.
SessionManifest manifest_from_json(const Json& j);

// zlib stream helpers (level 6). inflate throws SceneCorrupt unless the
// output is exactly `expected` bytes.
std::vector<std::uint8_t> deflate_bytes(std::span<const std::uint8_t> raw);
std::vector<std::uint8_t> inflate_bytes(std::span<const std::uint8_t> packed, std::size_t expected);

class SessionArchive final : public FrameSource {
 public:
  // Throws SceneNotFound (no directory / manifest) or SceneCorrupt (manifest
  // unreadable or schema-invalid).
  static SessionArchive open(const std::filesystem::path& root);

  const std::filesystem::path& root() const { return root_; }
  const SessionManifest& manifest() const { return manifest_; }

  std::size_t size() const override { return manifest_.frames.size(); }
  double timestamp(std::size_t i) const override { return manifest_.frames.at(i).timestamp; }
  // Verifies checksums; throws SceneCorrupt naming the frame.
  SceneFrame load(std::size_t i) const override;
  std::vector<std::uint8_t> background_plate() const override;
  // Keypoint stream in file order; throws SceneCorrupt.
  std::vector<FrameKeypoints> hand_keypoints() const;

 private:
  SessionArchive(std::filesystem::path root, SessionManifest m) : root_(std::move(root)), manifest_(std::move(m)) {}
  std::vector<std::uint8_t> read_checked(const ArchiveFile& f, const std::string& what) const;

  std::filesystem::path root_;
  SessionManifest manifest_;
};

struct ValidationReport {
  std::vector<std::string> errors;
  std::size_t frames_checked = 0;
  bool ok() const { return errors.empty(); }
  Json to_json() const;
};

// Schema, checksum, monotone-timestamp and dimension checks over the whole
// archive. Problems are reported, not thrown.
ValidationReport validate_archive(const std::filesystem::path& root);

// Streams frames into a new archive directory.
class ArchiveWriter {
 public:
  ArchiveWriter(std::filesystem::path root, const CameraIntrinsics& intrinsics, double nominal_rate = 30.0);

  // mask: empty or width*height bytes (non-zero = hand).
  void add_frame(const RgbdFrame& frame, std::span<const std::uint8_t> mask, bool hand_present);
  void set_hand_keypoints(const std::vector<FrameKeypoints>& stream);
  void set_background_plate(std::span<const std::uint8_t> rgb);
  void set_language_goal(std::string goal) { manifest_.language_goal = std::move(goal); }
  void set_robot_base(const RigidTransform& base) { manifest_.robot_base = base; }
  void set_extra(Json extra) { manifest_.extra = std::move(extra); }
  // Writes manifest.json; the archive is complete afterwards.
  void finish();

 private:
  ArchiveFile write_payload(const std::string& name, std::span<const std::uint8_t> raw);

  std::filesystem::path root_;
  SessionManifest manifest_;
};

}  // namespace demoforge

#endif  // DEMOFORGE_ARCHIVE_HPP_
