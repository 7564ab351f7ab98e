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

#include <zlib.h>

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <sstream>

#include "demoforge/error.hpp"

namespace demoforge {

static_assert(std::endian::native == std::endian::little, "payload I/O assumes a little-endian host");

namespace {

constexpr std::string_view kManifest = "manifest.json";

Json file_json(const ArchiveFile& f) { return {{"file", f.file}, {"crc32", crc32_hex(f.crc32)}}; }

ArchiveFile file_from_json(const Json& j, std::string_view what) {
  check_keys(j, {"file", "crc32"}, {"file", "crc32"}, what);
  ArchiveFile f;
  f.file = get_string(j, "file", what);
  const std::string crc = get_string(j, "crc32", what);
  if (crc.size() != 8 || crc.find_first_not_of("0123456789abcdef") != std::string::npos) {
    throw Error(ErrorCode::kSchema, std::string(what) + ": crc32 must be 8 lowercase hex digits");
  }
  f.crc32 = static_cast<std::uint32_t>(std::stoul(crc, nullptr, 16));
  // Payload paths stay inside the archive.
  const std::filesystem::path p(f.file);
  if (f.file.empty() || p.is_absolute() || f.file.find("..") != std::string::npos) {
    throw Error(ErrorCode::kSchema, std::string(what) + ": bad payload path '" + f.file + "'");
  }
  return f;
}

std::string frame_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frames/%06zu", i);
  return buf;
}

}  // namespace

Json to_json(const SessionManifest& m) {
  Json frames = Json::array();
  for (std::size_t i = 0; i < m.frames.size(); ++i) {
    const FrameRecord& f = m.frames[i];
    Json jf = {{"index", i},
               {"timestamp", f.timestamp},
               {"camera_pose", to_json(f.camera_pose)},
               {"hand_present", f.hand_present},
               {"color", file_json(f.color)},
               {"depth", file_json(f.depth)},
               {"depth_size", Json::array({f.depth_width, f.depth_height})}};
    if (f.mask) jf["mask"] = file_json(*f.mask);
    frames.push_back(std::move(jf));
  }
  Json j = {{"format", "demoforge.session"},
            {"version", kArchiveVersion},
            {"intrinsics", to_json(m.intrinsics)},
            {"nominal_rate", m.nominal_rate},
            {"frame_count", m.frames.size()},
            {"language_goal", m.language_goal},
            {"frames", frames}};
  if (m.robot_base) j["robot_base"] = to_json(*m.robot_base);
  if (m.hand_keypoints) j["hand_keypoints"] = file_json(*m.hand_keypoints);
  if (m.background_plate) j["background_plate"] = file_json(*m.background_plate);
  if (!m.extra.is_null()) j["extra"] = m.extra;
  return j;
}

SessionManifest manifest_from_json(const Json& j) {
  constexpr std::string_view w = "manifest";
  check_keys(j,
             {"format", "version", "intrinsics", "nominal_rate", "frame_count", "language_goal", "frames",
              "robot_base", "hand_keypoints", "background_plate", "extra"},
             {"format", "version", "intrinsics", "nominal_rate", "frame_count", "frames"}, w);
  if (get_string(j, "format", w) != "demoforge.session") throw Error(ErrorCode::kSchema, "manifest: wrong format");
  if (get_int(j, "version", w) != kArchiveVersion) throw Error(ErrorCode::kSchema, "manifest: unsupported version");
  SessionManifest m;
  m.intrinsics = intrinsics_from_json(j["intrinsics"]);
  m.nominal_rate = get_number(j, "nominal_rate", w);
  if (!(m.nominal_rate > 0.0)) throw Error(ErrorCode::kSchema, "manifest: nominal_rate must be > 0");
  if (j.contains("language_goal")) m.language_goal = get_string(j, "language_goal", w);
  if (j.contains("robot_base")) m.robot_base = transform_from_json(j["robot_base"]);
  if (j.contains("hand_keypoints")) m.hand_keypoints = file_from_json(j["hand_keypoints"], "manifest.hand_keypoints");
  if (j.contains("background_plate")) {
    m.background_plate = file_from_json(j["background_plate"], "manifest.background_plate");
  }
  if (j.contains("extra")) m.extra = j["extra"];
  const Json& frames = j["frames"];
  if (!frames.is_array()) throw Error(ErrorCode::kSchema, "manifest: frames must be an array");
  const std::int64_t count = get_int(j, "frame_count", w);
  if (count != static_cast<std::int64_t>(frames.size())) {
    throw Error(ErrorCode::kSchema, "manifest: frame_count " + std::to_string(count) + " but " +
                                        std::to_string(frames.size()) + " frame records");
  }
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const std::string fw = "frame " + std::to_string(i);
    const Json& jf = frames[i];
    check_keys(jf, {"index", "timestamp", "camera_pose", "hand_present", "color", "depth", "depth_size", "mask"},
               {"index", "timestamp", "camera_pose", "hand_present", "color", "depth", "depth_size"}, fw);
    if (get_int(jf, "index", fw) != static_cast<std::int64_t>(i)) {
      throw Error(ErrorCode::kSchema, fw + ": index out of sequence");
    }
    FrameRecord f;
    f.timestamp = get_number(jf, "timestamp", fw);
    f.camera_pose = transform_from_json(jf["camera_pose"]);
    f.hand_present = get_bool(jf, "hand_present", fw);
    f.color = file_from_json(jf["color"], fw + ".color");
    f.depth = file_from_json(jf["depth"], fw + ".depth");
    const Json& ds = jf["depth_size"];
    if (!ds.is_array() || ds.size() != 2 || !ds[0].is_number_integer() || !ds[1].is_number_integer() ||
        ds[0].get<int>() <= 0 || ds[1].get<int>() <= 0) {
      throw Error(ErrorCode::kSchema, fw + ": depth_size must be [width, height]");
    }
    f.depth_width = ds[0].get<int>();
    f.depth_height = ds[1].get<int>();
    if (jf.contains("mask")) f.mask = file_from_json(jf["mask"], fw + ".mask");
    m.frames.push_back(std::move(f));
  }
  return m;
}

std::vector<std::uint8_t> deflate_bytes(std::span<const std::uint8_t> raw) {
  uLongf size = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> out(size);
  if (compress2(out.data(), &size, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK) {
    throw Error(ErrorCode::kIo, "zlib compression failed");
  }
  out.resize(size);
  return out;
}

std::vector<std::uint8_t> inflate_bytes(std::span<const std::uint8_t> packed, std::size_t expected) {
  std::vector<std::uint8_t> out(expected + 1);
  uLongf size = static_cast<uLongf>(out.size());
  const int rc = uncompress(out.data(), &size, packed.data(), static_cast<uLong>(packed.size()));
  if (rc != Z_OK || size != expected) {
    throw Error(ErrorCode::kSceneCorrupt, "payload does not decompress to " + std::to_string(expected) + " bytes");
  }
  out.resize(size);
  return out;
}

SessionArchive SessionArchive::open(const std::filesystem::path& root) {
  const auto manifest_path = root / kManifest;
  if (!std::filesystem::is_directory(root) || !std::filesystem::is_regular_file(manifest_path)) {
    throw Error(ErrorCode::kSceneNotFound, "no session archive at " + root.string());
  }
  try {
    return SessionArchive(root, manifest_from_json(parse_json(read_text(manifest_path), "manifest")));
  } catch (const Error& e) {
    throw Error(ErrorCode::kSceneCorrupt, e.what());
  }
}

std::vector<std::uint8_t> SessionArchive::read_checked(const ArchiveFile& f, const std::string& what) const {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = read_file(root_ / f.file);
  } catch (const Error&) {
    throw Error(ErrorCode::kSceneCorrupt, what + ": missing payload " + f.file);
  }
  if (crc32_of(bytes) != f.crc32) throw Error(ErrorCode::kSceneCorrupt, what + ": checksum mismatch in " + f.file);
  return bytes;
}

SceneFrame SessionArchive::load(std::size_t i) const {
  const FrameRecord& r = manifest_.frames.at(i);
  const CameraIntrinsics& k = manifest_.intrinsics;
  const std::string what = "frame " + std::to_string(i);
  const std::size_t pixels = static_cast<std::size_t>(k.width) * k.height;
  SceneFrame out;
  out.hand_present = r.hand_present;
  out.frame.intrinsics = k;
  out.frame.camera_pose = r.camera_pose;
  out.frame.timestamp = r.timestamp;
  try {
    out.frame.color = inflate_bytes(read_checked(r.color, what), 3 * pixels);
    const std::size_t dpix = static_cast<std::size_t>(r.depth_width) * r.depth_height;
    const auto raw = inflate_bytes(read_checked(r.depth, what), 4 * dpix);
    std::vector<float> depth(dpix);
    std::memcpy(depth.data(), raw.data(), raw.size());
    DepthFrame d = DepthFrame::from_raw(r.depth_width, r.depth_height, std::move(depth), r.timestamp);
    out.frame.depth = (r.depth_width == k.width && r.depth_height == k.height) ? std::move(d)
                                                                             : resample_depth(d, k.width, k.height);
    if (r.mask) out.mask = inflate_bytes(read_checked(*r.mask, what), pixels);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kSceneCorrupt && std::string(e.what()).rfind(what, 0) != 0) {
      throw Error(ErrorCode::kSceneCorrupt, what + ": " + e.what());
    }
    throw;
  }
  return out;
}

std::vector<std::uint8_t> SessionArchive::background_plate() const {
  if (!manifest_.background_plate) return {};
  const std::size_t pixels = static_cast<std::size_t>(manifest_.intrinsics.width) * manifest_.intrinsics.height;
  return inflate_bytes(read_checked(*manifest_.background_plate, "background plate"), 3 * pixels);
}

std::vector<FrameKeypoints> SessionArchive::hand_keypoints() const {
  if (!manifest_.hand_keypoints) return {};
  const auto bytes = read_checked(*manifest_.hand_keypoints, "hand keypoints");
  std::istringstream in(std::string(bytes.begin(), bytes.end()));
  std::vector<FrameKeypoints> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(frame_keypoints_from_json(parse_json(line, "hand keypoints")));
    } catch (const Error& e) {
      throw Error(ErrorCode::kSceneCorrupt, "hand keypoints line " + std::to_string(lineno) + ": " + e.what());
    }
    if (out.back().frame >= size()) {
      throw Error(ErrorCode::kSceneCorrupt, "hand keypoints line " + std::to_string(lineno) + ": frame out of range");
    }
  }
  return out;
}

Json ValidationReport::to_json() const {
  return {{"ok", ok()}, {"frames_checked", frames_checked}, {"errors", errors}};
}

ValidationReport validate_archive(const std::filesystem::path& root) {
  ValidationReport report;
  std::optional<SessionArchive> archive;
  try {
    archive.emplace(SessionArchive::open(root));
  } catch (const Error& e) {
    report.errors.push_back(e.what());
    return report;
  }
  const SessionManifest& m = archive->manifest();
  for (std::size_t i = 0; i < m.frames.size(); ++i) {
    if (i > 0 && !(m.frames[i].timestamp > m.frames[i - 1].timestamp)) {
      report.errors.push_back("frame " + std::to_string(i) + ": timestamp not increasing");
    }
    try {
      archive->load(i);
    } catch (const Error& e) {
      report.errors.push_back(e.what());
    }
    ++report.frames_checked;
  }
  try {
    archive->background_plate();
  } catch (const Error& e) {
    report.errors.push_back(e.what());
  }
  try {
    const double period = 1.0 / m.nominal_rate;
    std::optional<std::size_t> last;
    for (const FrameKeypoints& k : archive->hand_keypoints()) {
      const std::string what = "hand keypoints for frame " + std::to_string(k.frame);
      if (last && k.frame <= *last) report.errors.push_back(what + ": frames not increasing");
      if (std::abs(k.keypoints.timestamp - m.frames[k.frame].timestamp) > period + 1e-9) {
        report.errors.push_back(what + ": timestamp more than one frame period from the frame");
      }
      last = k.frame;
    }
  } catch (const Error& e) {
    report.errors.push_back(e.what());
  }
  return report;
}

ArchiveWriter::ArchiveWriter(std::filesystem::path root, const CameraIntrinsics& intrinsics, double nominal_rate)
    : root_(std::move(root)) {
  intrinsics.validate();
  manifest_.intrinsics = intrinsics;
  manifest_.nominal_rate = nominal_rate;
  std::filesystem::create_directories(root_ / "frames");
}

ArchiveFile ArchiveWriter::write_payload(const std::string& name, std::span<const std::uint8_t> raw) {
  const auto packed = deflate_bytes(raw);
  write_file(root_ / name, packed);
  return {name, crc32_of(packed)};
}

void ArchiveWriter::add_frame(const RgbdFrame& frame, std::span<const std::uint8_t> mask, bool hand_present) {
  const CameraIntrinsics& k = manifest_.intrinsics;
  const std::size_t pixels = static_cast<std::size_t>(k.width) * k.height;
  if (frame.color.size() != 3 * pixels) throw Error(ErrorCode::kDimensionMismatch, "colour size mismatch");
  if (!mask.empty() && mask.size() != pixels) throw Error(ErrorCode::kDimensionMismatch, "mask size mismatch");
  if (!manifest_.frames.empty() && !(frame.timestamp > manifest_.frames.back().timestamp)) {
    throw Error(ErrorCode::kInvalidArgument, "frame timestamps must increase");
  }
  const std::string base = frame_name(manifest_.frames.size());
  FrameRecord r;
  r.timestamp = frame.timestamp;
  r.camera_pose = frame.camera_pose;
  r.hand_present = hand_present;
  r.color = write_payload(base + ".rgb.z", frame.color);
  r.depth_width = frame.depth.width;
  r.depth_height = frame.depth.height;
  // Holes are stored as 0, the sensor convention.
  std::vector<float> depth(frame.depth.depth);
  for (float& d : depth) {
    if (!(d > 0.0f) || !std::isfinite(d)) d = 0.0f;
  }
  r.depth = write_payload(base + ".depth.z", std::span(reinterpret_cast<const std::uint8_t*>(depth.data()),
                                                       depth.size() * sizeof(float)));
  if (!mask.empty()) {
    std::vector<std::uint8_t> bits(mask.begin(), mask.end());
    for (auto& b : bits) b = b != 0;
    r.mask = write_payload(base + ".mask.z", bits);
  }
  manifest_.frames.push_back(std::move(r));
}

void ArchiveWriter::set_hand_keypoints(const std::vector<FrameKeypoints>& stream) {
  std::string text;
  for (const FrameKeypoints& k : stream) text += dump(to_json(k));
  write_text(root_ / "hand_keypoints.jsonl", text);
  const auto bytes = std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size());
  manifest_.hand_keypoints = ArchiveFile{"hand_keypoints.jsonl", crc32_of(bytes)};
}

void ArchiveWriter::set_background_plate(std::span<const std::uint8_t> rgb) {
  const CameraIntrinsics& k = manifest_.intrinsics;
  if (rgb.size() != 3 * static_cast<std::size_t>(k.width) * k.height) {
    throw Error(ErrorCode::kDimensionMismatch, "plate size mismatch");
  }
  manifest_.background_plate = write_payload("background.rgb.z", rgb);
}

void ArchiveWriter::finish() { write_text(root_ / kManifest, dump_pretty(to_json(manifest_))); }

}  // namespace demoforge
