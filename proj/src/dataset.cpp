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

#include "demoforge/dataset.hpp"

#include <png.h>

#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>

#include "demoforge/error.hpp"

namespace demoforge {

namespace fs = std::filesystem;

namespace {

void png_write_cb(png_structp png, png_bytep data, png_size_t n) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + n);
}

struct PngReader {
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;
};

void png_read_cb(png_structp png, png_bytep data, png_size_t n) {
  auto* r = static_cast<PngReader*>(png_get_io_ptr(png));
  if (r->bytes.size() - r->pos < n) png_error(png, "truncated");
  std::memcpy(data, r->bytes.data() + r->pos, n);
  r->pos += n;
}

void png_error_cb(png_structp png, png_const_charp) { std::longjmp(png_jmpbuf(png), 1); }
void png_warning_cb(png_structp, png_const_charp) {}

std::string numbered(const char* dir, const char* stem, std::size_t i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s/%s_%06zu.%s", dir, stem, i, ext);
  return buf;
}

ArchiveFile put(const fs::path& root, const std::string& name, std::span<const std::uint8_t> bytes) {
  write_file(root / name, bytes);
  return {name, crc32_of(bytes)};
}

Json file_json(const ArchiveFile& f) { return {{"file", f.file}, {"crc32", crc32_hex(f.crc32)}}; }

// Clears an earlier output of the same format; refuses anything else.
void prepare_output(const fs::path& root, std::string_view format, std::initializer_list<const char*> owned) {
  if (fs::exists(root) && !fs::is_empty(root)) {
    bool ours = false;
    try {
      ours = parse_json(read_text(root / "manifest.json"), "manifest").value("format", "") == format;
    } catch (const Error&) {
    }
    if (!ours) throw Error(ErrorCode::kIo, "refusing to write into non-empty directory " + root.string());
    for (const char* name : owned) fs::remove_all(root / name);
    fs::remove(root / "manifest.json");
  }
  fs::create_directories(root);
}

std::vector<std::uint8_t> checked_read(const fs::path& root, const Json& entry, const std::string& what,
                                       ValidationReport& report) {
  std::string file;
  std::string crc;
  try {
    check_keys(entry, {"file", "crc32"}, {"file", "crc32"}, what);
    file = get_string(entry, "file", what);
    crc = get_string(entry, "crc32", what);
  } catch (const Error& e) {
    report.errors.push_back(e.what());
    return {};
  }
  if (file.find("..") != std::string::npos || fs::path(file).is_absolute()) {
    report.errors.push_back(what + ": bad payload path '" + file + "'");
    return {};
  }
  std::vector<std::uint8_t> bytes;
  try {
    bytes = read_file(root / file);
  } catch (const Error&) {
    report.errors.push_back(what + ": missing payload " + file);
    return {};
  }
  if (crc32_hex(crc32_of(bytes)) != crc) {
    report.errors.push_back(what + ": checksum mismatch in " + file);
    return {};
  }
  return bytes;
}

}  // namespace

std::vector<std::uint8_t> encode_png(std::span<const std::uint8_t> rgb, int width, int height) {
  if (width <= 0 || height <= 0 || rgb.size() != 3 * static_cast<std::size_t>(width) * height) {
    throw Error(ErrorCode::kDimensionMismatch, "PNG buffer does not match its dimensions");
  }
  std::vector<std::uint8_t> out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_cb, png_warning_cb);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error(ErrorCode::kIo, "libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::kIo, "PNG encoding failed");
  }
  png_set_write_fn(png, &out, png_write_cb, nullptr);
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, width, height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y) {
    png_write_row(png, const_cast<png_bytep>(rgb.data() + 3 * static_cast<std::size_t>(y) * width));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

PngImage decode_png(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw Error(ErrorCode::kSchema, "not a PNG file");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_cb, png_warning_cb);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw Error(ErrorCode::kIo, "libpng initialisation failed");
  }
  PngReader reader{bytes, 0};
  PngImage img;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::kSchema, "malformed PNG");
  }
  png_set_read_fn(png, &reader, png_read_cb);
  png_read_info(png, info);
  if (png_get_bit_depth(png, info) != 8 || png_get_color_type(png, info) != PNG_COLOR_TYPE_RGB ||
      png_get_interlace_type(png, info) != PNG_INTERLACE_NONE) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::kSchema, "PNG is not 8-bit RGB");
  }
  img.width = static_cast<int>(png_get_image_width(png, info));
  img.height = static_cast<int>(png_get_image_height(png, info));
  img.rgb.resize(3 * static_cast<std::size_t>(img.width) * img.height);
  for (int y = 0; y < img.height; ++y) png_read_row(png, img.rgb.data() + 3 * static_cast<std::size_t>(y) * img.width, nullptr);
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

Json write_dataset(const fs::path& root, const Demonstration& demo, std::span<const PerActSample> peract,
                   std::span<const ImageBcSample> imagebc, const DatasetOptions& opts) {
  prepare_output(root, "demoforge.dataset", {"peract", "imagebc", "demonstration.json"});
  const std::string demo_text = dump_pretty(to_json(demo));
  const auto demo_file =
      put(root, "demonstration.json",
          std::span(reinterpret_cast<const std::uint8_t*>(demo_text.data()), demo_text.size()));

  Json manifest = {{"format", "demoforge.dataset"},
                   {"version", kDatasetVersion},
                   {"language_goal", demo.language_goal},
                   {"scene_ref", demo.scene_ref},
                   {"mode", std::string(mode_name(demo.mode))},
                   {"demonstration", file_json(demo_file)},
                   {"trajectory_samples", demo.trajectory.size()},
                   {"keyframe_count", demo.keyframes.size()}};
  if (!peract.empty()) {
    fs::create_directories(root / "peract");
    Json samples = Json::array();
    for (std::size_t i = 0; i < peract.size(); ++i) {
      const PerActSample& s = peract[i];
      const auto f = put(root, numbered("peract", "sample", i, "dfvx"), encode_voxels(s.voxel_obs));
      Json e = file_json(f);
      e["keyframe_obs"] = s.keyframe_obs;
      e["frame_index"] = s.frame_index;
      e["action"] = to_json(s.action);
      samples.push_back(std::move(e));
    }
    manifest["peract"] = {{"rot_bin_deg", opts.rot_bin_deg}, {"samples", samples}};
  }
  if (!imagebc.empty()) {
    fs::create_directories(root / "imagebc");
    Json samples = Json::array();
    for (std::size_t i = 0; i < imagebc.size(); ++i) {
      const ImageBcSample& s = imagebc[i];
      const auto f = put(root, numbered("imagebc", "frame", i, "png"), encode_png(s.image, s.width, s.height));
      Json e = file_json(f);
      e["trajectory_index"] = s.trajectory_index;
      e["frame_index"] = s.frame_index;
      e["t"] = s.t;
      e["action"] = {{"tcp", to_json(s.action_tcp)}, {"gripper", std::string(gripper_name(s.action_gripper))}};
      samples.push_back(std::move(e));
    }
    manifest["imagebc"] = {{"stride", opts.imagebc_stride},
                           {"image_size", {imagebc.front().width, imagebc.front().height}},
                           {"samples", samples}};
  }
  write_text(root / "manifest.json", dump_pretty(manifest));
  return manifest;
}

ValidationReport validate_dataset(const fs::path& root) {
  ValidationReport report;
  Json m;
  try {
    m = parse_json(read_text(root / "manifest.json"), "dataset manifest");
    constexpr std::string_view w = "dataset manifest";
    check_keys(m,
               {"format", "version", "language_goal", "scene_ref", "mode", "demonstration", "trajectory_samples",
                "keyframe_count", "peract", "imagebc"},
               {"format", "version", "language_goal", "demonstration", "trajectory_samples", "keyframe_count"}, w);
    if (get_string(m, "format", w) != "demoforge.dataset") throw Error(ErrorCode::kSchema, "wrong format");
    if (get_int(m, "version", w) != kDatasetVersion) throw Error(ErrorCode::kSchema, "unsupported version");
  } catch (const Error& e) {
    report.errors.push_back(e.what());
    return report;
  }

  std::optional<Demonstration> demo;
  const auto demo_bytes = checked_read(root, m["demonstration"], "demonstration", report);
  if (!demo_bytes.empty()) {
    try {
      demo = demonstration_from_json(
          parse_json(std::string_view(reinterpret_cast<const char*>(demo_bytes.data()), demo_bytes.size()),
                     "demonstration"));
    } catch (const Error& e) {
      report.errors.push_back(e.what());
    }
  }
  if (demo) {
    if (m["keyframe_count"] != demo->keyframes.size()) report.errors.push_back("keyframe_count disagrees with demonstration");
    if (m["trajectory_samples"] != demo->trajectory.size()) {
      report.errors.push_back("trajectory_samples disagrees with demonstration");
    }
  }

  if (m.contains("peract")) {
    const Json& p = m["peract"];
    try {
      check_keys(p, {"rot_bin_deg", "samples"}, {"rot_bin_deg", "samples"}, "peract");
      const double bin = get_number(p, "rot_bin_deg", "peract");
      const int bins = static_cast<int>(std::lround(360.0 / bin));
      if (!p["samples"].is_array()) throw Error(ErrorCode::kSchema, "peract: samples must be an array");
      if (demo && p["samples"].size() + 1 != demo->keyframes.size()) {
        report.errors.push_back("peract: " + std::to_string(p["samples"].size()) + " samples for " +
                                std::to_string(demo->keyframes.size()) + " keyframes");
      }
      for (std::size_t i = 0; i < p["samples"].size(); ++i) {
        const std::string what = "peract sample " + std::to_string(i);
        Json e = p["samples"][i];
        check_keys(e, {"file", "crc32", "keyframe_obs", "frame_index", "action"},
                   {"file", "crc32", "keyframe_obs", "frame_index", "action"}, what);
        const Json action = e["action"];
        e.erase("keyframe_obs");
        e.erase("frame_index");
        e.erase("action");
        const auto bytes = checked_read(root, e, what, report);
        if (bytes.empty()) continue;
        const VoxelGrid g = decode_voxels(bytes);
        check_keys(action, {"trans_index", "rot_bins", "gripper"}, {"trans_index", "rot_bins", "gripper"}, what);
        const auto ti = action["trans_index"].get<std::array<int, 3>>();
        const auto rb = action["rot_bins"].get<std::array<int, 3>>();
        const int grip = action["gripper"].get<int>();
        for (int k = 0; k < 3; ++k) {
          if (ti[k] < 0 || ti[k] >= g.dims()[k]) report.errors.push_back(what + ": trans_index outside the grid");
          if (rb[k] < 0 || rb[k] >= bins) report.errors.push_back(what + ": rotation bin out of range");
        }
        if (grip != 0 && grip != 1) report.errors.push_back(what + ": gripper must be 0 or 1");
      }
    } catch (const std::exception& e) {
      report.errors.push_back(std::string("peract: ") + e.what());
    }
  }

  if (m.contains("imagebc")) {
    const Json& b = m["imagebc"];
    try {
      check_keys(b, {"stride", "image_size", "samples"}, {"stride", "image_size", "samples"}, "imagebc");
      const auto size = b["image_size"].get<std::array<int, 2>>();
      const std::int64_t stride = get_int(b, "stride", "imagebc");
      if (stride < 1) throw Error(ErrorCode::kSchema, "imagebc: stride must be >= 1");
      if (demo) {
        const std::size_t n = demo->trajectory.size();
        const std::size_t expect = (n + static_cast<std::size_t>(stride) - 1) / static_cast<std::size_t>(stride);
        if (b["samples"].size() != expect) report.errors.push_back("imagebc: sample count disagrees with stride");
      }
      for (std::size_t i = 0; i < b["samples"].size(); ++i) {
        const std::string what = "imagebc frame " + std::to_string(i);
        Json e = b["samples"][i];
        check_keys(e, {"file", "crc32", "trajectory_index", "frame_index", "t", "action"},
                   {"file", "crc32", "trajectory_index", "frame_index", "t", "action"}, what);
        transform_from_json(e["action"]["tcp"]);
        parse_gripper(e["action"]["gripper"].get<std::string>());
        for (const char* k : {"trajectory_index", "frame_index", "t", "action"}) e.erase(k);
        const auto bytes = checked_read(root, e, what, report);
        if (bytes.empty()) continue;
        const PngImage img = decode_png(bytes);
        if (img.width != size[0] || img.height != size[1]) report.errors.push_back(what + ": wrong image size");
      }
    } catch (const std::exception& e) {
      report.errors.push_back(std::string("imagebc: ") + e.what());
    }
  }
  return report;
}

ValidationReport validate_replay(const fs::path& root) {
  ValidationReport report;
  try {
    const Json m = parse_json(read_text(root / "manifest.json"), "replay manifest");
    constexpr std::string_view w = "replay manifest";
    check_keys(m, {"format", "version", "frame_count", "frames"}, {"format", "version", "frame_count", "frames"}, w);
    if (get_string(m, "format", w) != "demoforge.replay") throw Error(ErrorCode::kSchema, "wrong format");
    if (get_int(m, "version", w) != 1) throw Error(ErrorCode::kSchema, "unsupported version");
    if (!m["frames"].is_array()) throw Error(ErrorCode::kSchema, "frames must be an array");
    if (m["frame_count"] != m["frames"].size()) report.errors.push_back("frame_count disagrees with frames");
    std::optional<std::pair<int, int>> size;
    for (std::size_t i = 0; i < m["frames"].size(); ++i) {
      const std::string what = "replay frame " + std::to_string(i);
      Json e = m["frames"][i];
      check_keys(e, {"file", "crc32", "trajectory_index", "frame_index", "t"},
                 {"file", "crc32", "trajectory_index", "frame_index", "t"}, what);
      for (const char* k : {"trajectory_index", "frame_index", "t"}) e.erase(k);
      const auto bytes = checked_read(root, e, what, report);
      if (bytes.empty()) continue;
      const PngImage img = decode_png(bytes);
      if (!size) size = std::pair{img.width, img.height};
      if (*size != std::pair{img.width, img.height}) report.errors.push_back(what + ": image size differs");
    }
  } catch (const std::exception& e) {
    report.errors.push_back(e.what());
  }
  return report;
}

ValidationReport validate_path(const fs::path& root) {
  try {
    const Json m = parse_json(read_text(root / "manifest.json"), "manifest");
    if (m.is_object() && m.value("format", "") == "demoforge.dataset") return validate_dataset(root);
    if (m.is_object() && m.value("format", "") == "demoforge.replay") return validate_replay(root);
  } catch (const Error&) {
    // Fall through: the archive validator reports the problem.
  }
  return validate_archive(root);
}

Json write_frames(const fs::path& root, std::span<const ImageBcSample> frames) {
  prepare_output(root, "demoforge.replay", {"frames"});
  fs::create_directories(root / "frames");
  Json entries = Json::array();
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const ImageBcSample& s = frames[i];
    Json e = file_json(put(root, numbered("frames", "frame", i, "png"), encode_png(s.image, s.width, s.height)));
    e["trajectory_index"] = s.trajectory_index;
    e["frame_index"] = s.frame_index;
    e["t"] = s.t;
    entries.push_back(std::move(e));
  }
  Json m = {{"format", "demoforge.replay"}, {"version", 1}, {"frame_count", frames.size()}, {"frames", entries}};
  write_text(root / "manifest.json", dump_pretty(m));
  return m;
}

}  // namespace demoforge
