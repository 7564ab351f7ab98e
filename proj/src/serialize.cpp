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

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

#include "demoforge/error.hpp"

namespace demoforge {

namespace {

[[noreturn]] void schema(std::string_view what, const std::string& msg) {
  throw Error(ErrorCode::kSchema, std::string(what) + ": " + msg);
}

const Json& field(const Json& j, std::string_view key, std::string_view what) {
  if (!j.is_object()) schema(what, "expected an object");
  const auto it = j.find(key);
  if (it == j.end()) schema(what, "missing '" + std::string(key) + "'");
  return *it;
}

}  // namespace

void check_keys(const Json& j, std::initializer_list<std::string_view> allowed,
                std::initializer_list<std::string_view> required, std::string_view what) {
  if (!j.is_object()) schema(what, "expected an object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      schema(what, "unknown field '" + key + "'");
    }
  }
  for (std::string_view key : required) {
    if (!j.contains(key)) schema(what, "missing '" + std::string(key) + "'");
  }
}

Json parse_json(std::string_view text, std::string_view what) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    schema(what, e.what());
  }
}

double get_number(const Json& j, std::string_view key, std::string_view what) {
  const Json& v = field(j, key, what);
  if (!v.is_number()) schema(what, "'" + std::string(key) + "' must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) schema(what, "'" + std::string(key) + "' must be finite");
  return d;
}

std::int64_t get_int(const Json& j, std::string_view key, std::string_view what) {
  const Json& v = field(j, key, what);
  if (!v.is_number_integer()) schema(what, "'" + std::string(key) + "' must be an integer");
  return v.get<std::int64_t>();
}

std::string get_string(const Json& j, std::string_view key, std::string_view what) {
  const Json& v = field(j, key, what);
  if (!v.is_string()) schema(what, "'" + std::string(key) + "' must be a string");
  return v.get<std::string>();
}

bool get_bool(const Json& j, std::string_view key, std::string_view what) {
  const Json& v = field(j, key, what);
  if (!v.is_boolean()) schema(what, "'" + std::string(key) + "' must be a boolean");
  return v.get<bool>();
}

namespace {

std::vector<double> numbers(const Json& j, std::size_t n, std::string_view what) {
  if (!j.is_array() || (n != 0 && j.size() != n)) {
    schema(what, "expected an array of " + std::to_string(n) + " numbers");
  }
  std::vector<double> out;
  for (const Json& x : j) {
    if (!x.is_number()) schema(what, "expected numbers");
    out.push_back(x.get<double>());
    if (!std::isfinite(out.back())) schema(what, "non-finite number");
  }
  return out;
}

}  // namespace

Vec3 vec3_from_json(const Json& j, std::string_view what) {
  const auto v = numbers(j, 3, what);
  return {v[0], v[1], v[2]};
}

Json vec3_to_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

Json to_json(const RigidTransform& t) {
  const Eigen::Quaterniond& q = t.rotation();
  return {{"translation", vec3_to_json(t.translation())}, {"rotation", Json::array({q.w(), q.x(), q.y(), q.z()})}};
}

RigidTransform transform_from_json(const Json& j) {
  check_keys(j, {"translation", "rotation"}, {"translation", "rotation"}, "transform");
  const Vec3 t = vec3_from_json(j["translation"], "transform.translation");
  const auto q = numbers(j["rotation"], 4, "transform.rotation");
  const Eigen::Quaterniond quat(q[0], q[1], q[2], q[3]);
  if (std::abs(quat.norm() - 1.0) > 1e-6) schema("transform", "rotation is not a unit quaternion");
  return RigidTransform(quat, t);
}

Json to_json(const CameraIntrinsics& k) {
  return {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"width", k.width}, {"height", k.height}};
}

CameraIntrinsics intrinsics_from_json(const Json& j) {
  constexpr std::string_view w = "intrinsics";
  check_keys(j, {"fx", "fy", "cx", "cy", "width", "height"}, {"fx", "fy", "cx", "cy", "width", "height"}, w);
  CameraIntrinsics k{get_number(j, "fx", w), get_number(j, "fy", w), get_number(j, "cx", w), get_number(j, "cy", w),
                     static_cast<int>(get_int(j, "width", w)), static_cast<int>(get_int(j, "height", w))};
  try {
    k.validate();
  } catch (const Error& e) {
    schema(w, e.what());
  }
  return k;
}

namespace {

Json angles_json(const JointVector& a) {
  Json out = Json::array();
  for (int i = 0; i < a.size(); ++i) out.push_back(a[i]);
  return out;
}

JointVector angles_from(const Json& j, std::string_view what) {
  const auto v = numbers(j, 0, what);
  if (v.empty() || v.size() > static_cast<std::size_t>(kMaxJoints)) schema(what, "bad joint count");
  JointVector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[i];
  return out;
}

GripperState gripper_from(const Json& j, std::string_view key, std::string_view what) {
  const std::string s = get_string(j, key, what);
  if (s == "open") return GripperState::kOpen;
  if (s == "closed") return GripperState::kClosed;
  schema(what, "gripper must be 'open' or 'closed'");
}

}  // namespace

Json to_json(const JointState& q) { return {{"angles", angles_json(q.angles)}, {"gripper_aperture", q.gripper_aperture}}; }

JointState joint_state_from_json(const Json& j) {
  check_keys(j, {"angles", "gripper_aperture"}, {"angles", "gripper_aperture"}, "joint_state");
  JointState q;
  q.angles = angles_from(j["angles"], "joint_state.angles");
  q.gripper_aperture = get_number(j, "gripper_aperture", "joint_state");
  return q;
}

Json to_json(const Trajectory& t) {
  Json samples = Json::array();
  for (const TrajectorySample& s : t.samples) {
    samples.push_back({{"t", s.t},
                       {"q", angles_json(s.q.angles)},
                       {"aperture", s.q.gripper_aperture},
                       {"gripper", std::string(gripper_name(s.gripper))},
                       {"collision", s.collision},
                       {"reachable", s.reachable}});
  }
  return {{"samples", samples}};
}

Trajectory trajectory_from_json(const Json& j) {
  check_keys(j, {"samples"}, {"samples"}, "trajectory");
  if (!j["samples"].is_array()) schema("trajectory", "samples must be an array");
  Trajectory t;
  for (const Json& s : j["samples"]) {
    constexpr std::string_view w = "trajectory sample";
    check_keys(s, {"t", "q", "aperture", "gripper", "collision", "reachable"},
               {"t", "q", "aperture", "gripper", "collision", "reachable"}, w);
    TrajectorySample out;
    out.t = get_number(s, "t", w);
    out.q.angles = angles_from(s["q"], "trajectory sample.q");
    out.q.gripper_aperture = get_number(s, "aperture", w);
    out.gripper = gripper_from(s, "gripper", w);
    out.collision = get_bool(s, "collision", w);
    out.reachable = get_bool(s, "reachable", w);
    t.samples.push_back(std::move(out));
  }
  try {
    t.validate();
  } catch (const Error& e) {
    schema("trajectory", e.what());
  }
  return t;
}

Json to_json(const KeyPoint& k) {
  return {{"target", to_json(k.target)},
          {"gripper", std::string(gripper_name(k.gripper_command))},
          {"solved_q", to_json(k.solved_q)},
          {"dwell", k.dwell}};
}

KeyPoint keypoint_from_json(const Json& j) {
  constexpr std::string_view w = "keypoint";
  check_keys(j, {"target", "gripper", "solved_q", "dwell"}, {"target", "gripper", "solved_q", "dwell"}, w);
  KeyPoint k;
  k.target = transform_from_json(j["target"]);
  k.gripper_command = gripper_from(j, "gripper", w);
  k.solved_q = joint_state_from_json(j["solved_q"]);
  k.dwell = get_number(j, "dwell", w);
  return k;
}

Json to_json(const KeyFrame& k) {
  return {{"index", k.index},
          {"t", k.t},
          {"tcp", to_json(k.tcp)},
          {"gripper", std::string(gripper_name(k.gripper))},
          {"q", to_json(k.q)}};
}

KeyFrame keyframe_from_json(const Json& j) {
  constexpr std::string_view w = "keyframe";
  check_keys(j, {"index", "t", "tcp", "gripper", "q"}, {"index", "t", "tcp", "gripper", "q"}, w);
  KeyFrame k;
  const std::int64_t index = get_int(j, "index", w);
  if (index < 0) schema(w, "negative index");
  k.index = static_cast<std::size_t>(index);
  k.t = get_number(j, "t", w);
  k.tcp = transform_from_json(j["tcp"]);
  k.gripper = gripper_from(j, "gripper", w);
  k.q = joint_state_from_json(j["q"]);
  return k;
}

Json to_json(const Demonstration& d) {
  Json kps = Json::array();
  for (const KeyPoint& k : d.keypoints) kps.push_back(to_json(k));
  Json kfs = Json::array();
  for (const KeyFrame& k : d.keyframes) kfs.push_back(to_json(k));
  return {{"format", "demoforge.demonstration"},
          {"version", 1},
          {"language_goal", d.language_goal},
          {"scene_ref", d.scene_ref},
          {"mode", std::string(mode_name(d.mode))},
          {"base_pose", to_json(d.base_pose)},
          {"keypoints", kps},
          {"trajectory", to_json(d.trajectory)},
          {"keyframes", kfs}};
}

Demonstration demonstration_from_json(const Json& j) {
  constexpr std::string_view w = "demonstration";
  check_keys(j,
             {"format", "version", "language_goal", "scene_ref", "mode", "base_pose", "keypoints", "trajectory",
              "keyframes"},
             {"format", "version", "language_goal", "scene_ref", "mode", "base_pose", "keypoints", "trajectory",
              "keyframes"},
             w);
  if (get_string(j, "format", w) != "demoforge.demonstration") schema(w, "wrong format");
  if (get_int(j, "version", w) != 1) schema(w, "unsupported version");
  Demonstration d;
  d.language_goal = get_string(j, "language_goal", w);
  d.scene_ref = get_string(j, "scene_ref", w);
  try {
    d.mode = parse_mode(get_string(j, "mode", w));
  } catch (const Error& e) {
    schema(w, e.what());
  }
  d.base_pose = transform_from_json(j["base_pose"]);
  if (!j["keypoints"].is_array() || !j["keyframes"].is_array()) schema(w, "keypoints/keyframes must be arrays");
  for (const Json& k : j["keypoints"]) d.keypoints.push_back(keypoint_from_json(k));
  d.trajectory = trajectory_from_json(j["trajectory"]);
  for (const Json& k : j["keyframes"]) {
    d.keyframes.push_back(keyframe_from_json(k));
    if (d.keyframes.back().index >= d.trajectory.size()) schema(w, "keyframe index outside the trajectory");
  }
  return d;
}

Json to_json(const DiscreteAction& a) {
  return {{"trans_index", a.trans_index}, {"rot_bins", a.rot_bins}, {"gripper", a.gripper}};
}

Json to_json(const HandPose6D& p) {
  return {{"frame", to_json(p.frame)}, {"aperture", p.aperture}, {"valid", p.valid}, {"timestamp", p.timestamp}};
}

HandPose6D hand_pose_from_json(const Json& j) {
  constexpr std::string_view w = "hand_pose";
  check_keys(j, {"frame", "aperture", "valid", "timestamp"}, {"frame", "aperture", "timestamp"}, w);
  HandPose6D p;
  p.frame = transform_from_json(j["frame"]);
  p.aperture = get_number(j, "aperture", w);
  if (p.aperture < 0.0) schema(w, "aperture must be >= 0");
  p.valid = j.contains("valid") ? get_bool(j, "valid", w) : true;
  p.timestamp = get_number(j, "timestamp", w);
  return p;
}

Json to_json(const FrameKeypoints& k) {
  Json pts = Json::array();
  for (int i = 0; i < kHandLandmarks; ++i) {
    pts.push_back(Json::array({k.keypoints.points[i].u, k.keypoints.points[i].v, k.keypoints.confidence[i]}));
  }
  return {{"frame", k.frame}, {"timestamp", k.keypoints.timestamp}, {"points", pts}};
}

FrameKeypoints frame_keypoints_from_json(const Json& j) {
  constexpr std::string_view w = "hand keypoints";
  check_keys(j, {"frame", "timestamp", "points"}, {"frame", "timestamp", "points"}, w);
  FrameKeypoints k;
  const std::int64_t frame = get_int(j, "frame", w);
  if (frame < 0) schema(w, "negative frame index");
  k.frame = static_cast<std::size_t>(frame);
  k.keypoints.timestamp = get_number(j, "timestamp", w);
  const Json& pts = j["points"];
  if (!pts.is_array() || pts.size() != kHandLandmarks) schema(w, "expected 21 points");
  for (int i = 0; i < kHandLandmarks; ++i) {
    const auto p = numbers(pts[static_cast<std::size_t>(i)], 3, w);
    k.keypoints.points[i] = {p[0], p[1]};
    k.keypoints.confidence[i] = p[2];
  }
  try {
    k.keypoints.validate();
  } catch (const Error& e) {
    schema(w, e.what());
  }
  return k;
}

std::string dump(const Json& j) { return j.dump() + "\n"; }
std::string dump_pretty(const Json& j) { return j.dump(2) + "\n"; }

std::vector<std::uint8_t> read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string read_text(const std::filesystem::path& p) {
  const auto bytes = read_file(p);
  return {bytes.begin(), bytes.end()};
}

void write_file(const std::filesystem::path& p, std::span<const std::uint8_t> bytes) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::filesystem::path tmp = p;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::kIo, "short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, p, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot rename " + tmp.string() + ": " + ec.message());
}

void write_text(const std::filesystem::path& p, std::string_view text) {
  write_file(p, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  std::size_t off = 0;
  while (off < bytes.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - off, 1u << 30));
    crc = crc32(crc, bytes.data() + off, chunk);
    off += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

std::string crc32_hex(std::uint32_t crc) {
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08x", crc);
  return buf;
}

}  // namespace demoforge
