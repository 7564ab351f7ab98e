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

#ifndef DEMOFORGE_SERIALIZE_HPP_
#define DEMOFORGE_SERIALIZE_HPP_

// JSON forms of the core types. Parsers are strict: missing or unknown keys
// and wrong types throw Error(kSchema).

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "demoforge/demo.hpp"
#include "demoforge/export.hpp"
#include "demoforge/geom.hpp"
#include "demoforge/handtrack.hpp"
#include "demoforge/kinematics.hpp"

namespace demoforge {

using Json = nlohmann::json;

// Throws Schema naming the first key of `j` not in `allowed`, or the first
// missing key of `required`.
void check_keys(const Json& j, std::initializer_list<std::string_view> allowed,
                std::initializer_list<std::string_view> required, std::string_view what);
Json parse_json(std::string_view text, std::string_view what);

// Typed accessors that throw Schema instead of nlohmann exceptions.
double get_number(const Json& j, std::string_view key, std::string_view what);
std::int64_t get_int(const Json& j, std::string_view key, std::string_view what);
std::string get_string(const Json& j, std::string_view key, std::string_view what);
bool get_bool(const Json& j, std::string_view key, std::string_view what);
Vec3 vec3_from_json(const Json& j, std::string_view what);
Json vec3_to_json(const Vec3& v);

Json to_json(const RigidTransform& t);  // {"translation": [x,y,z], "rotation": [w,x,y,z]}
RigidTransform transform_from_json(const Json& j);
Json to_json(const CameraIntrinsics& k);
CameraIntrinsics intrinsics_from_json(const Json& j);
Json to_json(const JointState& q);
JointState joint_state_from_json(const Json& j);
Json to_json(const Trajectory& t);
Trajectory trajectory_from_json(const Json& j);
Json to_json(const KeyPoint& k);
KeyPoint keypoint_from_json(const Json& j);
Json to_json(const KeyFrame& k);
KeyFrame keyframe_from_json(const Json& j);
Json to_json(const Demonstration& d);
Demonstration demonstration_from_json(const Json& j);
Json to_json(const DiscreteAction& a);
Json to_json(const HandPose6D& p);
HandPose6D hand_pose_from_json(const Json& j);

// One line of the hand-keypoint stream:
// {"frame": i, "timestamp": t, "points": [[u, v, confidence] x 21]}
struct FrameKeypoints {
  std::size_t frame = 0;
  HandKeypoints2D keypoints;
};
Json to_json(const FrameKeypoints& k);
FrameKeypoints frame_keypoints_from_json(const Json& j);

// Compact, key-sorted serialisation with a trailing newline.
std::string dump(const Json& j);
// Pretty (2-space) serialisation with a trailing newline.
std::string dump_pretty(const Json& j);

std::vector<std::uint8_t> read_file(const std::filesystem::path& p);
std::string read_text(const std::filesystem::path& p);
// Writes via a temporary file and rename. Throws Io.
void write_file(const std::filesystem::path& p, std::span<const std::uint8_t> bytes);
void write_text(const std::filesystem::path& p, std::string_view text);

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes);
std::string crc32_hex(std::uint32_t crc);

}  // namespace demoforge

#endif  // DEMOFORGE_SERIALIZE_HPP_
