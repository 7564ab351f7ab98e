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

#ifndef DEMOFORGE_GEOM_HPP_
#define DEMOFORGE_GEOM_HPP_

#include <cstdint>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace demoforge {

// Conventions used across the library: right-handed frames, meters, radians.
// Camera frames are +z forward, +x right, +y down.

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

// Proper rigid motion stored as unit quaternion + translation. All
// constructors and compositions renormalize the quaternion.
class RigidTransform {
 public:
  RigidTransform() : rotation_(Eigen::Quaterniond::Identity()), translation_(Vec3::Zero()) {}
  RigidTransform(const Eigen::Quaterniond& rotation, const Vec3& translation);

  static RigidTransform identity() { return {}; }
  static RigidTransform from_translation(const Vec3& t);
  static RigidTransform from_rotation(const Mat3& r, const Vec3& t = Vec3::Zero());
  static RigidTransform from_axis_angle(const Vec3& axis, double angle,
                                        const Vec3& t = Vec3::Zero());
  // Homogeneous 4x4; the upper-left block must be a rotation matrix.
  static RigidTransform from_matrix(const Mat4& m);

  const Eigen::Quaterniond& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }
  Mat3 rotation_matrix() const { return rotation_.toRotationMatrix(); }
  Mat4 matrix() const;

  Vec3 apply(const Vec3& p) const { return rotation_ * p + translation_; }
  Vec3 rotate(const Vec3& v) const { return rotation_ * v; }
  RigidTransform inverse() const;

  // (a * b).apply(p) == a.apply(b.apply(p))
  friend RigidTransform operator*(const RigidTransform& a, const RigidTransform& b);

 private:
  Eigen::Quaterniond rotation_;
  Vec3 translation_;
};

RigidTransform compose(const RigidTransform& a, const RigidTransform& b);

// Geodesic angle between two rotations, radians in [0, pi].
double rotation_distance(const Eigen::Quaterniond& a, const Eigen::Quaterniond& b);
// Axis-angle vector of target * current^T.
Vec3 rotation_error(const Mat3& target, const Mat3& current);
// Rotation vector (axis * angle) of a rotation matrix, angle in [0, pi].
Vec3 log_so3(const Mat3& r);

struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  // Throws InvalidArgument unless fx, fy > 0 and the principal point lies in
  // the image.
  void validate() const;
  bool contains(double u, double v) const {
    return u >= 0.0 && v >= 0.0 && u < width && v < height;
  }
};

struct Pixel {
  double u = 0.0;
  double v = 0.0;
};

// Pinhole inverse. Throws InvalidDepth for non-positive or non-finite depth,
// OutOfBounds for a pixel outside [0, w) x [0, h).
Vec3 unproject(Pixel pixel, double depth, const CameraIntrinsics& k);
// Throws BehindCamera when point.z <= 0. The result may fall outside the image.
Pixel project(const Vec3& point, const CameraIntrinsics& k);

struct DepthFrame {
  int width = 0;
  int height = 0;
  // Row-major meters; NaN marks an invalid sample.
  std::vector<float> depth;
  double timestamp = 0.0;

  // Normalizes zeros and negatives to NaN and checks the size.
  static DepthFrame from_raw(int width, int height, std::vector<float> depth,
                             double timestamp);
  float at(int u, int v) const { return depth[static_cast<std::size_t>(v) * width + u]; }
  bool valid(int u, int v) const {
    const float d = at(u, v);
    return d == d && d > 0.0f;
  }
};

struct RgbdFrame {
  std::vector<std::uint8_t> color;  // row-major RGB8
  DepthFrame depth;
  RigidTransform camera_pose;  // camera-to-world
  CameraIntrinsics intrinsics;
  double timestamp = 0.0;

  int width() const { return depth.width; }
  int height() const { return depth.height; }
  // Throws DimensionMismatch / InvalidArgument on inconsistent buffers.
  void validate() const;
};

// Nearest-neighbour resample of a depth map to new dimensions; used at ingest
// when the sensor depth resolution differs from color.
DepthFrame resample_depth(const DepthFrame& src, int width, int height);

}  // namespace demoforge

#endif  // DEMOFORGE_GEOM_HPP_
