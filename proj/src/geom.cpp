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

#include "demoforge/geom.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "demoforge/error.hpp"

namespace demoforge {

RigidTransform::RigidTransform(const Eigen::Quaterniond& rotation, const Vec3& translation)
    : rotation_(rotation.normalized()), translation_(translation) {}

RigidTransform RigidTransform::from_translation(const Vec3& t) {
  return RigidTransform(Eigen::Quaterniond::Identity(), t);
}

RigidTransform RigidTransform::from_rotation(const Mat3& r, const Vec3& t) {
  return RigidTransform(Eigen::Quaterniond(r), t);
}

RigidTransform RigidTransform::from_axis_angle(const Vec3& axis, double angle, const Vec3& t) {
  return RigidTransform(Eigen::Quaterniond(Eigen::AngleAxisd(angle, axis.normalized())), t);
}

RigidTransform RigidTransform::from_matrix(const Mat4& m) {
  return from_rotation(m.topLeftCorner<3, 3>(), m.topRightCorner<3, 1>());
}

Mat4 RigidTransform::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = rotation_matrix();
  m.topRightCorner<3, 1>() = translation_;
  return m;
}

RigidTransform RigidTransform::inverse() const {
  const Eigen::Quaterniond inv = rotation_.conjugate();
  return RigidTransform(inv, -(inv * translation_));
}

RigidTransform operator*(const RigidTransform& a, const RigidTransform& b) {
  return RigidTransform(a.rotation_ * b.rotation_, a.rotation_ * b.translation_ + a.translation_);
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) { return a * b; }

double rotation_distance(const Eigen::Quaterniond& a, const Eigen::Quaterniond& b) {
  return log_so3((a * b.conjugate()).normalized().toRotationMatrix()).norm();
}

Vec3 log_so3(const Mat3& r) {
  // Eigen's AngleAxis handles the pi neighbourhood; small angles go through
  // the skew part directly to keep precision.
  const double cos_angle = std::clamp((r.trace() - 1.0) * 0.5, -1.0, 1.0);
  const Vec3 skew(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  if (cos_angle > 0.99) {
    const double sin_angle = 0.5 * skew.norm();
    const double angle = std::asin(std::min(sin_angle, 1.0));
    if (sin_angle < 1e-15) return 0.5 * skew;
    return skew * (angle / (2.0 * sin_angle));
  }
  const Eigen::AngleAxisd aa(r);
  return aa.axis() * aa.angle();
}

Vec3 rotation_error(const Mat3& target, const Mat3& current) {
  return log_so3(target * current.transpose());
}

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "focal lengths must be positive");
  }
  if (width <= 0 || height <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "image size must be positive");
  }
  if (!(cx >= 0.0 && cx < width && cy >= 0.0 && cy < height)) {
    throw Error(ErrorCode::kInvalidArgument, "principal point outside image");
  }
}

Vec3 unproject(Pixel pixel, double depth, const CameraIntrinsics& k) {
  if (!std::isfinite(depth) || depth <= 0.0) {
    throw Error(ErrorCode::kInvalidDepth, "depth " + std::to_string(depth));
  }
  if (!k.contains(pixel.u, pixel.v)) {
    throw Error(ErrorCode::kOutOfBounds,
                "pixel (" + std::to_string(pixel.u) + ", " + std::to_string(pixel.v) + ")");
  }
  return Vec3((pixel.u - k.cx) * depth / k.fx, (pixel.v - k.cy) * depth / k.fy, depth);
}

Pixel project(const Vec3& point, const CameraIntrinsics& k) {
  if (!(point.z() > 0.0)) {
    throw Error(ErrorCode::kBehindCamera, "z = " + std::to_string(point.z()));
  }
  return {k.fx * point.x() / point.z() + k.cx, k.fy * point.y() / point.z() + k.cy};
}

DepthFrame DepthFrame::from_raw(int width, int height, std::vector<float> depth,
                                double timestamp) {
  if (width <= 0 || height <= 0 ||
      depth.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw Error(ErrorCode::kDimensionMismatch, "depth buffer does not match width x height");
  }
  for (float& d : depth) {
    if (!(d > 0.0f) || !std::isfinite(d)) d = std::numeric_limits<float>::quiet_NaN();
  }
  return DepthFrame{width, height, std::move(depth), timestamp};
}

void RgbdFrame::validate() const {
  intrinsics.validate();
  const auto pixels = static_cast<std::size_t>(depth.width) * depth.height;
  if (depth.depth.size() != pixels) {
    throw Error(ErrorCode::kDimensionMismatch, "depth buffer size");
  }
  if (color.size() != 3 * pixels) {
    throw Error(ErrorCode::kDimensionMismatch, "color buffer size");
  }
  if (intrinsics.width != depth.width || intrinsics.height != depth.height) {
    throw Error(ErrorCode::kDimensionMismatch, "intrinsics do not match frame size");
  }
}

DepthFrame resample_depth(const DepthFrame& src, int width, int height) {
  if (width <= 0 || height <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "resample target must be non-empty");
  }
  DepthFrame out;
  out.width = width;
  out.height = height;
  out.timestamp = src.timestamp;
  out.depth.resize(static_cast<std::size_t>(width) * height);
  for (int v = 0; v < height; ++v) {
    const int sv = std::min(src.height - 1, static_cast<int>((v + 0.5) * src.height / height));
    for (int u = 0; u < width; ++u) {
      const int su = std::min(src.width - 1, static_cast<int>((u + 0.5) * src.width / width));
      out.depth[static_cast<std::size_t>(v) * width + u] = src.at(su, sv);
    }
  }
  return out;
}

}  // namespace demoforge
