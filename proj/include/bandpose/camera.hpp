#pragma once

#include <Eigen/Core>

#include "bandpose/imaging.hpp"

namespace bandpose {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Pinhole camera P = K [R | t] plus lens distortion. World units are mm.
struct CameraModel {
  Mat3 K = Mat3::Identity();
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();
  DistortionModel distortion;
  int width = 0;
  int height = 0;

  /// Throws InvalidArgument unless R is a rotation and K is upper triangular
  /// with a positive diagonal.
  void validate() const;

  Eigen::Matrix<double, 3, 4> projection_matrix() const;
  Vec3 center() const { return -R.transpose() * t; }
  Vec3 to_camera(const Vec3& world) const { return R * world + t; }
  Vec3 to_world(const Vec3& cam) const { return R.transpose() * (cam - t); }

  /// Ideal (undistorted) projection; throws BehindCamera for depth <= 0.
  Vec2 project(const Vec3& world) const;
  /// Unit-depth camera-frame ray through an ideal pixel.
  Vec3 back_project(const Vec2& px) const;

  /// Camera with focal length `f` px, principal point at the image centre.
  static CameraModel simple(double focal_px, int width, int height);
};

/// Tip position (mm, world frame) and unit direction from tip to tail.
struct PointerPose {
  Vec3 tip = Vec3::Zero();
  Vec3 direction = Vec3::UnitX();
};

}  // namespace bandpose
