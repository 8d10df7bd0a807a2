#include "bandpose/camera.hpp"

#include <cmath>

#include <Eigen/LU>

#include "bandpose/error.hpp"

namespace bandpose {

void CameraModel::validate() const {
  if ((R * R.transpose() - Mat3::Identity()).norm() > 1e-9 || std::abs(R.determinant() - 1.0) > 1e-9) {
    throw Error(ErrorKind::InvalidArgument, "camera", "R must be a proper rotation");
  }
  if (K(1, 0) != 0.0 || K(2, 0) != 0.0 || K(2, 1) != 0.0 || !(K(0, 0) > 0) || !(K(1, 1) > 0) || !(K(2, 2) > 0)) {
    throw Error(ErrorKind::InvalidArgument, "camera", "K must be upper triangular with a positive diagonal");
  }
}

Eigen::Matrix<double, 3, 4> CameraModel::projection_matrix() const {
  Eigen::Matrix<double, 3, 4> Rt;
  Rt.leftCols<3>() = R;
  Rt.col(3) = t;
  return K * Rt;
}

Vec2 CameraModel::project(const Vec3& world) const {
  const Vec3 h = K * to_camera(world);
  if (!(h.z() > 0.0)) throw Error(ErrorKind::BehindCamera, "project", "point is not in front of the camera");
  return {h.x() / h.z(), h.y() / h.z()};
}

Vec3 CameraModel::back_project(const Vec2& px) const {
  const Vec3 ray = K.inverse() * Vec3(px.x(), px.y(), 1.0);
  return ray / ray.z();
}

CameraModel CameraModel::simple(double focal_px, int w, int h) {
  CameraModel cam;
  cam.K << focal_px, 0, (w - 1) / 2.0, 0, focal_px, (h - 1) / 2.0, 0, 0, 1;
  cam.width = w;
  cam.height = h;
  cam.distortion.fx = focal_px;
  cam.distortion.fy = focal_px;
  cam.distortion.cx = (w - 1) / 2.0;
  cam.distortion.cy = (h - 1) / 2.0;
  return cam;
}

}  // namespace bandpose
