#include "bandpose/pose.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include "bandpose/error.hpp"

namespace bandpose {

namespace {

using Vec5 = Eigen::Matrix<double, 5, 1>;

Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return s;
}

// Pixel position and d(pixel)/d(world point).
Vec2 project_with_jacobian(const CameraModel& cam, const Vec3& X, Eigen::Matrix<double, 2, 3>* J) {
  const Vec3 q = cam.K * cam.to_camera(X);
  if (!(q.z() > 0.0)) throw Error(ErrorKind::BehindCamera, "pose", "contour point is not in front of the camera");
  if (J) {
    Eigen::Matrix<double, 2, 3> dq;
    dq << 1.0 / q.z(), 0.0, -q.x() / (q.z() * q.z()), 0.0, 1.0 / q.z(), -q.y() / (q.z() * q.z());
    *J = dq * cam.K * cam.R;
  }
  return {q.x() / q.z(), q.y() / q.z()};
}

Vec2 undistort_one(const Vec2& p, const DistortionModel& model) {
  if (model.is_identity()) return p;
  const std::array<Vec2, 1> in{p};
  return undistort_points(in, model)[0];
}

}  // namespace

Vec3 contour_normal(const PointerPose& pose, const CameraModel& camera) {
  const Vec3 m = pose.direction.cross(pose.tip - camera.center());
  const double len = m.norm();
  if (!(len > 1e-12 * std::max(1.0, (pose.tip - camera.center()).norm()))) {
    throw Error(ErrorKind::DegenerateGeometry, "pose", "pointer axis passes through the camera centre");
  }
  return m / len;
}

std::vector<PredictedEdge> project_pointer_edges(const PointerPose& pose, const CameraModel& camera,
                                                 const PointerSpec& spec, std::span<const std::size_t> edges) {
  const Vec3 u = contour_normal(pose, camera);
  std::vector<PredictedEdge> out;
  out.reserve(edges.size());
  for (std::size_t i : edges) {
    const Vec3 axis = pose.tip + spec.distance(i) * pose.direction;
    const double w = spec.radius(i);
    out.push_back({i, camera.project(axis + w * u), camera.project(axis - w * u)});
  }
  return out;
}

std::vector<EdgeObservation> observations_from(const DetectionResult& result, const Correspondence& corr,
                                               const CameraModel& camera) {
  std::vector<EdgeObservation> obs;
  obs.reserve(corr.matches.size());
  for (const auto& [k, i] : corr.matches) {
    const EdgePointPair& e = result.edges.at(k);
    obs.push_back({i, undistort_one(e.a, camera.distortion), undistort_one(e.b, camera.distortion)});
  }
  return obs;
}

PoseParameterization::PoseParameterization(const Vec3& anchor_direction) {
  anchor = anchor_direction.normalized();
  // Helper axis least aligned with the anchor.
  Eigen::Index axis = 0;
  anchor.cwiseAbs().minCoeff(&axis);
  const Vec3 helper = Vec3::Unit(axis);
  e1 = (helper - helper.dot(anchor) * anchor).normalized();
  e2 = anchor.cross(e1);
}

Vec5 PoseParameterization::encode(const PointerPose& pose) const {
  const Vec3 d = pose.direction.normalized();
  Vec5 x;
  x.head<3>() = pose.tip;
  x(3) = std::atan2(d.dot(e1), d.dot(anchor));
  x(4) = std::asin(std::clamp(d.dot(e2), -1.0, 1.0));
  return x;
}

PointerPose PoseParameterization::decode(const Vec5& x) const {
  const double az = x(3), el = x(4);
  PointerPose p;
  p.tip = x.head<3>();
  p.direction = std::cos(el) * (std::cos(az) * anchor + std::sin(az) * e1) + std::sin(el) * e2;
  p.direction.normalize();
  return p;
}

Eigen::Matrix<double, 3, 2> PoseParameterization::direction_jacobian(const Vec5& x) const {
  const double az = x(3), el = x(4);
  Eigen::Matrix<double, 3, 2> J;
  J.col(0) = std::cos(el) * (-std::sin(az) * anchor + std::cos(az) * e1);
  J.col(1) = -std::sin(el) * (std::cos(az) * anchor + std::sin(az) * e1) + std::cos(el) * e2;
  return J;
}

Eigen::VectorXd ResidualModel::residuals(const Vec5& x) const {
  const PointerPose pose = param.decode(x);
  const Vec3 u = contour_normal(pose, *camera);
  Eigen::VectorXd r(static_cast<Eigen::Index>(4 * obs.size()));
  for (std::size_t k = 0; k < obs.size(); ++k) {
    const Vec3 axis = pose.tip + spec->distance(obs[k].edge) * pose.direction;
    const double sw = signs[k] * spec->radius(obs[k].edge);
    const auto row = static_cast<Eigen::Index>(4 * k);
    r.segment<2>(row) = project_with_jacobian(*camera, axis + sw * u, nullptr) - obs[k].a;
    r.segment<2>(row + 2) = project_with_jacobian(*camera, axis - sw * u, nullptr) - obs[k].b;
  }
  return r;
}

Eigen::VectorXd ResidualModel::residuals(const Vec5& x, Eigen::MatrixXd& jacobian) const {
  const PointerPose pose = param.decode(x);
  const Vec3 rel = pose.tip - camera->center();
  const Vec3 m = pose.direction.cross(rel);
  const Vec3 u = contour_normal(pose, *camera);
  // du/dm for u = m / |m|
  const Mat3 du_dm = (Mat3::Identity() - u * u.transpose()) / m.norm();
  const Mat3 du_dtip = du_dm * skew(pose.direction);
  const Mat3 du_dd = -du_dm * skew(rel);
  const Eigen::Matrix<double, 3, 2> dd_dang = param.direction_jacobian(x);

  const auto rows = static_cast<Eigen::Index>(4 * obs.size());
  Eigen::VectorXd r(rows);
  jacobian.resize(rows, 5);
  for (std::size_t k = 0; k < obs.size(); ++k) {
    const double b = spec->distance(obs[k].edge);
    const Vec3 axis = pose.tip + b * pose.direction;
    for (int side = 0; side < 2; ++side) {
      const double sw = (side == 0 ? 1 : -1) * signs[k] * spec->radius(obs[k].edge);
      const Vec3 X = axis + sw * u;
      Eigen::Matrix<double, 2, 3> dx_dX;
      const Vec2 px = project_with_jacobian(*camera, X, &dx_dX);
      const auto row = static_cast<Eigen::Index>(4 * k + 2 * side);
      r.segment<2>(row) = px - (side == 0 ? obs[k].a : obs[k].b);
      const Mat3 dX_dtip = Mat3::Identity() + sw * du_dtip;
      const Mat3 dX_dd = b * Mat3::Identity() + sw * du_dd;
      jacobian.block<2, 3>(row, 0) = dx_dX * dX_dtip;
      jacobian.block<2, 2>(row, 3) = dx_dX * dX_dd * dd_dang;
    }
  }
  return r;
}

std::vector<int> assign_signs(const PointerPose& pose, const CameraModel& camera, const PointerSpec& spec,
                              std::span<const EdgeObservation> obs) {
  std::vector<std::size_t> edges;
  for (const auto& o : obs) edges.push_back(o.edge);
  const auto pred = project_pointer_edges(pose, camera, spec, edges);
  std::vector<int> signs;
  for (std::size_t k = 0; k < obs.size(); ++k) {
    const double keep = (pred[k].plus - obs[k].a).squaredNorm() + (pred[k].minus - obs[k].b).squaredNorm();
    const double swap = (pred[k].minus - obs[k].a).squaredNorm() + (pred[k].plus - obs[k].b).squaredNorm();
    signs.push_back(keep <= swap ? 1 : -1);
  }
  return signs;
}

InitialPose init_depths_linear(const Vec2& tip_px, const Vec2& last_px,
                               std::span<const std::pair<std::size_t, Vec2>> axis_points, const CameraModel& camera,
                               const PointerSpec& spec) {
  if (axis_points.size() < 3) {
    throw Error(ErrorKind::InsufficientCorrespondences, "pose-init", "need at least three matched edges");
  }
  double spread = 0.0;
  for (const auto& [i, x] : axis_points) spread = std::max(spread, (x - axis_points[0].second).norm());
  if (spread < 1e-6) throw Error(ErrorKind::DegenerateInitialization, "pose-init", "axis points coincide");

  const double bn = spec.distance(spec.edge_count() - 1);
  const Vec3 r0 = camera.back_project(tip_px);
  const Vec3 rn = camera.back_project(last_px);
  const Vec3 h0 = camera.K * r0;
  const Vec3 hn = camera.K * rn;
  Eigen::MatrixXd A(static_cast<Eigen::Index>(3 * axis_points.size()), 2);
  for (std::size_t k = 0; k < axis_points.size(); ++k) {
    const auto& [i, x] = axis_points[k];
    const double alpha = spec.distance(i) / bn;
    const Mat3 S = skew(Vec3(x.x(), x.y(), 1.0));
    const auto row = static_cast<Eigen::Index>(3 * k);
    A.block<3, 1>(row, 0) = (1.0 - alpha) * S * h0;
    A.block<3, 1>(row, 1) = alpha * S * hn;
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
  const auto sv = svd.singularValues();
  if (!(sv(0) > 1e-12)) throw Error(ErrorKind::DegenerateInitialization, "pose-init", "rank-deficient system");
  Eigen::Vector2d v = svd.matrixV().col(1);
  if (v(0) < 0.0) v = -v;
  if (!(v(0) > 0.0) || !(v(1) > 0.0)) {
    throw Error(ErrorKind::BehindCamera, "pose-init", "no positive-depth solution for tip and tail");
  }
  const double scale = bn / (v(1) * rn - v(0) * r0).norm();
  if (!std::isfinite(scale)) throw Error(ErrorKind::DegenerateInitialization, "pose-init", "tip and tail coincide");
  v *= scale;

  const Vec3 X0 = v(0) * r0;
  const Vec3 Xn = v(1) * rn;
  InitialPose init;
  init.v0 = v(0);
  init.vn = v(1);
  init.pose.tip = camera.to_world(X0);
  init.pose.direction = (camera.R.transpose() * (Xn - X0)).normalized();
  return init;
}

InitialPose init_depths_linear(const Correspondence& corr, const DetectionResult& result, const CameraModel& camera,
                               const PointerSpec& spec) {
  if (corr.matches.size() < 3) {
    throw Error(ErrorKind::InsufficientCorrespondences, "pose-init", "need at least three matched edges");
  }
  std::vector<AxisMatch> am;
  for (const auto& [k, i] : corr.matches) am.push_back({result.edges.at(k).axis_coordinate, spec.distance(i)});
  Homography1D h = corr.homography;
  try {
    h = fit_homography_1d_lsq(am);
  } catch (const Error&) {
  }
  const double t0 = h.inverse(0.0);
  const double tn = h.inverse(spec.distance(spec.edge_count() - 1));
  if (!std::isfinite(t0) || !std::isfinite(tn)) {
    throw Error(ErrorKind::DegenerateInitialization, "pose-init", "homography inverse undefined at tip or tail");
  }
  const Vec2 tip_px = undistort_one(result.l2.at(t0), camera.distortion);
  const Vec2 last_px = undistort_one(result.l2.at(tn), camera.distortion);
  std::vector<std::pair<std::size_t, Vec2>> axis_points;
  for (const auto& [k, i] : corr.matches) {
    axis_points.emplace_back(i, undistort_one(result.l2.at(result.edges[k].axis_coordinate), camera.distortion));
  }
  return init_depths_linear(tip_px, last_px, axis_points, camera, spec);
}

PoseEstimate refine_pose_lm(const PointerPose& initial, std::span<const EdgeObservation> obs,
                            const CameraModel& camera, const PointerSpec& spec, const LmOptions& options) {
  if (obs.size() < 3) {
    throw Error(ErrorKind::InsufficientCorrespondences, "pose-lm", "need at least three matched edges");
  }
  ResidualModel model{&camera, &spec, {obs.begin(), obs.end()}, assign_signs(initial, camera, spec, obs),
                      PoseParameterization(initial.direction)};
  Vec5 x = model.param.encode(initial);

  auto finite = [](const Eigen::VectorXd& r) { return r.allFinite(); };
  Eigen::MatrixXd J;
  Eigen::VectorXd r = model.residuals(x, J);
  if (!finite(r) || !J.allFinite()) throw Error(ErrorKind::Numeric, "pose-lm", "non-finite residual at start");
  double cost = r.squaredNorm();

  PoseEstimate est;
  est.cost_history.push_back(cost);
  double lambda = options.initial_lambda;
  int it = 0;
  for (; it < options.max_iterations; ++it) {
    const Eigen::Matrix<double, 5, 5> JtJ = J.transpose() * J;
    const Vec5 g = J.transpose() * r;
    bool accepted = false;
    bool converged = false;
    while (lambda < 1e16) {
      Eigen::Matrix<double, 5, 5> A = JtJ;
      for (int d = 0; d < 5; ++d) A(d, d) += lambda * std::max(JtJ(d, d), 1e-12);
      const Vec5 step = A.ldlt().solve(-g);
      const Vec5 x_new = x + step;
      Eigen::VectorXd r_new;
      try {
        r_new = model.residuals(x_new);
      } catch (const Error&) {
        lambda *= 10.0;
        continue;
      }
      const double c_new = finite(r_new) ? r_new.squaredNorm() : std::numeric_limits<double>::infinity();
      if (c_new < cost) {
        const double rel = (cost - c_new) / std::max(cost, std::numeric_limits<double>::min());
        x = x_new;
        cost = c_new;
        r = model.residuals(x, J);
        est.cost_history.push_back(cost);
        lambda = std::max(lambda / 10.0, 1e-15);
        accepted = true;
        converged = rel < options.relative_tolerance;
        break;
      }
      lambda *= 10.0;
    }
    if (!accepted || converged || cost == 0.0) break;
  }

  est.pose = model.param.decode(x);
  est.iterations = it;
  const Eigen::VectorXd rf = model.residuals(x);
  if (!finite(rf)) throw Error(ErrorKind::Numeric, "pose-lm", "non-finite residual");
  est.rms = std::sqrt(rf.squaredNorm() / static_cast<double>(2 * obs.size()));
  for (std::size_t k = 0; k < obs.size(); ++k) {
    const auto row = static_cast<Eigen::Index>(4 * k);
    est.residuals.push_back({obs[k].edge, rf.segment<2>(row), rf.segment<2>(row + 2)});
  }
  const Vec3 tip_cam = camera.to_camera(est.pose.tip);
  const Vec3 last_cam = camera.to_camera(est.pose.tip + spec.distance(spec.edge_count() - 1) * est.pose.direction);
  est.v0 = tip_cam.z();
  est.vn = last_cam.z();
  return est;
}

PoseEstimate refine_pose_lm(const PointerPose& initial, const Correspondence& corr, const DetectionResult& result,
                            const CameraModel& camera, const PointerSpec& spec, const LmOptions& options) {
  const auto obs = observations_from(result, corr, camera);
  PoseEstimate est = refine_pose_lm(initial, obs, camera, spec, options);
  est.correspondence = corr;
  return est;
}

PoseEstimate estimate_pose(const DetectionResult& result, std::span<const Correspondence> hypotheses,
                           const CameraModel& camera, const PointerSpec& spec, const LmOptions& options) {
  if (hypotheses.empty()) throw Error(ErrorKind::PoseFailure, "pose", "no association hypotheses");
  const auto n = static_cast<std::ptrdiff_t>(hypotheses.size());
  std::vector<std::optional<PoseEstimate>> estimates(hypotheses.size());
  std::vector<std::string> failures(hypotheses.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t h = 0; h < n; ++h) {
    try {
      const Correspondence& corr = hypotheses[h];
      const InitialPose init = init_depths_linear(corr, result, camera, spec);
      PoseEstimate est = refine_pose_lm(init.pose, corr, result, camera, spec, options);
      est.v0 = init.v0;
      est.vn = init.vn;
      estimates[h] = std::move(est);
    } catch (const Error& e) {
      failures[h] = e.what();
    }
  }
  std::optional<std::size_t> best;
  for (std::size_t h = 0; h < estimates.size(); ++h) {
    if (estimates[h] && (!best || estimates[h]->rms < estimates[*best]->rms)) best = h;
  }
  if (!best) {
    std::ostringstream msg;
    msg << "every hypothesis failed:";
    for (std::size_t h = 0; h < failures.size(); ++h) msg << " [" << h << "] " << failures[h] << ';';
    throw Error(ErrorKind::PoseFailure, "pose", msg.str());
  }
  return std::move(*estimates[*best]);
}

}  // namespace bandpose
