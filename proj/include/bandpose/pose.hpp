#pragma once

#include <array>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "bandpose/association.hpp"
#include "bandpose/camera.hpp"
#include "bandpose/detection.hpp"
#include "bandpose/pointer_spec.hpp"

namespace bandpose {

/// Predicted contour points of one edge: `plus` uses +u, `minus` uses -u.
struct PredictedEdge {
  std::size_t edge = 0;
  Vec2 plus = Vec2::Zero();
  Vec2 minus = Vec2::Zero();
};

/// Unit normal of the plane through the camera centre and the pointer axis.
/// Throws DegenerateGeometry if the axis passes through the centre.
Vec3 contour_normal(const PointerPose& pose, const CameraModel& camera);

/// Ideal (undistorted) projections of X0 + b d +- w u for the given edges.
std::vector<PredictedEdge> project_pointer_edges(const PointerPose& pose, const CameraModel& camera,
                                                 const PointerSpec& spec, std::span<const std::size_t> edges);

/// One observed edge: pointer edge index and its two undistorted contour
/// points. The sign of u each point is paired with is fixed once per fit.
struct EdgeObservation {
  std::size_t edge = 0;
  Vec2 a = Vec2::Zero();
  Vec2 b = Vec2::Zero();
};

std::vector<EdgeObservation> observations_from(const DetectionResult& result, const Correspondence& corr,
                                               const CameraModel& camera);

/// Five pose parameters: tip (3) then two angles in a spherical frame whose
/// pole is `anchor`.
struct PoseParameterization {
  Vec3 anchor = Vec3::UnitZ();
  Vec3 e1 = Vec3::UnitX();
  Vec3 e2 = Vec3::UnitY();

  explicit PoseParameterization(const Vec3& anchor_direction);
  Eigen::Matrix<double, 5, 1> encode(const PointerPose& pose) const;
  PointerPose decode(const Eigen::Matrix<double, 5, 1>& x) const;
  /// d(direction)/d(angles) at `x`.
  Eigen::Matrix<double, 3, 2> direction_jacobian(const Eigen::Matrix<double, 5, 1>& x) const;
};

/// Stacked residuals (predicted minus observed, x then y, a then b per edge)
/// and their analytic Jacobian with respect to the five parameters.
/// `signs[k]` is the u sign paired with observation k's `a` point.
struct ResidualModel {
  const CameraModel* camera = nullptr;
  const PointerSpec* spec = nullptr;
  std::vector<EdgeObservation> obs;
  std::vector<int> signs;
  PoseParameterization param;

  Eigen::VectorXd residuals(const Eigen::Matrix<double, 5, 1>& x) const;
  Eigen::VectorXd residuals(const Eigen::Matrix<double, 5, 1>& x, Eigen::MatrixXd& jacobian) const;
};

/// Chooses, per observation, the u sign for `a` minimising the distance to
/// the prediction at `pose`.
std::vector<int> assign_signs(const PointerPose& pose, const CameraModel& camera, const PointerSpec& spec,
                              std::span<const EdgeObservation> obs);

struct InitialPose {
  PointerPose pose;
  double v0 = 0.0;  // camera-frame depth of the tip, mm
  double vn = 0.0;  // camera-frame depth at the last edge, mm
};

/// Linear depth initialisation from the axis projections of the tip and the
/// last edge. `axis_points` are undistorted points x~_i on the image axis,
/// paired with pointer edge indices.
InitialPose init_depths_linear(const Vec2& tip_px, const Vec2& last_px,
                               std::span<const std::pair<std::size_t, Vec2>> axis_points, const CameraModel& camera,
                               const PointerSpec& spec);
InitialPose init_depths_linear(const Correspondence& corr, const DetectionResult& result, const CameraModel& camera,
                               const PointerSpec& spec);

struct EdgeResidual {
  std::size_t edge = 0;
  Vec2 a = Vec2::Zero();  // predicted minus observed
  Vec2 b = Vec2::Zero();
};

struct LmOptions {
  double initial_lambda = 1e-3;
  double relative_tolerance = 1e-10;
  int max_iterations = 200;
};

struct PoseEstimate {
  PointerPose pose;
  double rms = 0.0;  // px over all contour points
  std::vector<EdgeResidual> residuals;
  Correspondence correspondence;
  double v0 = 0.0;
  double vn = 0.0;
  int iterations = 0;
  std::vector<double> cost_history;  // cost after each accepted step, first entry initial
};

/// LM refinement from `initial`. Throws InsufficientCorrespondences for fewer
/// than three edges and Numeric on non-finite residuals.
PoseEstimate refine_pose_lm(const PointerPose& initial, std::span<const EdgeObservation> obs,
                            const CameraModel& camera, const PointerSpec& spec, const LmOptions& options = {});
PoseEstimate refine_pose_lm(const PointerPose& initial, const Correspondence& corr, const DetectionResult& result,
                            const CameraModel& camera, const PointerSpec& spec, const LmOptions& options = {});

/// Init plus LM per hypothesis; lowest rms wins, ties to the lower index.
PoseEstimate estimate_pose(const DetectionResult& result, std::span<const Correspondence> hypotheses,
                           const CameraModel& camera, const PointerSpec& spec, const LmOptions& options = {});

}  // namespace bandpose
