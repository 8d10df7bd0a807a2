#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "bandpose/camera.hpp"
#include "bandpose/imaging.hpp"
#include "bandpose/pointer_spec.hpp"

namespace bandpose {

struct Occluder {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // image rectangle, px (pixel centres at integers)
  Rgb color{0.5f, 0.5f, 0.5f};

  bool contains(const Vec2& p) const { return p.x() >= x0 && p.x() <= x1 && p.y() >= y0 && p.y() <= y1; }
};

/// Axial interval [s0, s1] (mm from tip) pulled toward white by `desaturation`.
struct Highlight {
  double s0 = 0, s1 = 0;
  double desaturation = 0.8;
};

struct Distractor {
  Vec2 center = Vec2::Zero();
  double radius = 0;
  Rgb color{};
};

struct SceneSpec {
  PointerPose pose;
  PointerSpec spec;
  std::map<ClassId, Rgb> band_colors;
  Rgb background{0.45f, 0.45f, 0.45f};
  double blur_sigma = 0.0;   // px
  double noise_sigma = 0.0;  // channel units
  std::vector<Occluder> occluders{};
  std::vector<Highlight> highlights{};
  std::vector<Distractor> distractors{};
  std::uint64_t seed = 0;

  void validate() const;
};

struct GroundTruthEdge {
  std::size_t edge = 0;
  Vec2 plus = Vec2::Zero();   // +u contour point, distorted pixel coordinates
  Vec2 minus = Vec2::Zero();
  bool in_image = false;
  bool occluded = false;

  bool visible() const { return in_image && !occluded; }
};

struct GroundTruth {
  PointerPose pose;
  std::vector<GroundTruthEdge> edges;
};

struct Rendering {
  RasterImage image;
  GroundTruth truth;
};

/// Ground-truth contour points, computed in the camera frame without the
/// pose module.
GroundTruth ground_truth(const SceneSpec& scene, const CameraModel& camera);

/// Ray-cast 4x4 supersampled rendering, then blur, then clamped noise.
Rendering render(const SceneSpec& scene, const CameraModel& camera);

struct SweepCell {
  double depth_mm = 0;
  double angle_deg = 0;
  SceneSpec scene;
};

/// Pointer midpoint on the optical axis at each depth, tilted away from the
/// image plane by each angle about the camera y axis. Seeds derive from
/// `seed` and the cell index.
std::vector<SweepCell> sweep(const std::vector<double>& depths_mm, const std::vector<double>& angles_deg,
                             const SceneSpec& scene_template, const CameraModel& camera, std::uint64_t seed = 0);

/// Pose with the given axis midpoint (camera frame) and tilt angle.
PointerPose sweep_pose(double depth_mm, double angle_deg, double length_mm, const CameraModel& camera);

/// Tip sliding once around a square in the camera plane z = depth_mm.
struct SquareTrace {
  int frames = 200;
  double side_mm = 37.0;
  double depth_mm = 480.0;
  double center_x_mm = -100.0;
  double center_y_mm = 0.0;
};

/// One pose per frame, tip on the square perimeter.
std::vector<PointerPose> square_trace(const SquareTrace& trace, const CameraModel& camera);

/// The 251 mm, 10-edge pointer used throughout the evaluation.
PointerSpec reference_pointer();
std::map<ClassId, Rgb> reference_band_colors();
CameraModel reference_camera();

/// Calibration mask: every pixel whose centre ray hits the pointer gets the
/// band's class id.
LabelImage render_label_mask(const SceneSpec& scene, const CameraModel& camera);

}  // namespace bandpose
