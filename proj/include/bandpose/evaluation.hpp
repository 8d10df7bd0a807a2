#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "bandpose/color_model.hpp"
#include "bandpose/config.hpp"
#include "bandpose/error.hpp"
#include "bandpose/point_cloud.hpp"
#include "bandpose/pose.hpp"
#include "bandpose/synthetic.hpp"

namespace bandpose {

struct PrincipalAxes3 {
  Vec3 mean = Vec3::Zero();
  Vec3 first = Vec3::UnitZ();  // unit, largest variance
  Eigen::Vector3d variances = Eigen::Vector3d::Zero();  // descending
};

PrincipalAxes3 principal_axes3(const std::vector<Vec3>& pts);

/// Angle between two axes ignoring sign, degrees.
double axis_angle_deg(const Vec3& a, const Vec3& b);

struct EvalSpec {
  std::vector<double> depths_mm{400, 452.5, 505, 557.5, 610};
  std::vector<double> angles_deg{0, 17.75, 35.5, 53.25, 71};
  int trials = 1;
  double image_noise_sigma = 0.0;  // channel units, re-rendered per trial
  double point_noise_sigma = 0.0;  // px on detected points, per trial
  double blur_sigma_px = 0.0;
  std::uint64_t seed = 1;
};

struct EvalCell {
  double depth_mm = 0;
  double angle_deg = 0;
  int trials = 0;
  int failures = 0;
  double rms_tip_mm = 0;  // over successful trials
  double rms_direction_deg = 0;
  Vec3 first_component = Vec3::Zero();  // zero when fewer than 3 successes
};

/// Renders each sweep cell and runs the pipeline; failures are counted.
std::vector<EvalCell> run_eval(const EvalSpec& spec, const SceneSpec& scene_template, const Config& config,
                               const ColorClassSet& colors);
void write_eval_csv(const std::filesystem::path& path, const std::vector<EvalCell>& cells);

struct FrameRecord {
  std::string name;
  std::optional<PoseEstimate> estimate;
  std::optional<ErrorKind> failure;
  std::string failure_stage;
  std::string failure_message;
};

/// Processes frames independently in lexicographic order.
std::vector<FrameRecord> track_frames(const std::vector<std::filesystem::path>& frames, const Config& config,
                                      const ColorClassSet& colors);
PointCloud cloud_from(const std::vector<FrameRecord>& records);
void write_poses_csv(const std::filesystem::path& path, const std::vector<FrameRecord>& records);

/// Sorted *.ppm files of a directory.
std::vector<std::filesystem::path> list_frames(const std::filesystem::path& dir);

/// Colour model from a rendering of `scene` and its label mask.
ColorClassSet calibrate_from_scene(const SceneSpec& scene, const CameraModel& camera, double min_saturation = 0.25);

}  // namespace bandpose
