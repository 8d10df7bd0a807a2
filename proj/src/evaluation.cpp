#include "bandpose/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>

#include <Eigen/Eigenvalues>

#include "bandpose/image_io.hpp"
#include "bandpose/pipeline.hpp"

namespace bandpose {

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::uint64_t trial_seed(std::uint64_t seed, std::size_t cell, int trial) {
  // splitmix64 over the combined key
  std::uint64_t z = seed ^ (0x9e3779b97f4a7c15ULL * (cell + 1)) ^ (0xd1b54a32d192ed03ULL * (trial + 1));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

PrincipalAxes3 principal_axes3(const std::vector<Vec3>& pts) {
  PrincipalAxes3 out;
  if (pts.empty()) return out;
  for (const auto& p : pts) out.mean += p;
  out.mean /= static_cast<double>(pts.size());
  Mat3 cov = Mat3::Zero();
  for (const auto& p : pts) cov += (p - out.mean) * (p - out.mean).transpose();
  cov /= static_cast<double>(pts.size());
  const Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
  // Eigenvalues come back ascending.
  out.variances = es.eigenvalues().reverse();
  out.first = es.eigenvectors().col(2);
  return out;
}

double axis_angle_deg(const Vec3& a, const Vec3& b) {
  const double c = std::abs(a.normalized().dot(b.normalized()));
  return std::acos(std::min(1.0, c)) * 180.0 / std::numbers::pi;
}

std::vector<EvalCell> run_eval(const EvalSpec& spec, const SceneSpec& scene_template, const Config& config,
                               const ColorClassSet& colors) {
  SceneSpec tmpl = scene_template;
  tmpl.blur_sigma = spec.blur_sigma_px;
  tmpl.noise_sigma = spec.image_noise_sigma;
  const auto cells = sweep(spec.depths_mm, spec.angles_deg, tmpl, config.camera, spec.seed);
  std::vector<EvalCell> out;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const SweepCell& cell = cells[c];
    EvalCell res{cell.depth_mm, cell.angle_deg};
    std::vector<Vec3> tips;
    double tip_sq = 0, dir_sq = 0;
    std::optional<DetectionResult> shared;
    for (int t = 0; t < spec.trials; ++t) {
      ++res.trials;
      try {
        DetectionResult det;
        if (spec.image_noise_sigma > 0.0 || !shared) {
          SceneSpec scene = cell.scene;
          scene.seed = trial_seed(cell.scene.seed, c, t);
          const Rendering r = render(scene, config.camera);
          det = detect_pointer(r.image, colors, config.pointer, config.detection);
          if (spec.image_noise_sigma <= 0.0) shared = det;
        } else {
          det = *shared;
        }
        if (spec.point_noise_sigma > 0.0) {
          std::mt19937_64 rng(trial_seed(spec.seed, c, t));
          perturb_detected_points(det, spec.point_noise_sigma, rng);
        }
        const PipelineOutput p = estimate_from_detection(std::move(det), config);
        const PointerPose& est = p.estimate.pose;
        tips.push_back(est.tip);
        tip_sq += (est.tip - cell.scene.pose.tip).squaredNorm();
        const double ang = std::acos(std::clamp(est.direction.dot(cell.scene.pose.direction), -1.0, 1.0));
        dir_sq += std::pow(ang * 180.0 / std::numbers::pi, 2);
      } catch (const Error&) {
        ++res.failures;
      }
    }
    const auto ok = static_cast<double>(tips.size());
    if (!tips.empty()) {
      res.rms_tip_mm = std::sqrt(tip_sq / ok);
      res.rms_direction_deg = std::sqrt(dir_sq / ok);
    }
    if (tips.size() >= 3) {
      Vec3 pc = principal_axes3(tips).first;
      // Sign convention: positive z component, then positive x.
      if (pc.z() < 0 || (pc.z() == 0 && pc.x() < 0)) pc = -pc;
      res.first_component = pc;
    }
    out.push_back(res);
  }
  return out;
}

void write_eval_csv(const std::filesystem::path& path, const std::vector<EvalCell>& cells) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "eval", "cannot write " + path.string());
  out << "depth_mm,angle_deg,trials,failures,rms_tip_mm,rms_direction_deg,pc1_x,pc1_y,pc1_z\n";
  for (const EvalCell& c : cells) {
    out << fmt("%.3f", c.depth_mm) << ',' << fmt("%.3f", c.angle_deg) << ',' << c.trials << ',' << c.failures << ','
        << fmt("%.6f", c.rms_tip_mm) << ',' << fmt("%.6f", c.rms_direction_deg) << ','
        << fmt("%.6f", c.first_component.x()) << ',' << fmt("%.6f", c.first_component.y()) << ','
        << fmt("%.6f", c.first_component.z()) << '\n';
  }
}

std::vector<std::filesystem::path> list_frames(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> frames;
  std::error_code ec;
  for (const auto& entry : std::filesystem::directory_iterator(dir, ec)) {
    if (entry.is_regular_file() && entry.path().extension() == ".ppm") frames.push_back(entry.path());
  }
  if (ec) throw Error(ErrorKind::Io, "track", "cannot list " + dir.string() + ": " + ec.message());
  std::sort(frames.begin(), frames.end(),
            [](const auto& a, const auto& b) { return a.filename().string() < b.filename().string(); });
  return frames;
}

std::vector<FrameRecord> track_frames(const std::vector<std::filesystem::path>& frames, const Config& config,
                                      const ColorClassSet& colors) {
  std::vector<FrameRecord> records(frames.size());
  const auto n = static_cast<std::ptrdiff_t>(frames.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t k = 0; k < n; ++k) {
    FrameRecord& rec = records[k];
    rec.name = frames[k].filename().string();
    try {
      const RasterImage img = load_ppm(frames[k]);
      rec.estimate = run_pipeline(img, colors, config).estimate;
    } catch (const Error& e) {
      rec.failure = e.kind();
      rec.failure_stage = e.stage();
      rec.failure_message = e.detail();
    }
  }
  return records;
}

PointCloud cloud_from(const std::vector<FrameRecord>& records) {
  PointCloud cloud;
  for (std::size_t k = 0; k < records.size(); ++k) {
    if (records[k].estimate) cloud.points.push_back({records[k].estimate->pose.tip, k, records[k].estimate->rms});
  }
  return filter_point_cloud(std::move(cloud));
}

void write_poses_csv(const std::filesystem::path& path, const std::vector<FrameRecord>& records) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "track", "cannot write " + path.string());
  out << "frame,status,tip_x_mm,tip_y_mm,tip_z_mm,dir_x,dir_y,dir_z,rms_px,inliers\n";
  for (const FrameRecord& r : records) {
    out << r.name << ',';
    if (!r.estimate) {
      out << "failed:" << to_string(*r.failure) << ",,,,,,,,\n";
      continue;
    }
    const PoseEstimate& e = *r.estimate;
    out << "ok," << fmt("%.6f", e.pose.tip.x()) << ',' << fmt("%.6f", e.pose.tip.y()) << ','
        << fmt("%.6f", e.pose.tip.z()) << ',' << fmt("%.9f", e.pose.direction.x()) << ','
        << fmt("%.9f", e.pose.direction.y()) << ',' << fmt("%.9f", e.pose.direction.z()) << ','
        << fmt("%.6f", e.rms) << ',' << e.correspondence.inlier_count() << '\n';
  }
}

ColorClassSet calibrate_from_scene(const SceneSpec& scene, const CameraModel& camera, double min_saturation) {
  const Rendering r = render(scene, camera);
  const LabelImage mask = render_label_mask(scene, camera);
  return calibrate_colors(r.image, mask, min_saturation);
}

}  // namespace bandpose
