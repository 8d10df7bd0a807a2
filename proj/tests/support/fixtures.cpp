#include "fixtures.hpp"

#include <cmath>
#include <numbers>

#include "bandpose/evaluation.hpp"
#include "bandpose/pipeline.hpp"

namespace testing_support {

const Config& reference() {
  static const Config cfg = reference_config();
  return cfg;
}

SceneSpec scene_at(double depth_mm, double angle_deg) {
  const Config& cfg = reference();
  return SceneSpec{.pose = sweep_pose(depth_mm, angle_deg, cfg.pointer.total_length(), cfg.camera),
                   .spec = cfg.pointer,
                   .band_colors = reference_band_colors()};
}

const ColorClassSet& reference_colors() {
  static const ColorClassSet colors = calibrate_from_scene(scene_at(505.0, 20.0), reference().camera);
  return colors;
}

DetectionResult detection_from_truth(const GroundTruth& truth, const PointerSpec& spec) {
  DetectionResult result;
  std::vector<std::size_t> index;
  for (const GroundTruthEdge& e : truth.edges) {
    if (!e.visible()) continue;
    result.edges.push_back({e.plus, e.minus, kUndefinedClass, kUndefinedClass, 0.0});
    index.push_back(e.edge);
  }
  if (result.edges.size() < 2) return result;
  recompute_axis(result);
  // recompute_axis sorts; find out whether the tip ends up at the small end.
  Vec2 first_mid = Vec2::Zero(), last_mid = Vec2::Zero();
  for (const GroundTruthEdge& e : truth.edges) {
    if (!e.visible()) continue;
    if (e.edge == index.front()) first_mid = 0.5 * (e.plus + e.minus);
    if (e.edge == index.back()) last_mid = 0.5 * (e.plus + e.minus);
  }
  const bool forward = result.l2.coordinate(first_mid) < result.l2.coordinate(last_mid);
  for (auto& pair : result.edges) {
    const Vec2 mid = 0.5 * (pair.a + pair.b);
    std::size_t best = 0;
    double best_d = 1e300;
    for (const GroundTruthEdge& e : truth.edges) {
      const double d = (0.5 * (e.plus + e.minus) - mid).norm();
      if (d < best_d) best_d = d, best = e.edge;
    }
    const SideLabels s = spec.side_labels()[best];
    pair.left = forward ? s.left : s.right;
    pair.right = forward ? s.right : s.left;
  }
  return result;
}

double tip_error_mm(const PointerPose& a, const PointerPose& b) { return (a.tip - b.tip).norm(); }

double direction_error_deg(const PointerPose& a, const PointerPose& b) {
  const double c = std::clamp(a.direction.normalized().dot(b.direction.normalized()), -1.0, 1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

PointerPose random_pose(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> depth(400.0, 650.0), angle(-60.0, 60.0), roll(0.0, 360.0),
      shift(-40.0, 40.0);
  const Config& cfg = reference();
  PointerPose p = sweep_pose(depth(rng), angle(rng), cfg.pointer.total_length(), cfg.camera);
  // Spin about the optical axis and nudge sideways.
  const double r = roll(rng) * std::numbers::pi / 180.0;
  Mat3 rz;
  rz << std::cos(r), -std::sin(r), 0, std::sin(r), std::cos(r), 0, 0, 0, 1;
  p.tip = rz * p.tip + Vec3(shift(rng), shift(rng), 0.0);
  p.direction = rz * p.direction;
  return p;
}

}  // namespace testing_support
