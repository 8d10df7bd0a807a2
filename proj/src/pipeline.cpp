#include "bandpose/pipeline.hpp"

#include <algorithm>

#include "bandpose/error.hpp"
#include "bandpose/geometry.hpp"

namespace bandpose {

PipelineOutput estimate_from_detection(DetectionResult detection, const Config& config) {
  PipelineOutput out;
  out.detection = std::move(detection);
  const auto& edges = out.detection.edges;
  if (edges.size() < 3) {
    throw Error(ErrorKind::InsufficientEdges, "associate",
                "detected " + std::to_string(edges.size()) + " edges, need at least 3");
  }
  out.alignments = align_labels_dp(detected_labels(out.detection), config.pointer);
  out.hypotheses = associate_ransac(out.detection, config.pointer, out.alignments, config.association);
  out.estimate = estimate_pose(out.detection, out.hypotheses, config.camera, config.pointer);
  return out;
}

PipelineOutput run_pipeline(const RasterImage& image, const ColorClassSet& colors, const Config& config) {
  if (image.width() != config.camera.width || image.height() != config.camera.height) {
    throw Error(ErrorKind::ConfigMismatch, "input", "image size does not match the camera");
  }
  return estimate_from_detection(detect_pointer(image, colors, config.pointer, config.detection), config);
}

void recompute_axis(DetectionResult& result) {
  std::vector<Vec2> pts;
  for (const auto& e : result.edges) {
    pts.push_back(e.a);
    pts.push_back(e.b);
  }
  const auto line = fit_line_tls(pts);
  if (!line) throw Error(ErrorKind::NoEdges, "edge-pairs", "contour points are degenerate");
  Line2 l2 = *line;
  if (l2.dir.x() < 0.0 || (l2.dir.x() == 0.0 && l2.dir.y() < 0.0)) l2.dir = -l2.dir;
  result.l2 = l2;
  for (auto& e : result.edges) {
    if (l2.signed_distance(e.a) > l2.signed_distance(e.b)) {
      std::swap(e.a, e.b);
    }
    e.axis_coordinate = l2.coordinate(0.5 * (e.a + e.b));
  }
  std::stable_sort(result.edges.begin(), result.edges.end(),
                   [](const EdgePointPair& p, const EdgePointPair& q) { return p.axis_coordinate < q.axis_coordinate; });
}

void perturb_detected_points(DetectionResult& result, double sigma_px, std::mt19937_64& rng) {
  std::normal_distribution<double> noise(0.0, sigma_px);
  for (auto& e : result.edges) {
    e.a += Vec2(noise(rng), noise(rng));
    e.b += Vec2(noise(rng), noise(rng));
  }
  recompute_axis(result);
}

}  // namespace bandpose
