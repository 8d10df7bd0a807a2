#pragma once

#include <random>

#include "bandpose/association.hpp"
#include "bandpose/color_model.hpp"
#include "bandpose/config.hpp"
#include "bandpose/detection.hpp"
#include "bandpose/pose.hpp"

namespace bandpose {

struct PipelineOutput {
  DetectionResult detection;
  AlignmentSet alignments;
  std::vector<Correspondence> hypotheses;
  PoseEstimate estimate;
};

/// Association and pose from an existing detection. Throws InsufficientEdges
/// below three edges, then whatever association / pose raise.
PipelineOutput estimate_from_detection(DetectionResult detection, const Config& config);

/// Detection, association and pose on one frame.
PipelineOutput run_pipeline(const RasterImage& image, const ColorClassSet& colors, const Config& config);

/// Refits L2 to the current contour points and recomputes axis coordinates,
/// side assignment and edge order.
void recompute_axis(DetectionResult& result);

/// Adds i.i.d. Gaussian noise (px) to every contour point, then recompute_axis.
void perturb_detected_points(DetectionResult& result, double sigma_px, std::mt19937_64& rng);

}  // namespace bandpose
