#pragma once

#include <random>

#include "bandpose/color_model.hpp"
#include "bandpose/config.hpp"
#include "bandpose/detection.hpp"
#include "bandpose/synthetic.hpp"

namespace testing_support {

using namespace bandpose;

const Config& reference();
// Colour model calibrated once from a rendering at 505 mm / 20 deg.
const ColorClassSet& reference_colors();

SceneSpec scene_at(double depth_mm, double angle_deg);

// A detection built directly from visible ground-truth contour points, with
// the pointer's own side labels. Bypasses the image entirely.
DetectionResult detection_from_truth(const GroundTruth& truth, const PointerSpec& spec);

double tip_error_mm(const PointerPose& a, const PointerPose& b);
double direction_error_deg(const PointerPose& a, const PointerPose& b);

// Random rigid pose of the reference pointer in front of the reference camera.
PointerPose random_pose(std::mt19937_64& rng);

}  // namespace testing_support
