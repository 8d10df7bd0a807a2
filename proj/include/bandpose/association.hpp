#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "bandpose/detection.hpp"
#include "bandpose/pointer_spec.hpp"

namespace bandpose {

/// t -> (a t + c) / (g t + 1): axis coordinate (px) to distance from tip (mm).
struct Homography1D {
  double a = 1.0;
  double c = 0.0;
  double g = 0.0;

  double map(double t) const { return (a * t + c) / (g * t + 1.0); }
  double inverse(double b) const { return (b - c) / (a - g * b); }
  /// True when the map is strictly monotone on [t_min, t_max].
  bool monotone_on(double t_min, double t_max) const;
  bool increasing() const { return a - c * g > 0.0; }
};

struct AxisMatch {
  double t = 0.0;  // px along L2
  double b = 0.0;  // mm from tip
};

/// Exact interpolation through three matches; throws DegenerateSample.
Homography1D fit_homography_1d(std::span<const AxisMatch, 3> matches);
/// Linear least squares over >= 3 matches; throws DegenerateSample.
Homography1D fit_homography_1d_lsq(std::span<const AxisMatch> matches);

enum class Orientation { Forward, Reversed };

using EdgeMatch = std::pair<std::size_t, std::size_t>;  // (detected index, pointer edge index)

struct Alignment {
  Orientation orientation = Orientation::Forward;
  std::vector<EdgeMatch> matches;  // label-scoring matches only, detected order
  int score = 0;
};

struct AlignmentSet {
  std::vector<Alignment> alignments;
  bool truncated = false;
};

/// Detected side labels are compatible with pointer edge `i` in the given
/// orientation when every defined label equals the pointer's label.
bool labels_compatible(const SideLabels& detected, const PointerSpec& spec, std::size_t i, Orientation o);
/// +1 when compatible and at least one detected label is defined.
bool labels_score(const SideLabels& detected, const PointerSpec& spec, std::size_t i, Orientation o);

/// Global alignment (match +1, gap 0, mismatch forbidden) against the pointer
/// and its reversal; returns every maximal alignment, up to 32.
AlignmentSet align_labels_dp(std::span<const SideLabels> detected, const PointerSpec& spec);

struct Correspondence {
  std::vector<EdgeMatch> matches;  // inlier pairs, detected order
  std::vector<bool> inlier;        // per detected edge
  Homography1D homography;
  Orientation orientation = Orientation::Forward;
  std::size_t hypothesis_index = 0;

  std::size_t inlier_count() const { return matches.size(); }
};

struct AssociationParams {
  std::size_t max_triplets = 1000;
  std::uint64_t seed = 7;
};

std::vector<SideLabels> detected_labels(const DetectionResult& result);

/// Counts reciprocal-nearest-neighbour, label-consistent edges under `h`.
Correspondence score_hypothesis(std::span<const double> axis_coordinates, std::span<const SideLabels> labels,
                                const PointerSpec& spec, const Homography1D& h, Orientation o);

/// RANSAC over triplets drawn from the alignments. Returns every distinct
/// hypothesis reaching the maximal inlier count.
std::vector<Correspondence> associate_ransac(const DetectionResult& result, const PointerSpec& spec,
                                             const AlignmentSet& alignments, const AssociationParams& params = {});
std::vector<Correspondence> associate_ransac(std::span<const double> axis_coordinates,
                                             std::span<const SideLabels> labels, const PointerSpec& spec,
                                             const AlignmentSet& alignments, const AssociationParams& params = {});

}  // namespace bandpose
