#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <utility>
#include <vector>

#include "bandpose/color_model.hpp"
#include "bandpose/geometry.hpp"
#include "bandpose/imaging.hpp"
#include "bandpose/pointer_spec.hpp"

namespace bandpose {

using ColorPairs = std::set<std::pair<ClassId, ClassId>>;

struct DetectionParams {
  double s1 = 0.25;  // first-pass saturation threshold
  double s2 = 0.12;  // second-pass saturation threshold
  int r1 = 5;        // first-pass erosion radius, px
  int r2 = 2;        // second-pass erosion radius, px
  double major_expand = 1.1;
  double minor_expand = 1.5;
  double binarize_threshold = 0.3;
  double line_inlier_sigmas = 3.0;
  double pair_separation_sigmas = 5.0;
  int ransac_iterations = 200;
  std::uint64_t ransac_seed = 1;

  void validate() const;
  static int adjacency_distance(int radius) { return 2 * radius + 4; }
  int edge_halo() const { return 2 * r2 + 1; }
  double sigma_d() const { return static_cast<double>(edge_halo()); }
  static double sigma_a();
};

/// Contour points of one band junction. `a` lies on the negative side of L2.
struct EdgePointPair {
  Vec2 a = Vec2::Zero();
  Vec2 b = Vec2::Zero();
  ClassId left = kUndefinedClass;   // side of smaller axis coordinate
  ClassId right = kUndefinedClass;
  double axis_coordinate = 0.0;     // midpoint coordinate along L2, px
  Vec2 bulge = Vec2::Zero();        // arc apex minus chord midpoint, zero for a straight edge
};

/// Intermediate junction maps of extract_edge_pairs, in a window whose
/// top-left pixel is (origin_x, origin_y).
struct EdgeMaps {
  int origin_x = 0;
  int origin_y = 0;
  BinaryImage ib1;
  BinaryImage ib2;
  BinaryImage ib3;
  double phi = 0.0;
  Line2 l1;  // window coordinates
};

struct DetectionResult {
  std::vector<EdgePointPair> edges;  // sorted by axis_coordinate
  Line2 l2;
  std::vector<Region> pass1_regions;
  std::vector<Region> pass2_regions;
  std::optional<EdgeMaps> maps;
};

struct CentroidLine {
  Line2 line;
  std::vector<Region> regions;
};

/// Classification, disk erosion and the adjacent-color proximity test. Regions
/// keep their full (un-eroded) pixel sets; erosion only decides survival.
std::vector<Region> detect_band_regions(const HueSatImage& hs, const ColorClassSet& colors, const ColorPairs& adjacency,
                                        double saturation_threshold, int erosion_radius,
                                        const BinaryImage* roi = nullptr);

/// RANSAC over pairs of centroids; a region supports a line when it has
/// pixels strictly on both sides of it.
CentroidLine ransac_centroid_line(const std::vector<Region>& regions, const DetectionParams& params);

std::vector<OrientedBox> expand_bounding_boxes(const std::vector<Region>& regions, const DetectionParams& params);
BinaryImage rasterize_boxes(const std::vector<OrientedBox>& boxes, int width, int height);

/// Junction maps, contour point pairs and L2. Labels are left undefined.
/// `fallback_axis` is the pass-2 centroid line direction, used when the
/// junction pixel cloud is isotropic. With `image` the contour points are
/// refined against its colors.
DetectionResult extract_edge_pairs(const std::vector<Region>& regions, const ColorPairs& adjacency,
                                   const DetectionParams& params, int width, int height, const Vec2& fallback_axis,
                                   const RasterImage* image = nullptr);

/// Assigns side labels from the nearest clipped region along L2.
void label_edge_pairs(DetectionResult& result, const std::vector<Region>& regions);

/// Unit-sum oriented kernel emphasising structure along angle `phi`.
Kernel2D junction_kernel(double sigma_d, double sigma_a, double phi);

DetectionResult detect_pointer(const RasterImage& img, const ColorClassSet& colors, const PointerSpec& spec,
                               const DetectionParams& params);

}  // namespace bandpose
