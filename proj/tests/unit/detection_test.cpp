#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "bandpose/detection.hpp"
#include "bandpose/error.hpp"
#include "bandpose/pipeline.hpp"
#include "support/fixtures.hpp"

using namespace bandpose;
namespace ts = testing_support;

namespace {

const Rgb kRed{0.85f, 0.12f, 0.10f};

PointerSpec two_band() { return PointerSpec({100}, {2.5}, {1, 2}, 200.0); }
PointerSpec four_band() { return PointerSpec({60, 120, 180}, {2.5, 2.5, 2.5}, {1, 2, 1, 2}, 240.0); }

SceneSpec scene_for(const PointerSpec& spec, double depth, double angle) {
  const auto& cfg = ts::reference();
  return SceneSpec{.pose = sweep_pose(depth, angle, spec.total_length(), cfg.camera),
                   .spec = spec,
                   .band_colors = reference_band_colors()};
}

Region block(int label, int x0, int y0, int w, int h) {
  std::vector<Pixel> px;
  for (int y = y0; y < y0 + h; ++y)
    for (int x = x0; x < x0 + w; ++x) px.push_back({x, y});
  return make_region(label, std::move(px));
}

template <class F>
ErrorKind error_kind(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::InvalidArgument;
}

RasterImage shifted(const RasterImage& img, int dx, int dy, Rgb fill) {
  RasterImage out(img.width(), img.height(), fill);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      const int sx = x - dx, sy = y - dy;
      if (sx >= 0 && sy >= 0 && sx < img.width() && sy < img.height()) out.at(x, y) = img.at(sx, sy);
    }
  return out;
}

// Nearest ground-truth edge to a detected pair, with the matched point distance.
std::pair<std::size_t, double> match(const EdgePointPair& p, const GroundTruth& truth) {
  std::size_t best = 0;
  double best_d = 1e300;
  for (const auto& e : truth.edges) {
    if (!e.visible()) continue;
    const double d1 = std::max((p.a - e.plus).norm(), (p.b - e.minus).norm());
    const double d2 = std::max((p.a - e.minus).norm(), (p.b - e.plus).norm());
    if (std::min(d1, d2) < best_d) best_d = std::min(d1, d2), best = e.edge;
  }
  return {best, best_d};
}

}  // namespace

TEST(DetectionParams, DerivedQuantities) {
  DetectionParams p;
  EXPECT_EQ(DetectionParams::adjacency_distance(5), 14);
  EXPECT_EQ(DetectionParams::adjacency_distance(2), 8);
  EXPECT_EQ(p.edge_halo(), 5);
  EXPECT_DOUBLE_EQ(p.sigma_d(), 5.0);
  EXPECT_DOUBLE_EQ(DetectionParams::sigma_a(), std::numbers::pi / 12);
  p.s2 = 0.3;
  EXPECT_EQ(error_kind([&] { p.validate(); }), ErrorKind::InvalidArgument);
}

TEST(BandRegions, BlankImageGivesNothing) {
  const HueSatImage hs = rgb_to_hue_saturation(RasterImage(200, 100, {0.45f, 0.45f, 0.45f}));
  EXPECT_TRUE(detect_band_regions(hs, ts::reference_colors(), {{1, 2}}, 0.25, 5).empty());
}

TEST(BandRegions, TwoBandsAndIsolatedBlob) {
  const auto& cfg = ts::reference();
  SceneSpec scene = scene_for(two_band(), 500, 0);
  const GroundTruth truth = ground_truth(scene, cfg.camera);
  const auto& e = truth.edges[0];
  const Vec2 across = (e.plus - e.minus).normalized();
  const double radius_px = 0.5 * (e.plus - e.minus).norm();
  // Blob 50 px from the red band's silhouette.
  const Vec2 blob = 0.5 * (e.plus + e.minus) + across * (radius_px + 50 + 12) - 150 * Vec2(-across.y(), across.x());
  scene.distractors.push_back({blob, 12.0, kRed});
  const RasterImage img = render(scene, cfg.camera).image;
  const HueSatImage hs = rgb_to_hue_saturation(img);

  const auto all = detect_band_regions(hs, ts::reference_colors(), {{-1, -2}}, 0.25, 5);
  EXPECT_TRUE(all.empty()) << "no adjacent pairs means nothing survives";

  const auto regions = detect_band_regions(hs, ts::reference_colors(), two_band().adjacent_color_pairs(), 0.25, 5);
  ASSERT_EQ(regions.size(), 2u);
  std::set<int> labels{regions[0].label, regions[1].label};
  EXPECT_EQ(labels, (std::set<int>{1, 2}));
  for (const Region& r : regions)
    for (const Pixel& p : r.pixels) EXPECT_GT((Vec2(p.x, p.y) - blob).norm(), 13.0);
}

TEST(CentroidLine, TwoRegions) {
  const std::vector<Region> regions{block(1, 10, 10, 6, 6), block(2, 40, 30, 6, 6)};
  const CentroidLine cl = ransac_centroid_line(regions, DetectionParams{});
  EXPECT_EQ(cl.regions.size(), 2u);
  for (const Region& r : regions) EXPECT_NEAR(cl.line.signed_distance(r.centroid), 0.0, 1e-9);
}

TEST(CentroidLine, DistractorExcluded) {
  std::vector<Region> regions;
  for (int k = 0; k < 5; ++k) regions.push_back(block(1 + k % 2, 20 + 30 * k, 50 + 3 * k, 28, 12));
  regions.push_back(block(1, 80, 200, 10, 10));
  const CentroidLine cl = ransac_centroid_line(regions, DetectionParams{});
  ASSERT_EQ(cl.regions.size(), 5u);
  for (const Region& r : cl.regions) EXPECT_LT(r.centroid.y(), 100);
}

TEST(CentroidLine, Errors) {
  EXPECT_EQ(error_kind([] { ransac_centroid_line({block(1, 0, 0, 3, 3)}, DetectionParams{}); }),
            ErrorKind::InsufficientRegions);
  EXPECT_EQ(error_kind([] {
              ransac_centroid_line({block(1, 0, 0, 3, 3), block(2, 0, 0, 3, 3)}, DetectionParams{});
            }),
            ErrorKind::DegenerateSample);
}

TEST(Boxes, RectangleCircleAndPixel) {
  DetectionParams p;
  // Variance of n consecutive integers is (n^2 - 1) / 12; semi-axis is 2 sigma.
  const auto rect = expand_bounding_boxes({block(1, 3, 7, 10, 4)}, p);
  ASSERT_EQ(rect.size(), 1u);
  EXPECT_NEAR(rect[0].half_major, 1.1 * 2 * std::sqrt(99.0 / 12), 1e-9);
  EXPECT_NEAR(rect[0].half_minor, 1.5 * 2 * std::sqrt(15.0 / 12), 1e-9);
  EXPECT_NEAR(std::abs(rect[0].axis.x()), 1.0, 1e-12);
  EXPECT_NEAR(rect[0].center.x(), 7.5, 1e-12);
  EXPECT_NEAR(rect[0].center.y(), 8.5, 1e-12);

  std::vector<Pixel> disk;
  for (int y = -20; y <= 20; ++y)
    for (int x = -20; x <= 20; ++x)
      if (x * x + y * y <= 400) disk.push_back({x + 50, y + 50});
  const auto circ = expand_bounding_boxes({make_region(1, disk)}, p);
  EXPECT_NEAR(circ[0].half_major / circ[0].half_minor, 1.1 / 1.5, 1e-9);
  EXPECT_NEAR(circ[0].half_major, 1.1 * 20, 0.5);

  const auto one = expand_bounding_boxes({block(1, 5, 5, 1, 1)}, p);
  EXPECT_DOUBLE_EQ(one[0].half_major, 0.55);
  EXPECT_DOUBLE_EQ(one[0].half_minor, 0.75);
}

TEST(JunctionKernel, UnitSumAndPointSymmetric) {
  for (double phi : {0.0, 0.4, 1.2, -0.9, std::numbers::pi / 2}) {
    const Kernel2D k = junction_kernel(5.0, std::numbers::pi / 12, phi);
    EXPECT_EQ(k.width, 31);
    EXPECT_EQ(k.height, 31);
    EXPECT_NEAR(k.sum(), 1.0, 1e-12);
    for (int v = -15; v <= 15; ++v)
      for (int u = -15; u <= 15; ++u) {
        EXPECT_GE(k.at(u, v), 0.0);
        EXPECT_NEAR(k.at(u, v), k.at(-u, -v), 1e-15);
      }
    // Peak at the origin; stronger along phi than across it.
    EXPECT_GE(k.at(0, 0), k.at(1, 0));
    const int u = static_cast<int>(std::lround(5 * std::cos(phi))), v = static_cast<int>(std::lround(5 * std::sin(phi)));
    EXPECT_GT(k.at(u, v), k.at(-v, u));
  }
}

TEST(DetectPointer, FourBandsParallel) {
  const auto& cfg = ts::reference();
  const PointerSpec spec = four_band();
  const SceneSpec scene = scene_for(spec, 500, 0);
  const Rendering r = render(scene, cfg.camera);
  const DetectionResult d = detect_pointer(r.image, ts::reference_colors(), spec, cfg.detection);
  ASSERT_EQ(d.edges.size(), 3u);
  std::set<std::size_t> seen;
  for (const auto& p : d.edges) {
    const auto [edge, dist] = match(p, r.truth);
    EXPECT_LT(dist, 1.0);
    seen.insert(edge);
  }
  EXPECT_EQ(seen.size(), 3u);

  // R|G, G|R, R|G in axis order, or the mirror image if L2 points tail to tip.
  std::vector<std::pair<int, int>> labels;
  for (const auto& p : d.edges) labels.emplace_back(p.left, p.right);
  const std::vector<std::pair<int, int>> fwd{{1, 2}, {2, 1}, {1, 2}}, rev{{2, 1}, {1, 2}, {2, 1}};
  EXPECT_TRUE(labels == fwd || labels == rev);

  ASSERT_TRUE(d.maps.has_value());
  const EdgeMaps& m = *d.maps;
  for (int y = 0; y < m.ib3.height(); ++y)
    for (int x = 0; x < m.ib3.width(); ++x)
      if (m.ib3.get(x, y)) {
        ASSERT_TRUE(m.ib1.get(x, y));
      }
  const Vec2 origin(m.origin_x, m.origin_y);
  for (std::size_t i = 0; i < d.edges.size(); ++i) {
    const auto& p = d.edges[i];
    EXPECT_LT(m.l1.signed_distance(p.a - origin) * m.l1.signed_distance(p.b - origin), 0.0);
    EXPECT_GE((p.a - p.b).norm(), cfg.detection.edge_halo());
    if (i > 0) {
      EXPECT_LT(d.edges[i - 1].axis_coordinate, p.axis_coordinate);
    }
  }
  // Pass-2 regions lie inside the pass-1 boxes.
  const BinaryImage roi = rasterize_boxes(expand_bounding_boxes(d.pass1_regions, cfg.detection), r.image.width(),
                                          r.image.height());
  for (const Region& reg : d.pass2_regions)
    for (const Pixel& px : reg.pixels) ASSERT_TRUE(roi.get(px.x, px.y));
}

TEST(DetectPointer, TerminalJunctionsHaveUndefinedOuterLabel) {
  const auto& cfg = ts::reference();
  const SceneSpec scene = scene_for(two_band(), 500, 0);
  const Rendering r = render(scene, cfg.camera);
  // A lone junction cannot make a pair list.
  EXPECT_EQ(error_kind([&] { detect_pointer(r.image, ts::reference_colors(), two_band(), cfg.detection); }),
            ErrorKind::InsufficientEdges);
}

TEST(DetectPointer, HighlightAcrossJunctionIsBridged) {
  const auto& cfg = ts::reference();
  const PointerSpec spec = four_band();
  SceneSpec scene = scene_for(spec, 500, 0);
  // Desaturate a 1 mm stripe straddling the middle junction.
  scene.highlights.push_back({119.5, 120.5, 0.8});
  const Rendering r = render(scene, cfg.camera);
  const DetectionResult d = detect_pointer(r.image, ts::reference_colors(), spec, cfg.detection);
  bool found = false;
  for (const auto& p : d.edges) {
    const auto [edge, dist] = match(p, r.truth);
    if (edge == 1 && dist < 2.0) found = true;
  }
  EXPECT_TRUE(found);
}

TEST(DetectPointer, IntegerTranslationEquivariance) {
  const auto& cfg = ts::reference();
  const SceneSpec scene = ts::scene_at(505, 30);
  const RasterImage img = render(scene, cfg.camera).image;
  const DetectionResult base = detect_pointer(img, ts::reference_colors(), cfg.pointer, cfg.detection);
  for (auto [dx, dy] : {std::pair{7, -3}, std::pair{-12, 20}}) {
    const DetectionResult moved =
        detect_pointer(shifted(img, dx, dy, scene.background), ts::reference_colors(), cfg.pointer, cfg.detection);
    ASSERT_EQ(moved.edges.size(), base.edges.size());
    const Vec2 t(dx, dy);
    for (std::size_t i = 0; i < base.edges.size(); ++i) {
      EXPECT_NEAR((moved.edges[i].a - base.edges[i].a - t).norm(), 0.0, 1e-9);
      EXPECT_NEAR((moved.edges[i].b - base.edges[i].b - t).norm(), 0.0, 1e-9);
      EXPECT_EQ(moved.edges[i].left, base.edges[i].left);
      EXPECT_EQ(moved.edges[i].right, base.edges[i].right);
    }
  }
}

TEST(DetectPointer, SeventyOneDegrees) {
  const auto& cfg = ts::reference();
  const Rendering r = render(ts::scene_at(505, 71), cfg.camera);
  const DetectionResult d = detect_pointer(r.image, ts::reference_colors(), cfg.pointer, cfg.detection);
  EXPECT_GE(d.edges.size(), 8u);
  for (const auto& p : d.edges) EXPECT_LT(match(p, r.truth).second, 2.0);
}

namespace {

// Side labels of every detected edge equal the pointer's, mirrored when L2
// runs tail to tip.
void expect_true_labels(const DetectionResult& d, const Rendering& r, const PointerSpec& spec) {
  ASSERT_GE(d.edges.size(), 2u);
  const bool forward = match(d.edges.front(), r.truth).first < match(d.edges.back(), r.truth).first;
  for (const auto& p : d.edges) {
    const auto [edge, dist] = match(p, r.truth);
    ASSERT_LT(dist, 2.0);
    const SideLabels s = spec.side_labels()[edge];
    const ClassId left = forward ? s.left : s.right, right = forward ? s.right : s.left;
    // Terminal edges may leave the outer side undefined.
    if (p.left != kUndefinedClass || edge != 0) {
      EXPECT_EQ(p.left, left) << "edge " << edge;
    }
    if (p.right != kUndefinedClass || edge + 1 != spec.edge_count()) {
      EXPECT_EQ(p.right, right) << "edge " << edge;
    }
  }
}

}  // namespace

TEST(DetectPointer, SideLabelsUnderStrongTilt) {
  const auto& cfg = ts::reference();
  for (double angle : {53.25, 71.0}) {
    const Rendering r = render(ts::scene_at(450, angle), cfg.camera);
    expect_true_labels(detect_pointer(r.image, ts::reference_colors(), cfg.pointer, cfg.detection), r, cfg.pointer);
  }
}

TEST(DetectPointer, SideLabelsNextToOccludedJunction) {
  const auto& cfg = ts::reference();
  SceneSpec scene = ts::scene_at(480, 25);
  const GroundTruth clear = ground_truth(scene, cfg.camera);
  for (std::size_t k : {2u, 6u}) {
    const GroundTruthEdge& e = clear.edges[k];
    scene.occluders.push_back({std::min(e.plus.x(), e.minus.x()) - 10, std::min(e.plus.y(), e.minus.y()) - 10,
                               std::max(e.plus.x(), e.minus.x()) + 10, std::max(e.plus.y(), e.minus.y()) + 10});
  }
  const Rendering r = render(scene, cfg.camera);
  const DetectionResult d = detect_pointer(r.image, ts::reference_colors(), cfg.pointer, cfg.detection);
  EXPECT_EQ(d.edges.size(), cfg.pointer.edge_count() - 2);
  expect_true_labels(d, r, cfg.pointer);
}

TEST(DetectPointer, PairFilters) {
  const auto& cfg = ts::reference();
  const DetectionResult d =
      detect_pointer(render(ts::scene_at(450, 20), cfg.camera).image, ts::reference_colors(), cfg.pointer, cfg.detection);
  ASSERT_GE(d.edges.size(), 2u);
  double mean = 0, var = 0;
  for (const auto& p : d.edges) mean += (p.a - p.b).norm();
  mean /= d.edges.size();
  for (const auto& p : d.edges) var += std::pow((p.a - p.b).norm() - mean, 2);
  const double sd = std::sqrt(var / d.edges.size());
  for (const auto& p : d.edges) {
    EXPECT_LE(std::abs((p.a - p.b).norm() - mean), 5 * sd + 1e-9);
    // Side labels differ unless both are undefined.
    if (p.left != kUndefinedClass || p.right != kUndefinedClass) {
      EXPECT_NE(p.left, p.right);
    }
  }
}

TEST(DetectPointer, BlobWithoutPointerIsNotFound) {
  const auto& cfg = ts::reference();
  SceneSpec scene = ts::scene_at(505, 0);
  scene.pose.tip = Vec3(5000, 0, 500);  // far outside the field of view
  scene.distractors.push_back({Vec2(1200, 1000), 40.0, {0.90f, 0.62f, 0.48f}});
  scene.distractors.push_back({Vec2(900, 700), 25.0, kRed});
  const RasterImage img = render(scene, cfg.camera).image;
  EXPECT_EQ(error_kind([&] { detect_pointer(img, ts::reference_colors(), cfg.pointer, cfg.detection); }),
            ErrorKind::PointerNotFound);
  const RasterImage blank(400, 300, scene.background);
  EXPECT_EQ(error_kind([&] { detect_pointer(blank, ts::reference_colors(), cfg.pointer, cfg.detection); }),
            ErrorKind::PointerNotFound);
}
