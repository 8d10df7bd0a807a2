#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "bandpose/error.hpp"
#include "bandpose/imaging.hpp"
#include "bandpose/kernels.hpp"

using namespace bandpose;

namespace {

BinaryImage random_binary(int w, int h, double p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution bit(p);
  BinaryImage b(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) b.set(x, y, bit(rng));
  return b;
}

// Oracle: check every offset of the disk; outside pixels do not count.
BinaryImage brute_erode(const BinaryImage& b, int r) {
  BinaryImage out(b.width(), b.height());
  for (int y = 0; y < b.height(); ++y) {
    for (int x = 0; x < b.width(); ++x) {
      bool all = true;
      for (int dy = -r; dy <= r && all; ++dy)
        for (int dx = -r; dx <= r && all; ++dx)
          if (dx * dx + dy * dy <= r * r && b.in_bounds(x + dx, y + dy) && !b.get(x + dx, y + dy)) all = false;
      out.set(x, y, all);
    }
  }
  return out;
}

bool subset(const BinaryImage& a, const BinaryImage& b) {
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x)
      if (a.get(x, y) && !b.get(x, y)) return false;
  return true;
}

RasterImage random_rgb(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.f, 1.f);
  RasterImage img(w, h);
  for (Rgb& p : img.pixels()) p = {u(rng), u(rng), u(rng)};
  return img;
}

}  // namespace

TEST(Hue, PrimaryAndAchromaticPixels) {
  RasterImage img(3, 1);
  img.at(0, 0) = {1, 0, 0};
  img.at(1, 0) = {0.5f, 0.5f, 0.5f};
  img.at(2, 0) = {0, 1, 1};
  const HueSatImage hs = rgb_to_hue_saturation(img);
  EXPECT_NEAR(hs.hue[0], 0.0, 1e-6);
  EXPECT_NEAR(hs.saturation[0], 1.0, 1e-6);
  EXPECT_TRUE(hs.valid[0]);
  EXPECT_NEAR(hs.saturation[1], 0.0, 1e-6);
  EXPECT_FALSE(hs.valid[1]);
  EXPECT_NEAR(hs.hue[2], std::numbers::pi, 1e-6);
  EXPECT_NEAR(hs.saturation[2], 1.0, 1e-6);
}

TEST(Hue, ChannelRotationShiftsHueByThirdTurn) {
  const RasterImage img = random_rgb(64, 64, 3);
  RasterImage rotated = img;
  for (Rgb& p : rotated.pixels()) p = {p.b, p.r, p.g};
  const HueSatImage a = rgb_to_hue_saturation(img), b = rgb_to_hue_saturation(rotated);
  const double third = 2.0 * std::numbers::pi / 3.0;
  for (std::size_t i = 0; i < a.hue.size(); ++i) {
    if (!a.valid[i]) continue;
    double diff = std::remainder(b.hue[i] - a.hue[i] - third, 2.0 * std::numbers::pi);
    EXPECT_NEAR(diff, 0.0, 1e-5) << i;
    EXPECT_NEAR(a.saturation[i], b.saturation[i], 1e-6);
  }
}

TEST(Hue, RangeAndValidity) {
  const HueSatImage hs = rgb_to_hue_saturation(random_rgb(50, 40, 9));
  for (std::size_t i = 0; i < hs.hue.size(); ++i) {
    EXPECT_GE(hs.hue[i], 0.0f);
    EXPECT_LT(hs.hue[i], 2.0 * std::numbers::pi);
    EXPECT_GE(hs.saturation[i], 0.0f);
    EXPECT_LE(hs.saturation[i], 1.0f);
  }
}

TEST(Hue, SerialAndParallelAgree) {
  const RasterImage img = random_rgb(97, 61, 5);
  const HueSatImage a = kernels::serial::rgb_to_hue_saturation(img);
  const HueSatImage b = kernels::parallel::rgb_to_hue_saturation(img);
  EXPECT_EQ(a.hue, b.hue);
  EXPECT_EQ(a.saturation, b.saturation);
  EXPECT_EQ(a.valid, b.valid);
}

TEST(Erosion, RadiusZeroIsIdentity) {
  const BinaryImage b = random_binary(40, 30, 0.6, 1);
  EXPECT_EQ(erode_disk(b, 0), b);
}

TEST(Erosion, ThinStripVanishes) {
  BinaryImage b(30, 30);
  for (int y = 0; y < 30; ++y)
    for (int x = 10; x < 13; ++x) b.set(x, y);
  EXPECT_EQ(erode_disk(b, 2).count(), 0u);
}

TEST(Erosion, SolidSquareShrinks) {
  BinaryImage b(31, 31);
  for (int y = 10; y < 21; ++y)
    for (int x = 10; x < 21; ++x) b.set(x, y);
  const BinaryImage e = erode_disk(b, 2);
  EXPECT_EQ(e, brute_erode(b, 2));
  EXPECT_EQ(e.count(), 49u);
  EXPECT_TRUE(e.get(12, 12));
  EXPECT_TRUE(e.get(18, 18));
  EXPECT_FALSE(e.get(11, 15));
}

TEST(Erosion, MatchesBruteForceAndIsAntiExtensiveAndMonotone) {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const BinaryImage b = random_binary(48, 37, 0.85, seed);
    BinaryImage previous = b;
    for (int r = 0; r <= 5; ++r) {
      const BinaryImage e = erode_disk(b, r);
      EXPECT_EQ(e, brute_erode(b, r)) << "seed " << seed << " r " << r;
      EXPECT_EQ(kernels::serial::erode_disk(b, r), e);
      EXPECT_TRUE(subset(e, b));
      EXPECT_TRUE(subset(e, previous));
      previous = e;
    }
  }
}

TEST(Components, EmptyAndDiagonal) {
  EXPECT_TRUE(connected_components(BinaryImage(10, 10)).empty());
  BinaryImage b(4, 4);
  b.set(1, 1);
  b.set(2, 2);
  EXPECT_EQ(connected_components(b).size(), 1u);
}

TEST(Components, IsolatedBlocks) {
  BinaryImage b(20, 20);
  std::vector<Vec2> centres;
  for (int by = 0; by < 20; by += 5) {
    for (int bx = 0; bx < 20; bx += 5) {
      for (int y = by; y < by + 2; ++y)
        for (int x = bx; x < bx + 2; ++x) b.set(x, y);
      centres.emplace_back(bx + 0.5, by + 0.5);
    }
  }
  const auto comps = connected_components(b);
  ASSERT_EQ(comps.size(), centres.size());
  for (const Region& r : comps) {
    EXPECT_EQ(r.area(), 4u);
    double best = 1e9;
    for (const Vec2& c : centres) best = std::min(best, (c - r.centroid).norm());
    EXPECT_LT(best, 1e-12);
    EXPECT_NEAR(r.mu20, 0.25, 1e-12);
    EXPECT_NEAR(r.mu02, 0.25, 1e-12);
    EXPECT_NEAR(r.mu11, 0.0, 1e-12);
  }
}

TEST(Components, PartitionTheOnePixels) {
  const BinaryImage b = random_binary(60, 45, 0.45, 11);
  BinaryImage seen(60, 45);
  std::size_t total = 0;
  for (const Region& r : connected_components(b)) {
    for (const Pixel& p : r.pixels) {
      EXPECT_TRUE(b.get(p.x, p.y));
      EXPECT_FALSE(seen.get(p.x, p.y));
      seen.set(p.x, p.y);
      ++total;
    }
  }
  EXPECT_EQ(total, b.count());
}

TEST(Convolution, SingleTapIsIdentity) {
  const BinaryImage b = random_binary(20, 15, 0.5, 2);
  const ScalarImage out = convolve_unit_sum(b, Kernel2D{});
  for (int y = 0; y < 15; ++y)
    for (int x = 0; x < 20; ++x) EXPECT_EQ(out.at(x, y), b.get(x, y) ? 1.0 : 0.0);
}

TEST(Convolution, BoxKernelOnImpulse) {
  BinaryImage b(9, 9);
  b.set(4, 4);
  Kernel2D k;
  k.width = k.height = 3;
  k.weights.assign(9, 1.0 / 9.0);
  const ScalarImage out = convolve_unit_sum(b, k);
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 9; ++x) {
      const bool inside = std::abs(x - 4) <= 1 && std::abs(y - 4) <= 1;
      EXPECT_NEAR(out.at(x, y), inside ? 1.0 / 9.0 : 0.0, 1e-15);
    }
}

TEST(Convolution, AllOnesInteriorIsOneAndBounded) {
  BinaryImage ones(30, 30, true);
  Kernel2D k;
  k.width = 5;
  k.height = 3;
  k.weights = {1, 2, 3, 2, 1, 2, 4, 6, 4, 2, 1, 2, 3, 2, 1};
  const double s = k.sum();
  for (double& w : k.weights) w /= s;
  const ScalarImage out = convolve_unit_sum(ones, k);
  EXPECT_NEAR(out.at(15, 15), 1.0, 1e-12);
  const BinaryImage r = random_binary(30, 30, 0.5, 4);
  const ScalarImage o2 = convolve_unit_sum(r, k);
  const ScalarImage o3 = kernels::serial::convolve(r, k);
  for (std::size_t i = 0; i < o2.values.size(); ++i) {
    EXPECT_GE(o2.values[i], 0.0);
    EXPECT_LE(o2.values[i], 1.0 + 1e-12);
    EXPECT_NEAR(o2.values[i], o3.values[i], 1e-12);
  }
}

TEST(Convolution, NonPositiveKernelRejected) {
  Kernel2D k;
  k.width = k.height = 3;
  k.weights.assign(9, 0.0);
  try {
    convolve_unit_sum(BinaryImage(5, 5), k);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidKernel);
  }
}

TEST(Blur, SerialAndParallelAgree) {
  const RasterImage img = random_rgb(40, 33, 8);
  const RasterImage a = kernels::serial::gaussian_blur(img, 2.0);
  const RasterImage b = kernels::parallel::gaussian_blur(img, 2.0);
  for (std::size_t i = 0; i < a.pixels().size(); ++i) {
    EXPECT_NEAR(a.pixels()[i].r, b.pixels()[i].r, 1e-6);
    EXPECT_NEAR(a.pixels()[i].g, b.pixels()[i].g, 1e-6);
    EXPECT_NEAR(a.pixels()[i].b, b.pixels()[i].b, 1e-6);
  }
}

TEST(Undistort, IdentityAndPrincipalPoint) {
  DistortionModel m{.fx = 1000, .fy = 1000, .cx = 640, .cy = 480};
  const std::vector<Vec2> pts{{10, 20}, {640, 480}, {1200, 33}};
  const auto out = undistort_points(pts, m);
  for (std::size_t i = 0; i < pts.size(); ++i) EXPECT_EQ(out[i], pts[i]);
  m.k1 = -0.2;
  m.k2 = 0.05;
  const std::vector<Vec2> pp{{640, 480}};
  EXPECT_NEAR((undistort_points(pp, m)[0] - pp[0]).norm(), 0.0, 1e-12);
}

TEST(Undistort, RoundTripWithinTolerance) {
  DistortionModel m{.fx = 1000, .fy = 1000, .cx = 640, .cy = 480, .k1 = -0.1};
  // Normalized radius 0.5.
  const Vec2 ideal(640 + 500 * std::cos(0.3), 480 + 500 * std::sin(0.3));
  const Vec2 distorted = m.distort(ideal);
  const std::vector<Vec2> in{distorted};
  EXPECT_LT((undistort_points(in, m)[0] - ideal).norm(), 1e-3);

  DistortionModel t{.fx = 900, .fy = 950, .cx = 600, .cy = 500, .k1 = -0.05, .k2 = 0.01, .p1 = 1e-3, .p2 = -5e-4};
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ux(100, 1100), uy(100, 900);
  for (int i = 0; i < 200; ++i) {
    const Vec2 p(ux(rng), uy(rng));
    const std::vector<Vec2> one{t.distort(p)};
    EXPECT_LT((undistort_points(one, t)[0] - p).norm(), 1e-3);
  }
}

TEST(Undistort, NonConvergenceIsNumericError) {
  DistortionModel m{.fx = 100, .fy = 100, .cx = 0, .cy = 0, .k1 = 5.0};
  const std::vector<Vec2> far{{900, 900}};
  try {
    undistort_points(far, m);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Numeric);
  }
}
