#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "bandpose/color_model.hpp"
#include "bandpose/error.hpp"
#include "support/fixtures.hpp"

using namespace bandpose;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Oracle for a single wrapped Gaussian, summed over many periods.
double wrapped_gaussian(double theta, double mu, double sigma) {
  double sum = 0.0;
  for (int k = -20; k <= 20; ++k) {
    const double d = theta - mu + k * kTwoPi;
    sum += std::exp(-0.5 * d * d / (sigma * sigma));
  }
  return sum / (std::sqrt(kTwoPi) * sigma);
}

ColorClass single(ClassId id, double hue, double bw) {
  return make_color_class(id, "c" + std::to_string(id), HueKde({{hue, bw}}));
}

RasterImage patches(std::vector<Rgb> colors, int side, LabelImage& mask) {
  const int w = side * static_cast<int>(colors.size());
  RasterImage img(w, side);
  mask = LabelImage(w, side);
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < w; ++x) {
      img.at(x, y) = colors[x / side];
      mask.at(x, y) = static_cast<std::uint8_t>(x / side + 1);
    }
  return img;
}

}  // namespace

TEST(HueKde, SingleSampleDensityAtMode) {
  HueKde kde({{0.0, 0.1}});
  EXPECT_NEAR(kde.density(0.0), 1.0 / (std::sqrt(kTwoPi) * 0.1), 1e-9);
  EXPECT_NEAR(kde.density(0.0), 3.989, 1e-3);
}

TEST(HueKde, MatchesManyPeriodOracleAndIsPeriodic) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> hue(0, kTwoPi), bw(0.01, 0.9);
  std::vector<HueSample> samples;
  for (int i = 0; i < 25; ++i) samples.push_back({hue(rng), bw(rng)});
  HueKde kde(samples);
  for (int i = 0; i < 200; ++i) {
    const double t = hue(rng);
    double oracle = 0.0;
    for (const auto& s : samples) oracle += wrapped_gaussian(t, s.hue, s.bandwidth);
    oracle /= samples.size();
    EXPECT_NEAR(kde.density(t), oracle, 1e-9);
    EXPECT_NEAR(kde.density(t + kTwoPi), kde.density(t), 1e-12);
  }
}

TEST(HueKde, IntegratesToOne) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> hue(0, kTwoPi), bw(0.01, 0.5);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<HueSample> samples;
    for (int i = 0; i < 40; ++i) samples.push_back({hue(rng), bw(rng)});
    HueKde kde(samples);
    const int n = 200000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += kde.density((i + 0.5) * kTwoPi / n);
    const double integral = sum * kTwoPi / n;
    EXPECT_GE(integral, 0.999);
    EXPECT_LE(integral, 1.001);
    // Tabulated density integrates the same way.
    const ColorClass c = make_color_class(1, "x", kde);
    double lut = 0.0;
    for (double v : c.lut) lut += v;
    EXPECT_NEAR(lut * kTwoPi / c.lut.size(), 1.0, 1e-3);
  }
}

TEST(ClassifyHue, BackgroundWhenAllDensitiesLow) {
  ColorClassSet set({single(1, 0.0, 0.1), single(2, kTwoPi / 3, 0.1)});
  EXPECT_DOUBLE_EQ(ColorClassSet::kBackgroundDensity, 1.0 / kTwoPi);
  EXPECT_EQ(set.classify_hue(std::numbers::pi + 1.0), kUndefinedClass);
  EXPECT_EQ(set.classify_hue(0.0), 1);
  EXPECT_EQ(set.classify_hue(kTwoPi / 3), 2);
}

TEST(ClassifyHue, TieGoesToLowerId) {
  // Two classes built from the same sample tie exactly everywhere.
  ColorClassSet set({single(1, 1.0, 0.3), single(2, 1.0, 0.3)});
  for (double t : {0.9, 1.0, 1.2}) {
    ASSERT_EQ(set.classes()[0].density(t), set.classes()[1].density(t));
    ASSERT_GT(set.classes()[0].density(t), ColorClassSet::kBackgroundDensity);
    EXPECT_EQ(set.classify_hue(t), 1);
  }
  // Mirror-symmetric pair: the midpoint goes to one of the two, never background.
  ColorClassSet pair({single(1, 1.0, 0.3), single(2, 1.4, 0.3)});
  EXPECT_NE(pair.classify_hue(1.2), kUndefinedClass);
}

TEST(ClassifyHue, ShiftEquivariance) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> hue(0, kTwoPi);
  std::vector<HueSample> a{{0.3, 0.05}, {0.35, 0.08}}, b{{2.0, 0.1}, {2.2, 0.06}};
  auto build = [&](double shift) {
    auto sh = [&](std::vector<HueSample> v) {
      for (auto& s : v) s.hue = std::fmod(s.hue + shift, kTwoPi);
      return v;
    };
    return ColorClassSet({make_color_class(1, "a", HueKde(sh(a))), make_color_class(2, "b", HueKde(sh(b)))});
  };
  const ColorClassSet base = build(0.0);
  for (double shift : {0.5, 1.7, 4.1}) {
    const ColorClassSet moved = build(shift);
    int mismatches = 0;
    for (int i = 0; i < 2000; ++i) {
      const double t = hue(rng);
      // Table interpolation can flip a query sitting right on a decision boundary.
      if (base.classify_hue(t) != moved.classify_hue(std::fmod(t + shift, kTwoPi))) ++mismatches;
    }
    EXPECT_LE(mismatches, 4) << "shift " << shift;
  }
}

TEST(Calibrate, RedGreenPatches) {
  LabelImage mask;
  const RasterImage img = patches({{1, 0, 0}, {0, 1, 0}}, 12, mask);
  const ColorClassSet set = calibrate_colors(img, mask, 0.2);
  ASSERT_EQ(set.classes().size(), 2u);
  EXPECT_NEAR(std::remainder(set.find(1)->modal_hue, kTwoPi), 0.0, 0.02);
  EXPECT_NEAR(set.find(2)->modal_hue, kTwoPi / 3, 0.02);
  EXPECT_EQ(set.classify_hue(0.0), 1);
  EXPECT_EQ(set.classify_hue(kTwoPi / 3), 2);
  EXPECT_GT(set.find(1)->kde->density(0.0), set.find(2)->kde->density(0.0));
  EXPECT_GT(set.find(2)->kde->density(kTwoPi / 3), set.find(1)->kde->density(kTwoPi / 3));
}

TEST(Calibrate, GrayPatchIsInsufficient) {
  LabelImage mask;
  const RasterImage img = patches({{1, 0, 0}, {0.5f, 0.5f, 0.5f}}, 12, mask);
  try {
    calibrate_colors(img, mask, 0.2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InsufficientCalibrationData);
    EXPECT_NE(e.detail().find('2'), std::string::npos);
  }
}

TEST(Calibrate, BandwidthFloorAndCap) {
  LabelImage mask;
  RasterImage img = patches({{1, 0, 0}, {0, 1, 0}}, 12, mask);
  // Half of the red patch dim and weakly saturated: larger bandwidths there.
  for (int y = 0; y < 12; ++y)
    for (int x = 0; x < 6; ++x) img.at(x, y) = {0.3f, 0.2f, 0.2f};
  const ColorClassSet set = calibrate_colors(img, mask, 0.2);
  for (const ColorClass& c : set.classes())
    for (const HueSample& s : c.kde->samples()) {
      EXPECT_GE(s.bandwidth, 0.01);
      EXPECT_LE(s.bandwidth, 0.5);
    }
}

TEST(ClassifyImage, SaturationThreshold) {
  LabelImage mask;
  RasterImage img = patches({{0.9f, 0.2f, 0.2f}, {0.2f, 0.9f, 0.2f}}, 12, mask);
  const ColorClassSet set = calibrate_colors(img, mask, 0.2);
  const HueSatImage hs = rgb_to_hue_saturation(img);
  const LabelImage all_bg = classify_image(set, hs, 1.0);
  for (auto l : all_bg.labels) EXPECT_EQ(l, 0);
  const LabelImage lab = classify_image(set, hs, 0.3);
  EXPECT_EQ(lab.labels, mask.labels);
}

TEST(ClassifyImage, RaisingThresholdNeverAddsLabels) {
  const auto& colors = testing_support::reference_colors();
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<float> u(0, 1);
  RasterImage img(80, 60);
  for (Rgb& p : img.pixels()) p = {u(rng), u(rng), u(rng)};
  const HueSatImage hs = rgb_to_hue_saturation(img);
  LabelImage previous = classify_image(colors, hs, 0.0);
  for (double s : {0.1, 0.2, 0.3, 0.5, 0.8}) {
    const LabelImage cur = classify_image(colors, hs, s);
    for (std::size_t i = 0; i < cur.labels.size(); ++i) {
      if (cur.labels[i] != 0) {
        EXPECT_EQ(cur.labels[i], previous.labels[i]);
      }
    }
    EXPECT_EQ(kernels::serial::classify_image(colors, hs, s, nullptr).labels, cur.labels);
    previous = cur;
  }
}

TEST(ClassifyImage, DistractorBetweenNarrowClassesIsBackground) {
  ColorClassSet set({single(1, 0.0, 0.05), single(2, 1.0, 0.05)});
  RasterImage img(4, 1);
  // Hue 0.5 rad, 0.5 from both classes.
  img.at(0, 0) = {1.0f, static_cast<float>(0.5 / (std::numbers::pi / 3)), 0.0f};
  img.at(1, 0) = {1, 0, 0};
  const HueSatImage hs = rgb_to_hue_saturation(img);
  ASSERT_NEAR(hs.hue[0], 0.5, 1e-5);
  const LabelImage lab = classify_image(set, hs, 0.3);
  EXPECT_EQ(lab.at(0, 0), 0);
  EXPECT_EQ(lab.at(1, 0), 1);
}

TEST(ClassifyImage, MatchesRenderedBandMaskAwayFromBoundaries) {
  const auto& cfg = testing_support::reference();
  const SceneSpec scene = testing_support::scene_at(505.0, 20.0);
  const RasterImage img = render(scene, cfg.camera).image;
  const LabelImage truth = render_label_mask(scene, cfg.camera);
  const LabelImage lab = classify_image(testing_support::reference_colors(), rgb_to_hue_saturation(img), 0.3);
  std::size_t checked = 0, wrong = 0;
  for (int y = 2; y < truth.height - 2; ++y)
    for (int x = 2; x < truth.width - 2; ++x) {
      const auto l = truth.at(x, y);
      bool interior = true;
      for (int dy = -2; dy <= 2 && interior; ++dy)
        for (int dx = -2; dx <= 2 && interior; ++dx) interior = truth.at(x + dx, y + dy) == l;
      if (!interior) continue;
      ++checked;
      if (lab.at(x, y) != l) ++wrong;
    }
  EXPECT_GT(checked, 1000000u);
  EXPECT_EQ(wrong, 0u);
}

TEST(ColorModelIo, SaveLoadRoundTrip) {
  const auto& colors = testing_support::reference_colors();
  const auto path = std::filesystem::temp_directory_path() / "bandpose_color_model_test.json";
  save_color_model(path, colors);
  const ColorClassSet loaded = load_color_model(path);
  std::filesystem::remove(path);
  ASSERT_EQ(loaded.classes().size(), colors.classes().size());
  for (std::size_t i = 0; i < loaded.classes().size(); ++i) {
    EXPECT_EQ(loaded.classes()[i].id, colors.classes()[i].id);
    EXPECT_EQ(loaded.classes()[i].name, colors.classes()[i].name);
    ASSERT_EQ(loaded.classes()[i].lut.size(), colors.classes()[i].lut.size());
    for (std::size_t b = 0; b < loaded.classes()[i].lut.size(); ++b)
      EXPECT_NEAR(loaded.classes()[i].lut[b], colors.classes()[i].lut[b], 1e-12 * (1 + colors.classes()[i].lut[b]));
  }
  for (int i = 0; i < 1000; ++i) {
    const double t = i * kTwoPi / 1000;
    EXPECT_EQ(loaded.classify_hue(t), colors.classify_hue(t));
  }
}
