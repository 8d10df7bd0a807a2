#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bandpose/imaging.hpp"

namespace bandpose {

/// Color class id as used in calibration masks and pointer specs. 0 is
/// reserved for background / undefined.
using ClassId = int;
inline constexpr ClassId kUndefinedClass = 0;

struct HueSample {
  double hue = 0.0;        // radians
  double bandwidth = 0.0;  // radians
};

/// Variable-bandwidth wrapped-Gaussian kernel density over hue.
class HueKde {
 public:
  static constexpr int kLutBins = 1024;

  explicit HueKde(std::vector<HueSample> samples);

  /// Exact density: three nearest period images of every kernel.
  double density(double theta) const;
  std::span<const HueSample> samples() const noexcept { return samples_; }

  /// Density tabulated at theta_b = b * 2pi / kLutBins.
  std::vector<double> tabulate() const;

 private:
  std::vector<HueSample> samples_;
};

struct ColorClass {
  ClassId id = kUndefinedClass;
  std::string name;
  std::vector<double> lut;  // HueKde::kLutBins entries
  std::size_t sample_count = 0;
  double modal_hue = 0.0;
  std::optional<HueKde> kde;  // absent when loaded from disk

  /// Linearly interpolated table lookup.
  double density(double theta) const;
};

/// One density per band color plus the uniform background 1/(2pi).
class ColorClassSet {
 public:
  static const double kBackgroundDensity;

  explicit ColorClassSet(std::vector<ColorClass> classes);

  std::span<const ColorClass> classes() const noexcept { return classes_; }
  const ColorClass* find(ClassId id) const;

  /// argmax over class densities and the background; ties go to the
  /// background first, then to the earlier class.
  ClassId classify_hue(double theta) const;

 private:
  std::vector<ColorClass> classes_;
};

ColorClass make_color_class(ClassId id, std::string name, HueKde kde);

/// Builds one HueKde per nonzero id in `mask`. Per-sample bandwidth is
/// c / (saturation * value) with c fixing the median at 0.05 rad, then clamped
/// to [0.01, 0.5]. Throws InsufficientCalibrationData listing every class with
/// fewer than 100 usable pixels.
ColorClassSet calibrate_colors(const RasterImage& img, const LabelImage& mask, double min_saturation);

/// Pixels below `s_min`, with invalid hue, or outside `roi` (when given) are 0.
LabelImage classify_image(const ColorClassSet& set, const HueSatImage& hs, double s_min,
                          const BinaryImage* roi = nullptr);

void save_color_model(const std::filesystem::path& path, const ColorClassSet& set);
ColorClassSet load_color_model(const std::filesystem::path& path);

namespace kernels::serial {
LabelImage classify_image(const ColorClassSet& set, const HueSatImage& hs, double s_min, const BinaryImage* roi);
}
namespace kernels::parallel {
LabelImage classify_image(const ColorClassSet& set, const HueSatImage& hs, double s_min, const BinaryImage* roi);
}

}  // namespace bandpose
