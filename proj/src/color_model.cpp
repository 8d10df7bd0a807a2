#include "bandpose/color_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "json.hpp"

#include "bandpose/error.hpp"

namespace bandpose {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kMedianBandwidth = 0.05;
constexpr double kMinBandwidth = 0.01;
constexpr double kMaxBandwidth = 0.5;
constexpr std::size_t kMinCalibrationPixels = 100;
// Kernels are truncated at this many bandwidths when tabulating.
constexpr double kTruncation = 9.0;

double wrap_angle(double a) {
  a = std::fmod(a, kTwoPi);
  if (a < 0.0) a += kTwoPi;
  return a;
}

// Difference folded to [-pi, pi].
double circular_difference(double a, double b) {
  double d = std::fmod(a - b, kTwoPi);
  if (d > std::numbers::pi) d -= kTwoPi;
  if (d < -std::numbers::pi) d += kTwoPi;
  return d;
}

double gaussian(double d, double h) {
  return std::exp(-0.5 * d * d / (h * h)) / (std::sqrt(kTwoPi) * h);
}

double wrapped_gaussian(double d, double h) {
  return gaussian(d, h) + gaussian(d - kTwoPi, h) + gaussian(d + kTwoPi, h);
}

}  // namespace

HueKde::HueKde(std::vector<HueSample> samples) : samples_(std::move(samples)) {
  if (samples_.empty()) throw Error(ErrorKind::InvalidArgument, "color-model", "kernel density needs samples");
  for (auto& s : samples_) {
    if (!(s.bandwidth > 0.0)) throw Error(ErrorKind::InvalidArgument, "color-model", "bandwidth must be positive");
    s.hue = wrap_angle(s.hue);
  }
}

double HueKde::density(double theta) const {
  double acc = 0.0;
  for (const HueSample& s : samples_) acc += wrapped_gaussian(circular_difference(theta, s.hue), s.bandwidth);
  return acc / static_cast<double>(samples_.size());
}

std::vector<double> HueKde::tabulate() const {
  std::vector<double> lut(kLutBins, 0.0);
  const double step = kTwoPi / kLutBins;
  for (const HueSample& s : samples_) {
    const double reach = kTruncation * s.bandwidth;
    if (reach >= std::numbers::pi) {
      for (int b = 0; b < kLutBins; ++b) lut[b] += wrapped_gaussian(circular_difference(b * step, s.hue), s.bandwidth);
      continue;
    }
    const int lo = static_cast<int>(std::floor((s.hue - reach) / step));
    const int hi = static_cast<int>(std::ceil((s.hue + reach) / step));
    for (int k = lo; k <= hi; ++k) {
      const int b = ((k % kLutBins) + kLutBins) % kLutBins;
      lut[b] += wrapped_gaussian(circular_difference(b * step, s.hue), s.bandwidth);
    }
  }
  const double n = static_cast<double>(samples_.size());
  for (double& v : lut) v /= n;
  return lut;
}

double ColorClass::density(double theta) const {
  const double pos = wrap_angle(theta) * (HueKde::kLutBins / kTwoPi);
  int b0 = static_cast<int>(pos);
  const double frac = pos - b0;
  b0 %= HueKde::kLutBins;
  const int b1 = (b0 + 1) % HueKde::kLutBins;
  return lut[b0] + frac * (lut[b1] - lut[b0]);
}

const double ColorClassSet::kBackgroundDensity = 1.0 / kTwoPi;

ColorClassSet::ColorClassSet(std::vector<ColorClass> classes) : classes_(std::move(classes)) {
  std::stable_sort(classes_.begin(), classes_.end(), [](const ColorClass& a, const ColorClass& b) { return a.id < b.id; });
  if (classes_.size() < 2) {
    throw Error(ErrorKind::InvalidArgument, "color-model", "at least two color classes are required");
  }
  for (std::size_t i = 0; i < classes_.size(); ++i) {
    if (classes_[i].id == kUndefinedClass) throw Error(ErrorKind::InvalidArgument, "color-model", "class id 0 is reserved");
    if (classes_[i].lut.size() != static_cast<std::size_t>(HueKde::kLutBins)) {
      throw Error(ErrorKind::InvalidArgument, "color-model", "density table has the wrong size");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (classes_[j].id == classes_[i].id) throw Error(ErrorKind::InvalidArgument, "color-model", "duplicate class id");
    }
  }
}

const ColorClass* ColorClassSet::find(ClassId id) const {
  for (const auto& c : classes_) {
    if (c.id == id) return &c;
  }
  return nullptr;
}

ClassId ColorClassSet::classify_hue(double theta) const {
  ClassId best = kUndefinedClass;
  double best_density = kBackgroundDensity;
  for (const ColorClass& c : classes_) {
    const double f = c.density(theta);
    if (f > best_density) {
      best_density = f;
      best = c.id;
    }
  }
  return best;
}

ColorClass make_color_class(ClassId id, std::string name, HueKde kde) {
  ColorClass c;
  c.id = id;
  c.name = std::move(name);
  c.lut = kde.tabulate();
  c.sample_count = kde.samples().size();
  const auto it = std::max_element(c.lut.begin(), c.lut.end());
  c.modal_hue = static_cast<double>(it - c.lut.begin()) * kTwoPi / HueKde::kLutBins;
  c.kde = std::move(kde);
  return c;
}

ColorClassSet calibrate_colors(const RasterImage& img, const LabelImage& mask, double min_saturation) {
  if (mask.width != img.width() || mask.height != img.height()) {
    throw Error(ErrorKind::InvalidArgument, "calibrate", "mask dimensions do not match the image");
  }
  const HueSatImage hs = rgb_to_hue_saturation(img);
  struct Raw {
    std::vector<double> hue;
    std::vector<double> inverse_sv;
  };
  std::map<ClassId, Raw> per_class;
  for (std::size_t i = 0; i < mask.labels.size(); ++i) {
    const ClassId id = mask.labels[i];
    if (id == kUndefinedClass) continue;
    Raw& raw = per_class[id];
    if (!hs.valid[i] || hs.saturation[i] < min_saturation) continue;
    raw.hue.push_back(hs.hue[i]);
    raw.inverse_sv.push_back(1.0 / (static_cast<double>(hs.saturation[i]) * hs.value[i]));
  }
  std::ostringstream failures;
  for (const auto& [id, raw] : per_class) {
    if (raw.hue.size() < kMinCalibrationPixels) {
      failures << " class " << id << " (" << raw.hue.size() << " usable pixels)";
    }
  }
  if (!failures.str().empty()) {
    throw Error(ErrorKind::InsufficientCalibrationData, "calibrate",
                "need at least 100 saturated pixels per class:" + failures.str());
  }

  std::vector<ColorClass> classes;
  for (auto& [id, raw] : per_class) {
    std::vector<double> sorted = raw.inverse_sv;
    const std::size_t mid = sorted.size() / 2;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(mid), sorted.end());
    double median = sorted[mid];
    if (sorted.size() % 2 == 0) {
      median = 0.5 * (median + *std::max_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(mid)));
    }
    const double scale = kMedianBandwidth / median;
    std::vector<HueSample> samples;
    samples.reserve(raw.hue.size());
    for (std::size_t k = 0; k < raw.hue.size(); ++k) {
      samples.push_back({raw.hue[k], std::clamp(scale * raw.inverse_sv[k], kMinBandwidth, kMaxBandwidth)});
    }
    classes.push_back(make_color_class(id, "class" + std::to_string(id), HueKde(std::move(samples))));
  }
  if (classes.size() < 2) {
    throw Error(ErrorKind::InsufficientCalibrationData, "calibrate", "mask must label at least two color classes");
  }
  return ColorClassSet(std::move(classes));
}

namespace kernels {

namespace {
inline std::uint8_t classify_pixel(const ColorClassSet& set, const HueSatImage& hs, std::size_t i, double s_min,
                                   const BinaryImage* roi) {
  if (roi && !roi->bits()[i]) return 0;
  if (!hs.valid[i] || hs.saturation[i] < s_min) return 0;
  return static_cast<std::uint8_t>(set.classify_hue(hs.hue[i]));
}
}  // namespace

LabelImage serial::classify_image(const ColorClassSet& set, const HueSatImage& hs, double s_min,
                                  const BinaryImage* roi) {
  LabelImage out(hs.width, hs.height);
  for (std::size_t i = 0; i < out.labels.size(); ++i) out.labels[i] = classify_pixel(set, hs, i, s_min, roi);
  return out;
}

LabelImage parallel::classify_image(const ColorClassSet& set, const HueSatImage& hs, double s_min,
                                    const BinaryImage* roi) {
  LabelImage out(hs.width, hs.height);
  const auto n = static_cast<std::ptrdiff_t>(out.labels.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    out.labels[i] = classify_pixel(set, hs, static_cast<std::size_t>(i), s_min, roi);
  }
  return out;
}

}  // namespace kernels

LabelImage classify_image(const ColorClassSet& set, const HueSatImage& hs, double s_min, const BinaryImage* roi) {
  if (roi && (roi->width() != hs.width || roi->height() != hs.height)) {
    throw Error(ErrorKind::InvalidArgument, "classify", "region of interest does not match the image");
  }
  return kernels::parallel::classify_image(set, hs, s_min, roi);
}

void save_color_model(const std::filesystem::path& path, const ColorClassSet& set) {
  nlohmann::json j;
  j["format"] = "bandpose-color-model";
  j["version"] = 1;
  j["lut_bins"] = HueKde::kLutBins;
  j["classes"] = nlohmann::json::array();
  for (const ColorClass& c : set.classes()) {
    j["classes"].push_back({{"id", c.id},
                            {"name", c.name},
                            {"samples", c.sample_count},
                            {"modal_hue_rad", c.modal_hue},
                            {"lut", c.lut}});
  }
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "color-model", "cannot write " + path.string());
  out << j.dump(1) << '\n';
}

ColorClassSet load_color_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "color-model", "cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
    if (j.at("format").get<std::string>() != "bandpose-color-model" || j.at("lut_bins").get<int>() != HueKde::kLutBins) {
      throw Error(ErrorKind::Io, "color-model", "unsupported color model file " + path.string());
    }
    std::vector<ColorClass> classes;
    for (const auto& jc : j.at("classes")) {
      ColorClass c;
      c.id = jc.at("id").get<int>();
      c.name = jc.at("name").get<std::string>();
      c.sample_count = jc.at("samples").get<std::size_t>();
      c.modal_hue = jc.at("modal_hue_rad").get<double>();
      c.lut = jc.at("lut").get<std::vector<double>>();
      classes.push_back(std::move(c));
    }
    return ColorClassSet(std::move(classes));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Io, "color-model", path.string() + ": " + e.what());
  }
}

}  // namespace bandpose
