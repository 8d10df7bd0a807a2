#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace bandpose {

using Vec2 = Eigen::Vector2d;

struct Rgb {
  float r = 0.f;
  float g = 0.f;
  float b = 0.f;
};

struct Pixel {
  int x = 0;
  int y = 0;
  friend bool operator==(const Pixel&, const Pixel&) = default;
};

/// Row-major RGB raster, channels in [0,1].
class RasterImage {
 public:
  RasterImage(int width, int height, Rgb fill = {});
  RasterImage(int width, int height, std::vector<Rgb> pixels);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  const Rgb& at(int x, int y) const { return pixels_[index(x, y)]; }
  Rgb& at(int x, int y) { return pixels_[index(x, y)]; }
  std::span<const Rgb> pixels() const noexcept { return pixels_; }
  std::span<Rgb> pixels() noexcept { return pixels_; }

  // Clamps every channel into [0,1].
  void clamp();

 private:
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_;
  int height_;
  std::vector<Rgb> pixels_;
};

/// Hexcone hue (radians, [0, 2pi)), saturation and value per pixel.
/// `valid` is 0 where the pixel is achromatic and the hue carries no meaning.
struct HueSatImage {
  int width = 0;
  int height = 0;
  std::vector<float> hue;
  std::vector<float> saturation;
  std::vector<float> value;
  std::vector<std::uint8_t> valid;

  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x);
  }
};

class BinaryImage {
 public:
  BinaryImage() = default;
  BinaryImage(int width, int height, bool fill = false);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool in_bounds(int x, int y) const noexcept { return x >= 0 && y >= 0 && x < width_ && y < height_; }
  bool get(int x, int y) const { return bits_[index(x, y)] != 0; }
  void set(int x, int y, bool v = true) { bits_[index(x, y)] = v ? 1 : 0; }
  std::span<const std::uint8_t> bits() const noexcept { return bits_; }
  std::span<std::uint8_t> bits() noexcept { return bits_; }
  std::size_t count() const;

  friend bool operator==(const BinaryImage&, const BinaryImage&) = default;

 private:
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// Per-pixel class ids; 0 means background / unlabeled.
struct LabelImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> labels;

  LabelImage() = default;
  LabelImage(int w, int h) : width(w), height(h), labels(static_cast<std::size_t>(w) * h, 0) {}
  std::uint8_t at(int x, int y) const { return labels[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t& at(int x, int y) { return labels[static_cast<std::size_t>(y) * width + x]; }
};

struct ScalarImage {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

/// Odd-sized 2D kernel; element (u, v) with u, v in [-half, half] is stored at
/// (v + half_height) * width + (u + half_width).
struct Kernel2D {
  int width = 1;
  int height = 1;
  std::vector<double> weights{1.0};

  int half_width() const noexcept { return width / 2; }
  int half_height() const noexcept { return height / 2; }
  double at(int u, int v) const { return weights[static_cast<std::size_t>(v + half_height()) * width + (u + half_width())]; }
  double sum() const;
};

/// 8-connected component of 1-pixels (or of equal nonzero labels).
struct Region {
  int label = 0;
  std::vector<Pixel> pixels;
  Vec2 centroid = Vec2::Zero();
  // Second central moments (variances / covariance of pixel centres).
  double mu20 = 0.0;
  double mu11 = 0.0;
  double mu02 = 0.0;
  int min_x = 0, min_y = 0, max_x = 0, max_y = 0;

  std::size_t area() const noexcept { return pixels.size(); }
};

/// Builds a region from a pixel list, filling in centroid, moments and bounds.
Region make_region(int label, std::vector<Pixel> pixels);

/// Brown-Conrady lens model in pixel units.
struct DistortionModel {
  double fx = 1.0, fy = 1.0, cx = 0.0, cy = 0.0;
  double k1 = 0.0, k2 = 0.0, k3 = 0.0;
  double p1 = 0.0, p2 = 0.0;

  bool is_identity() const noexcept { return k1 == 0 && k2 == 0 && k3 == 0 && p1 == 0 && p2 == 0; }
  Vec2 distort(const Vec2& ideal_px) const;
};

HueSatImage rgb_to_hue_saturation(const RasterImage& img);
BinaryImage erode_disk(const BinaryImage& b, int radius);
BinaryImage dilate_disk(const BinaryImage& b, int radius);
std::vector<Region> connected_components(const BinaryImage& b);
std::vector<Region> connected_components(const LabelImage& labels);
ScalarImage convolve_unit_sum(const BinaryImage& b, const Kernel2D& kernel);

/// Fixed-point inversion of DistortionModel::distort. Throws Error(Numeric)
/// if a point fails to converge to 1e-3 px within 20 iterations.
std::vector<Vec2> undistort_points(std::span<const Vec2> pts, const DistortionModel& model);

}  // namespace bandpose
