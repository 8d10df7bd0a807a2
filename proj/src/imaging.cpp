#include "bandpose/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "bandpose/error.hpp"
#include "bandpose/kernels.hpp"

namespace bandpose {

RasterImage::RasterImage(int width, int height, Rgb fill) : width_(width), height_(height) {
  if (width < 1 || height < 1) throw Error(ErrorKind::InvalidArgument, "image", "image dimensions must be positive");
  pixels_.assign(static_cast<std::size_t>(width) * height, fill);
}

RasterImage::RasterImage(int width, int height, std::vector<Rgb> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  if (width < 1 || height < 1) throw Error(ErrorKind::InvalidArgument, "image", "image dimensions must be positive");
  if (pixels_.size() != static_cast<std::size_t>(width) * height) {
    throw Error(ErrorKind::InvalidArgument, "image", "pixel count does not match dimensions");
  }
}

void RasterImage::clamp() {
  for (Rgb& p : pixels_) {
    p.r = std::clamp(p.r, 0.f, 1.f);
    p.g = std::clamp(p.g, 0.f, 1.f);
    p.b = std::clamp(p.b, 0.f, 1.f);
  }
}

BinaryImage::BinaryImage(int width, int height, bool fill)
    : width_(width), height_(height), bits_(static_cast<std::size_t>(width) * height, fill ? 1 : 0) {}

std::size_t BinaryImage::count() const {
  return static_cast<std::size_t>(std::count_if(bits_.begin(), bits_.end(), [](std::uint8_t v) { return v != 0; }));
}

double Kernel2D::sum() const { return std::accumulate(weights.begin(), weights.end(), 0.0); }

Region make_region(int label, std::vector<Pixel> pixels) {
  Region r;
  r.label = label;
  r.pixels = std::move(pixels);
  if (r.pixels.empty()) return r;
  double sx = 0, sy = 0;
  r.min_x = r.max_x = r.pixels.front().x;
  r.min_y = r.max_y = r.pixels.front().y;
  for (const Pixel& p : r.pixels) {
    sx += p.x;
    sy += p.y;
    r.min_x = std::min(r.min_x, p.x);
    r.max_x = std::max(r.max_x, p.x);
    r.min_y = std::min(r.min_y, p.y);
    r.max_y = std::max(r.max_y, p.y);
  }
  const double n = static_cast<double>(r.pixels.size());
  r.centroid = Vec2(sx / n, sy / n);
  for (const Pixel& p : r.pixels) {
    const double dx = p.x - r.centroid.x(), dy = p.y - r.centroid.y();
    r.mu20 += dx * dx;
    r.mu11 += dx * dy;
    r.mu02 += dy * dy;
  }
  r.mu20 /= n;
  r.mu11 /= n;
  r.mu02 /= n;
  return r;
}

namespace {

template <typename SameComponent>
std::vector<Region> flood_components(int w, int h, SameComponent&& member, auto&& label_of) {
  std::vector<Region> regions;
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(w) * h, 0);
  std::vector<Pixel> stack;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      if (seen[i] || !member(x, y)) continue;
      const int label = label_of(x, y);
      std::vector<Pixel> pixels;
      stack.clear();
      stack.push_back({x, y});
      seen[i] = 1;
      while (!stack.empty()) {
        const Pixel p = stack.back();
        stack.pop_back();
        pixels.push_back(p);
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = p.x + dx, ny = p.y + dy;
            if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
            const std::size_t j = static_cast<std::size_t>(ny) * w + nx;
            if (seen[j] || !member(nx, ny) || label_of(nx, ny) != label) continue;
            seen[j] = 1;
            stack.push_back({nx, ny});
          }
        }
      }
      std::sort(pixels.begin(), pixels.end(),
                [](const Pixel& a, const Pixel& b) { return a.y != b.y ? a.y < b.y : a.x < b.x; });
      regions.push_back(make_region(label, std::move(pixels)));
    }
  }
  return regions;
}

}  // namespace

std::vector<Region> connected_components(const BinaryImage& b) {
  return flood_components(
      b.width(), b.height(), [&](int x, int y) { return b.get(x, y); }, [](int, int) { return 0; });
}

std::vector<Region> connected_components(const LabelImage& labels) {
  return flood_components(
      labels.width, labels.height, [&](int x, int y) { return labels.at(x, y) != 0; },
      [&](int x, int y) { return static_cast<int>(labels.at(x, y)); });
}

HueSatImage rgb_to_hue_saturation(const RasterImage& img) { return kernels::parallel::rgb_to_hue_saturation(img); }

BinaryImage erode_disk(const BinaryImage& b, int radius) { return kernels::parallel::erode_disk(b, radius); }

BinaryImage dilate_disk(const BinaryImage& b, int radius) {
  BinaryImage inv(b.width(), b.height());
  auto src = b.bits();
  auto dst = inv.bits();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] ? 0 : 1;
  BinaryImage eroded = kernels::parallel::erode_disk(inv, radius);
  for (auto& v : eroded.bits()) v = v ? 0 : 1;
  return eroded;
}

ScalarImage convolve_unit_sum(const BinaryImage& b, const Kernel2D& kernel) {
  return kernels::parallel::convolve(b, kernel);
}

Vec2 DistortionModel::distort(const Vec2& ideal_px) const {
  const double x = (ideal_px.x() - cx) / fx;
  const double y = (ideal_px.y() - cy) / fy;
  const double r2 = x * x + y * y;
  const double radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3));
  const double xd = x * radial + 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x);
  const double yd = y * radial + p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y;
  return {xd * fx + cx, yd * fy + cy};
}

std::vector<Vec2> undistort_points(std::span<const Vec2> pts, const DistortionModel& model) {
  std::vector<Vec2> out;
  out.reserve(pts.size());
  constexpr int kMaxIterations = 20;
  constexpr double kTolerancePx = 1e-3;
  constexpr double kStopPx = 1e-10;
  for (const Vec2& target : pts) {
    if (model.is_identity()) {
      out.push_back(target);
      continue;
    }
    const double xd = (target.x() - model.cx) / model.fx;
    const double yd = (target.y() - model.cy) / model.fy;
    double x = xd, y = yd;
    double err = std::numeric_limits<double>::infinity();
    for (int it = 0; it < kMaxIterations && err > kStopPx; ++it) {
      const double r2 = x * x + y * y;
      const double radial = 1.0 + r2 * (model.k1 + r2 * (model.k2 + r2 * model.k3));
      const double dx = 2.0 * model.p1 * x * y + model.p2 * (r2 + 2.0 * x * x);
      const double dy = model.p1 * (r2 + 2.0 * y * y) + 2.0 * model.p2 * x * y;
      x = (xd - dx) / radial;
      y = (yd - dy) / radial;
      const Vec2 ideal(x * model.fx + model.cx, y * model.fy + model.cy);
      err = (model.distort(ideal) - target).norm();
    }
    if (!(err < kTolerancePx) || !std::isfinite(x) || !std::isfinite(y)) {
      std::ostringstream msg;
      msg << "undistortion did not converge for point (" << target.x() << ", " << target.y() << ")";
      throw Error(ErrorKind::Numeric, "undistort", msg.str());
    }
    out.emplace_back(x * model.fx + model.cx, y * model.fy + model.cy);
  }
  return out;
}

}  // namespace bandpose
