#include "bandpose/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "bandpose/error.hpp"

namespace bandpose::kernels {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct HsvPixel {
  float hue;
  float saturation;
  float value;
  std::uint8_t valid;
};

inline HsvPixel hexcone(const Rgb& p) {
  const double r = p.r, g = p.g, b = p.b;
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double chroma = mx - mn;
  HsvPixel out{0.f, 0.f, static_cast<float>(mx), 0};
  if (mx > 0.0) out.saturation = static_cast<float>(chroma / mx);
  if (chroma <= 0.0) return out;
  double sector;
  if (mx == r) {
    sector = (g - b) / chroma;
    if (sector < 0.0) sector += 6.0;
  } else if (mx == g) {
    sector = (b - r) / chroma + 2.0;
  } else {
    sector = (r - g) / chroma + 4.0;
  }
  double hue = sector * (std::numbers::pi / 3.0);
  if (hue >= kTwoPi) hue -= kTwoPi;
  float hf = static_cast<float>(hue);
  if (static_cast<double>(hf) >= kTwoPi) hf = 0.f;
  out.hue = hf;
  out.valid = 1;
  return out;
}

HueSatImage allocate_hs(const RasterImage& img) {
  HueSatImage hs;
  hs.width = img.width();
  hs.height = img.height();
  const std::size_t n = img.pixels().size();
  hs.hue.resize(n);
  hs.saturation.resize(n);
  hs.value.resize(n);
  hs.valid.resize(n);
  return hs;
}

void check_kernel(const Kernel2D& kernel) {
  if (kernel.width % 2 == 0 || kernel.height % 2 == 0 ||
      kernel.weights.size() != static_cast<std::size_t>(kernel.width) * kernel.height) {
    throw Error(ErrorKind::InvalidKernel, "convolve", "kernel dimensions must be odd and match the weight count");
  }
  if (!(kernel.sum() > 0.0)) {
    throw Error(ErrorKind::InvalidKernel, "convolve", "kernel sum must be positive");
  }
}

// Length of the run of ones starting at x going right (inclusive); runs
// reaching the border are unbounded because out-of-image pixels are ignored.
constexpr int kUnbounded = std::numeric_limits<int>::max() / 2;

void row_runs(std::span<const std::uint8_t> row, std::vector<int>& left, std::vector<int>& right) {
  const int w = static_cast<int>(row.size());
  left.resize(w);
  right.resize(w);
  int run = kUnbounded;
  for (int x = 0; x < w; ++x) {
    run = row[x] ? (run == kUnbounded ? kUnbounded : run + 1) : 0;
    left[x] = run;
  }
  run = kUnbounded;
  for (int x = w - 1; x >= 0; --x) {
    run = row[x] ? (run == kUnbounded ? kUnbounded : run + 1) : 0;
    right[x] = run;
  }
}

std::vector<int> disk_chords(int radius) {
  std::vector<int> chord(2 * radius + 1);
  for (int dy = -radius; dy <= radius; ++dy) {
    chord[dy + radius] = static_cast<int>(std::floor(std::sqrt(static_cast<double>(radius * radius - dy * dy))));
  }
  return chord;
}

}  // namespace

std::vector<double> gaussian_taps(double sigma) {
  if (sigma <= 0.0) return {1.0};
  const int half = static_cast<int>(std::ceil(4.0 * sigma));
  std::vector<double> taps(2 * half + 1);
  double total = 0.0;
  for (int i = -half; i <= half; ++i) {
    taps[i + half] = std::exp(-0.5 * i * i / (sigma * sigma));
    total += taps[i + half];
  }
  for (double& t : taps) t /= total;
  return taps;
}

namespace serial {

HueSatImage rgb_to_hue_saturation(const RasterImage& img) {
  HueSatImage hs = allocate_hs(img);
  const auto px = img.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) {
    const HsvPixel h = hexcone(px[i]);
    hs.hue[i] = h.hue;
    hs.saturation[i] = h.saturation;
    hs.value[i] = h.value;
    hs.valid[i] = h.valid;
  }
  return hs;
}

BinaryImage erode_disk(const BinaryImage& b, int radius) {
  if (radius < 0) throw Error(ErrorKind::InvalidArgument, "erode", "radius must be non-negative");
  BinaryImage out(b.width(), b.height());
  const int r2 = radius * radius;
  for (int y = 0; y < b.height(); ++y) {
    for (int x = 0; x < b.width(); ++x) {
      bool keep = true;
      for (int dy = -radius; dy <= radius && keep; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
          if (dx * dx + dy * dy > r2) continue;
          if (!b.in_bounds(x + dx, y + dy)) continue;
          if (!b.get(x + dx, y + dy)) {
            keep = false;
            break;
          }
        }
      }
      out.set(x, y, keep);
    }
  }
  return out;
}

ScalarImage convolve(const BinaryImage& b, const Kernel2D& kernel) {
  check_kernel(kernel);
  ScalarImage out{b.width(), b.height(), std::vector<double>(static_cast<std::size_t>(b.width()) * b.height(), 0.0)};
  const int hw = kernel.half_width(), hh = kernel.half_height();
  for (int y = 0; y < b.height(); ++y) {
    for (int x = 0; x < b.width(); ++x) {
      double acc = 0.0;
      for (int v = -hh; v <= hh; ++v) {
        for (int u = -hw; u <= hw; ++u) {
          const int sx = x - u, sy = y - v;
          if (b.in_bounds(sx, sy) && b.get(sx, sy)) acc += kernel.at(u, v);
        }
      }
      out.values[static_cast<std::size_t>(y) * b.width() + x] = acc;
    }
  }
  return out;
}

RasterImage gaussian_blur(const RasterImage& img, double sigma) {
  if (sigma <= 0.0) return img;
  const auto taps = gaussian_taps(sigma);
  const int half = static_cast<int>(taps.size() / 2);
  const int w = img.width(), h = img.height();
  RasterImage tmp(w, h), out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double r = 0, g = 0, bl = 0;
      for (int k = -half; k <= half; ++k) {
        const Rgb& p = img.at(std::clamp(x + k, 0, w - 1), y);
        r += taps[k + half] * p.r;
        g += taps[k + half] * p.g;
        bl += taps[k + half] * p.b;
      }
      tmp.at(x, y) = {static_cast<float>(r), static_cast<float>(g), static_cast<float>(bl)};
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double r = 0, g = 0, bl = 0;
      for (int k = -half; k <= half; ++k) {
        const Rgb& p = tmp.at(x, std::clamp(y + k, 0, h - 1));
        r += taps[k + half] * p.r;
        g += taps[k + half] * p.g;
        bl += taps[k + half] * p.b;
      }
      out.at(x, y) = {static_cast<float>(r), static_cast<float>(g), static_cast<float>(bl)};
    }
  }
  return out;
}

}  // namespace serial

namespace parallel {

HueSatImage rgb_to_hue_saturation(const RasterImage& img) {
  HueSatImage hs = allocate_hs(img);
  const auto px = img.pixels();
  const auto n = static_cast<std::ptrdiff_t>(px.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const HsvPixel h = hexcone(px[i]);
    hs.hue[i] = h.hue;
    hs.saturation[i] = h.saturation;
    hs.value[i] = h.value;
    hs.valid[i] = h.valid;
  }
  return hs;
}

BinaryImage erode_disk(const BinaryImage& b, int radius) {
  if (radius < 0) throw Error(ErrorKind::InvalidArgument, "erode", "radius must be non-negative");
  if (radius == 0) return b;
  const int w = b.width(), h = b.height();
  std::vector<std::vector<int>> left(h), right(h);
  const auto bits = b.bits();
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    row_runs(bits.subspan(static_cast<std::size_t>(y) * w, w), left[y], right[y]);
  }
  const auto chord = disk_chords(radius);
  BinaryImage out(w, h);
  auto out_bits = out.bits();
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!bits[static_cast<std::size_t>(y) * w + x]) continue;
      bool keep = true;
      for (int dy = -radius; dy <= radius && keep; ++dy) {
        const int yy = y + dy;
        if (yy < 0 || yy >= h) continue;
        const int need = chord[dy + radius] + 1;
        keep = left[yy][x] >= need && right[yy][x] >= need;
      }
      out_bits[static_cast<std::size_t>(y) * w + x] = keep ? 1 : 0;
    }
  }
  return out;
}

ScalarImage convolve(const BinaryImage& b, const Kernel2D& kernel) {
  check_kernel(kernel);
  const int w = b.width(), h = b.height();
  ScalarImage out{w, h, std::vector<double>(static_cast<std::size_t>(w) * h, 0.0)};
  const int hw = kernel.half_width(), hh = kernel.half_height();
  const auto bits = b.bits();
  std::vector<std::uint8_t> row_has_ones(h, 0);
  for (int y = 0; y < h; ++y) {
    const auto row = bits.subspan(static_cast<std::size_t>(y) * w, w);
    row_has_ones[y] = std::any_of(row.begin(), row.end(), [](std::uint8_t v) { return v != 0; }) ? 1 : 0;
  }
#pragma omp parallel for schedule(dynamic, 8)
  for (int y = 0; y < h; ++y) {
    for (int v = -hh; v <= hh; ++v) {
      const int sy = y - v;
      if (sy < 0 || sy >= h || !row_has_ones[sy]) continue;
      const std::uint8_t* src = bits.data() + static_cast<std::size_t>(sy) * w;
      const double* krow = kernel.weights.data() + static_cast<std::size_t>(v + hh) * kernel.width;
      double* dst = out.values.data() + static_cast<std::size_t>(y) * w;
      for (int x = 0; x < w; ++x) {
        const int u_lo = std::max(-hw, x - (w - 1));
        const int u_hi = std::min(hw, x);
        double acc = 0.0;
        for (int u = u_lo; u <= u_hi; ++u) {
          if (src[x - u]) acc += krow[u + hw];
        }
        dst[x] += acc;
      }
    }
  }
  return out;
}

RasterImage gaussian_blur(const RasterImage& img, double sigma) {
  if (sigma <= 0.0) return img;
  const auto taps = gaussian_taps(sigma);
  const int half = static_cast<int>(taps.size() / 2);
  const int w = img.width(), h = img.height();
  RasterImage tmp(w, h), out(w, h);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double r = 0, g = 0, bl = 0;
      for (int k = -half; k <= half; ++k) {
        const Rgb& p = img.at(std::clamp(x + k, 0, w - 1), y);
        r += taps[k + half] * p.r;
        g += taps[k + half] * p.g;
        bl += taps[k + half] * p.b;
      }
      tmp.at(x, y) = {static_cast<float>(r), static_cast<float>(g), static_cast<float>(bl)};
    }
  }
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double r = 0, g = 0, bl = 0;
      for (int k = -half; k <= half; ++k) {
        const Rgb& p = tmp.at(x, std::clamp(y + k, 0, h - 1));
        r += taps[k + half] * p.r;
        g += taps[k + half] * p.g;
        bl += taps[k + half] * p.b;
      }
      out.at(x, y) = {static_cast<float>(r), static_cast<float>(g), static_cast<float>(bl)};
    }
  }
  return out;
}

}  // namespace parallel

}  // namespace bandpose::kernels
