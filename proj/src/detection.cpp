#include "bandpose/detection.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <tuple>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <Eigen/Dense>

#include "bandpose/error.hpp"

namespace bandpose {

void DetectionParams::validate() const {
  if (!(0.0 <= s2 && s2 < s1 && s1 <= 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "detection-params", "need 0 <= s2 < s1 <= 1");
  }
  if (!(0 < r2 && r2 < r1)) throw Error(ErrorKind::InvalidArgument, "detection-params", "need 0 < r2 < r1");
  if (ransac_iterations < 1) throw Error(ErrorKind::InvalidArgument, "detection-params", "ransac_iterations must be >= 1");
  if (!(binarize_threshold > 0.0 && binarize_threshold < 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "detection-params", "binarize_threshold must be in (0,1)");
  }
}

double DetectionParams::sigma_a() { return std::numbers::pi / 12.0; }

namespace {

// Local bitmap over a region's bounding box (with a margin).
struct RegionMask {
  int x0, y0, w, h;
  std::vector<std::uint8_t> bits;

  RegionMask(const Region& r, int margin)
      : x0(r.min_x - margin), y0(r.min_y - margin), w(r.max_x - r.min_x + 1 + 2 * margin),
        h(r.max_y - r.min_y + 1 + 2 * margin), bits(static_cast<std::size_t>(w) * h, 0) {
    for (const Pixel& p : r.pixels) bits[static_cast<std::size_t>(p.y - y0) * w + (p.x - x0)] = 1;
  }
  bool get(int x, int y) const {
    const int lx = x - x0, ly = y - y0;
    if (lx < 0 || ly < 0 || lx >= w || ly >= h) return false;
    return bits[static_cast<std::size_t>(ly) * w + lx] != 0;
  }
};

bool survives_erosion(const Region& region, int radius, int img_w, int img_h) {
  if (radius == 0) return true;
  // Crop with a one-pixel zero margin, except along image borders where
  // out-of-image pixels are ignored by the erosion.
  const int x0 = std::max(region.min_x - 1, 0);
  const int y0 = std::max(region.min_y - 1, 0);
  const int x1 = std::min(region.max_x + 1, img_w - 1);
  const int y1 = std::min(region.max_y + 1, img_h - 1);
  BinaryImage crop(x1 - x0 + 1, y1 - y0 + 1);
  for (const Pixel& p : region.pixels) crop.set(p.x - x0, p.y - y0);
  return erode_disk(crop, radius).count() > 0;
}

std::vector<Pixel> border_pixels(const Region& region) {
  const RegionMask mask(region, 1);
  std::vector<Pixel> border;
  for (const Pixel& p : region.pixels) {
    if (!mask.get(p.x - 1, p.y) || !mask.get(p.x + 1, p.y) || !mask.get(p.x, p.y - 1) || !mask.get(p.x, p.y + 1)) {
      border.push_back(p);
    }
  }
  return border;
}

bool borders_within(const Region& ra, const std::vector<Pixel>& ba, const Region& rb, const std::vector<Pixel>& bb,
                    double distance) {
  const double gap_x = std::max({0, ra.min_x - rb.max_x, rb.min_x - ra.max_x});
  const double gap_y = std::max({0, ra.min_y - rb.max_y, rb.min_y - ra.max_y});
  if (gap_x * gap_x + gap_y * gap_y > distance * distance) return false;
  const double d2 = distance * distance;
  for (const Pixel& p : ba) {
    // Skip pixels too far from the other region's box.
    const double px = std::max({0, rb.min_x - p.x, p.x - rb.max_x});
    const double py = std::max({0, rb.min_y - p.y, p.y - rb.max_y});
    if (px * px + py * py > d2) continue;
    for (const Pixel& q : bb) {
      const double dx = p.x - q.x, dy = p.y - q.y;
      if (dx * dx + dy * dy <= d2) return true;
    }
  }
  return false;
}

bool adjacent(const ColorPairs& pairs, ClassId a, ClassId b) { return pairs.contains(std::minmax(a, b)); }

bool crosses(const Region& r, const Line2& line) {
  bool pos = false, neg = false;
  for (const Pixel& p : r.pixels) {
    const double s = line.signed_distance(Vec2(p.x, p.y));
    pos |= s > 0.0;
    neg |= s < 0.0;
    if (pos && neg) return true;
  }
  return false;
}

double fold_half_pi(double a) {
  while (a > std::numbers::pi / 2) a -= std::numbers::pi;
  while (a < -std::numbers::pi / 2) a += std::numbers::pi;
  return a;
}

Line2 oriented(Line2 line) {
  if (line.dir.x() < 0.0 || (line.dir.x() == 0.0 && line.dir.y() < 0.0)) line.dir = -line.dir;
  return line;
}

// Centroid of the pixels within one pixel of the extreme signed distance.
Vec2 extreme_band_centroid(const std::vector<std::pair<Vec2, double>>& side) {
  double extreme = 0.0;
  for (const auto& [p, s] : side) extreme = std::max(extreme, std::abs(s));
  Vec2 acc = Vec2::Zero();
  int n = 0;
  for (const auto& [p, s] : side) {
    if (std::abs(s) >= extreme - 1.0) {
      acc += p;
      ++n;
    }
  }
  return acc / n;
}

// Sub-pixel contour points from the visible part of the junction. In L1
// coordinates (u along, v across) the projected junction circle is an ellipse
// tangent to the two silhouettes v = vc -+ a, i.e.
//   u = uc + kappa (v - vc) + beta sqrt(1 - ((v - vc) / a)^2),
// which is linear in (uc, kappa, beta) for fixed vc, a. The tangent points
// are (uc -+ kappa a, vc -+ a).
struct ArcFit {
  int low = 0, high = 0;  // classes on the smaller / larger u side
  double vc = 0, a = 0, uc = 0, kappa = 0, beta = 0;

  std::pair<Vec2, Vec2> points(const Line2& l1) const {
    const Vec2 n = l1.normal();
    return {Vec2(l1.point + (uc - kappa * a) * l1.dir + (vc - a) * n),
            Vec2(l1.point + (uc + kappa * a) * l1.dir + (vc + a) * n)};
  }
};

// First estimate from the class boundary in 1 px bins across the pointer.
std::optional<ArcFit> fit_arc(const Region& comp, const LabelImage& labels, const ColorPairs& adjacency,
                              const Line2& l1, const Vec2& neg, const Vec2& pos, int margin) {
  // Labeled pixels near the component. Under defocus the component can sit
  // entirely in the unlabeled band of mixed hues between the two colors.
  double u_min = std::numeric_limits<double>::infinity(), u_max = -u_min, v_min = u_min, v_max = -u_min;
  for (const Pixel& p : comp.pixels) {
    const Vec2 q(p.x, p.y);
    u_min = std::min(u_min, l1.coordinate(q));
    u_max = std::max(u_max, l1.coordinate(q));
    v_min = std::min(v_min, l1.signed_distance(q));
    v_max = std::max(v_max, l1.signed_distance(q));
  }
  std::vector<Pixel> near;
  for (int y = std::max(0, comp.min_y - margin); y <= std::min(labels.height - 1, comp.max_y + margin); ++y) {
    for (int x = std::max(0, comp.min_x - margin); x <= std::min(labels.width - 1, comp.max_x + margin); ++x) {
      if (!labels.at(x, y)) continue;
      const Vec2 q(x, y);
      const double u = l1.coordinate(q), v = l1.signed_distance(q);
      if (u >= u_min - margin && u <= u_max + margin && v >= v_min - 1.0 && v <= v_max + 1.0) near.push_back({x, y});
    }
  }
  std::map<int, std::size_t> counts;
  for (const Pixel& p : near) ++counts[labels.at(p.x, p.y)];
  if (counts.size() < 2) return std::nullopt;
  std::vector<std::pair<std::size_t, int>> ranked;
  for (const auto& [l, n] : counts) ranked.emplace_back(n, l);
  std::sort(ranked.rbegin(), ranked.rend());
  const int A = ranked[0].second, B = ranked[1].second;
  if (!adjacency.contains(std::minmax(A, B))) return std::nullopt;

  ArcFit fit;
  const double v_neg = l1.signed_distance(neg), v_pos = l1.signed_distance(pos);
  fit.vc = 0.5 * (v_neg + v_pos);
  fit.a = 0.5 * (v_pos - v_neg);
  if (!(fit.a > 1.0)) return std::nullopt;

  double mean_a = 0, mean_b = 0;
  std::size_t na = 0, nb = 0;
  for (const Pixel& p : near) {
    const int l = labels.at(p.x, p.y);
    const double u = l1.coordinate(Vec2(p.x, p.y));
    if (l == A) mean_a += u, ++na;
    if (l == B) mean_b += u, ++nb;
  }
  const bool a_low = mean_a / na < mean_b / nb;
  fit.low = a_low ? A : B;
  fit.high = a_low ? B : A;
  fit.uc = 0.5 * (l1.coordinate(neg) + l1.coordinate(pos));

  struct Bin {
    double low_u = -std::numeric_limits<double>::infinity(), low_v = 0;
    double high_u = std::numeric_limits<double>::infinity(), high_v = 0;
  };
  const double a = fit.a, vc = fit.vc;
  const int nbins = static_cast<int>(std::ceil(2.0 * a)) + 2;
  std::vector<Bin> bins(static_cast<std::size_t>(nbins));
  const double v0 = vc - a - 1.0;
  for (const Pixel& p : near) {
    const int l = labels.at(p.x, p.y);
    if (l != fit.low && l != fit.high) continue;
    const Vec2 q(p.x, p.y);
    const double v = l1.signed_distance(q);
    const int k = static_cast<int>(std::floor(v - v0));
    if (k < 0 || k >= nbins) continue;
    const double u = l1.coordinate(q);
    Bin& bin = bins[static_cast<std::size_t>(k)];
    if (l == fit.low && u > bin.low_u) bin.low_u = u, bin.low_v = v;
    if (l == fit.high && u < bin.high_u) bin.high_u = u, bin.high_v = v;
  }
  std::vector<Eigen::Vector3d> rows;
  std::vector<double> rhs;
  for (const Bin& bin : bins) {
    if (!std::isfinite(bin.low_u) || !std::isfinite(bin.high_u)) continue;
    const double x = 0.5 * (bin.low_v + bin.high_v) - vc;
    if (std::abs(x) > a - 0.5) continue;
    rows.emplace_back(1.0, x, std::sqrt(1.0 - (x / a) * (x / a)));
    rhs.push_back(0.5 * (bin.low_u + bin.high_u));
  }
  if (rows.size() < 4) return fit;
  Eigen::MatrixXd M(static_cast<Eigen::Index>(rows.size()), 3);
  Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    M.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
    y(static_cast<Eigen::Index>(i)) = rhs[i];
  }
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(M);
  if (qr.rank() < 3) return fit;
  const Eigen::Vector3d sol = qr.solve(y);
  fit.uc = sol(0);
  fit.kappa = sol(1);
  fit.beta = sol(2);
  return fit;
}

Eigen::Vector3d to_vec(const Rgb& c) { return {c.r, c.g, c.b}; }


double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// Least-squares line y = p + q x through (x, y) samples, refit once without
// samples beyond three median absolute residuals.
std::optional<Eigen::Vector2d> fit_trend(const std::vector<std::pair<double, double>>& xy) {
  auto solve = [](const std::vector<std::pair<double, double>>& pts) -> std::optional<Eigen::Vector2d> {
    if (pts.size() < 4) return std::nullopt;
    Eigen::MatrixXd M(static_cast<Eigen::Index>(pts.size()), 2);
    Eigen::VectorXd y(static_cast<Eigen::Index>(pts.size()));
    for (std::size_t i = 0; i < pts.size(); ++i) {
      M(static_cast<Eigen::Index>(i), 0) = 1.0;
      M(static_cast<Eigen::Index>(i), 1) = pts[i].first;
      y(static_cast<Eigen::Index>(i)) = pts[i].second;
    }
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(M);
    if (qr.rank() < 2) return std::nullopt;
    return Eigen::Vector2d(qr.solve(y));
  };
  const auto first = solve(xy);
  if (!first) return std::nullopt;
  std::vector<double> res;
  for (const auto& [x, y] : xy) res.push_back(std::abs(y - (*first)(0) - (*first)(1) * x));
  std::vector<double> sorted = res;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2), sorted.end());
  const double cut = 3.0 * sorted[sorted.size() / 2] + 1e-3;
  std::vector<std::pair<double, double>> kept;
  for (std::size_t i = 0; i < xy.size(); ++i)
    if (res[i] <= cut) kept.push_back(xy[i]);
  return solve(kept);
}

// Separable Gaussian blur of a 3-channel double grid, clamped at the border.
void blur_grid(std::vector<Eigen::Vector3d>& g, int w, int h, double sigma) {
  const int half = static_cast<int>(std::ceil(4.0 * sigma));
  std::vector<double> taps(static_cast<std::size_t>(2 * half + 1));
  double sum = 0.0;
  for (int k = -half; k <= half; ++k) sum += taps[static_cast<std::size_t>(k + half)] = std::exp(-0.5 * k * k / (sigma * sigma));
  for (double& t : taps) t /= sum;
  std::vector<Eigen::Vector3d> tmp(g.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      Eigen::Vector3d acc = Eigen::Vector3d::Zero();
      for (int k = -half; k <= half; ++k)
        acc += taps[static_cast<std::size_t>(k + half)] * g[static_cast<std::size_t>(y * w + std::clamp(x + k, 0, w - 1))];
      tmp[static_cast<std::size_t>(y * w + x)] = acc;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      Eigen::Vector3d acc = Eigen::Vector3d::Zero();
      for (int k = -half; k <= half; ++k)
        acc += taps[static_cast<std::size_t>(k + half)] * tmp[static_cast<std::size_t>(std::clamp(y + k, 0, h - 1) * w + x)];
      g[static_cast<std::size_t>(y * w + x)] = acc;
    }
}

// Refines an arc fit against the raw colors. Each pixel near the junction
// is modelled as a mix of background, low and high band colors, with the
// silhouettes and the class boundary smoothed by a common Gaussian ramp of
// width s (pixel footprint plus blur). Parameters are
// (v-, v+, uc, kappa, beta, s); solved with damped Gauss-Newton. A given
// `fixed_beta` is held constant.
//
// A wide ramp means defocus, and the product-of-ramps model is then wrong
// near the corners where the arc meets the silhouettes. Those fits are
// redone with a footprint-width model convolved with a Gaussian, s then
// being the blur sigma.
bool refine_edge_model(const RasterImage& img, int ox, int oy, const LabelImage& labels, const Line2& l1,
                       ArcFit& fit, std::optional<double> fixed_beta) {
  constexpr int kMaxIterations = 50;
  constexpr int kMaxPasses = 5;
  // A box pixel footprint alone spreads an edge over std 1/sqrt(12) px.
  // Narrower ramps turn the model into a step whose position is ambiguous
  // within a pixel.
  constexpr double kMinRamp = 0.25;
  constexpr double kFootprint = 0.2887;
  constexpr double kDefocusRamp = 0.9;
  const Vec2 n = l1.normal();
  using Theta = Eigen::Matrix<double, 6, 1>;
  Theta theta;
  theta << fit.vc - fit.a, fit.vc + fit.a, fit.uc, fit.kappa, fixed_beta.value_or(fit.beta), 0.6;
  const Theta start = theta;

  struct Sample {
    int x, y;
    double u, v;
    Eigen::Vector3d rgb;
  };
  std::vector<Sample> samples;

  auto gather = [&](double s) {
    samples.clear();
    const double vm = theta(0), vp = theta(1), vc = 0.5 * (vm + vp), a = 0.5 * (vp - vm);
    const double m = std::max(6.0, 3.5 * s);
    const double spread = std::abs(theta(3)) * a;
    const double u_lo = std::min(theta(2), theta(2) + theta(4)) - spread - m;
    const double u_hi = std::max(theta(2), theta(2) + theta(4)) + spread + m;
    const double reach = std::max(std::abs(u_lo), std::abs(u_hi)) + a + m + std::abs(vc);
    const Vec2 c = l1.point + theta(2) * l1.dir + vc * n;
    const int x0 = std::max(0, static_cast<int>(std::floor(c.x() - reach)));
    const int y0 = std::max(0, static_cast<int>(std::floor(c.y() - reach)));
    const int x1 = std::min(labels.width - 1, static_cast<int>(std::ceil(c.x() + reach)));
    const int y1 = std::min(labels.height - 1, static_cast<int>(std::ceil(c.y() + reach)));
    std::size_t n_bg = 0, n_lo = 0, n_hi = 0;
    for (int y = std::max(0, y0); y <= y1; ++y) {
      for (int x = std::max(0, x0); x <= x1; ++x) {
        const Vec2 q(x, y);
        const double u = l1.coordinate(q), v = l1.signed_distance(q);
        if (u < u_lo || u > u_hi || std::abs(v - vc) > a + m) continue;
        const int gx = x + ox, gy = y + oy;
        if (gx < 0 || gy < 0 || gx >= img.width() || gy >= img.height()) continue;
        samples.push_back({x, y, u, v, to_vec(img.at(gx, gy))});
        const int l = labels.at(x, y);
        if (std::abs(v - vc) > a + 2.5 * s + 1.0) ++n_bg;
        else if (l == fit.low) ++n_lo;
        else if (l == fit.high) ++n_hi;
      }
    }
    return n_bg >= 8 && n_lo >= 4 && n_hi >= 4;
  };

  // Mixing weights of (background, low, high) at a pixel.
  auto weights_at = [&](const Theta& t, double u, double v, double s) -> Eigen::Vector3d {
    const double vm = t(0), vp = t(1), vc = 0.5 * (vm + vp), a = 0.5 * (vp - vm);
    const double cover = normal_cdf((vp - v) / s) * normal_cdf((v - vm) / s);
    const double x = (v - vc) / a;
    const double root = std::sqrt(std::max(1e-6, 1.0 - x * x));
    const double ub = t(2) + t(3) * (v - vc) + t(4) * root;
    // Distance to the arc along its normal, not along u.
    const double slope = t(3) - t(4) * x / (a * root);
    const double f_lo = normal_cdf((ub - u) / (s * std::sqrt(1.0 + slope * slope)));
    return {1.0 - cover, cover * f_lo, cover * (1.0 - f_lo)};
  };

  // The model is linear in the three colors, so they are solved for at every
  // evaluation. Medians of labeled pixels are biased by the blur halo.
  std::vector<Eigen::Vector3d> w;
  auto project = [&](Eigen::VectorXd& r) {
    Eigen::Matrix3d WtW = Eigen::Matrix3d::Zero(), WtC = Eigen::Matrix3d::Zero();
    for (std::size_t i = 0; i < samples.size(); ++i) {
      WtW += w[i] * w[i].transpose();
      WtC += w[i] * samples[i].rgb.transpose();
    }
    WtW.diagonal().array() += 1e-9;
    const Eigen::Matrix3d colors = WtW.ldlt().solve(WtC);
    r.resize(static_cast<Eigen::Index>(3 * samples.size()));
    for (std::size_t i = 0; i < samples.size(); ++i)
      r.segment<3>(static_cast<Eigen::Index>(3 * i)) = samples[i].rgb - colors.transpose() * w[i];
  };

  auto direct = [&](const Theta& t, Eigen::VectorXd& r) {
    w.resize(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) w[i] = weights_at(t, samples[i].u, samples[i].v, t(5));
    project(r);
  };

  // Grid for the convolved model: sample bounds plus room for the kernel.
  int gx0 = 0, gy0 = 0, gw = 0, gh = 0;
  std::vector<Eigen::Vector3d> grid;
  auto convolved = [&](const Theta& t, Eigen::VectorXd& r) {
    grid.resize(static_cast<std::size_t>(gw) * gh);
    for (int y = 0; y < gh; ++y)
      for (int x = 0; x < gw; ++x) {
        const Vec2 q(x + gx0, y + gy0);
        grid[static_cast<std::size_t>(y * gw + x)] = weights_at(t, l1.coordinate(q), l1.signed_distance(q), kFootprint);
      }
    blur_grid(grid, gw, gh, t(5));
    w.resize(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i)
      w[i] = grid[static_cast<std::size_t>((samples[i].y - gy0) * gw + (samples[i].x - gx0))];
    project(r);
  };

  auto solve = [&](const auto& residuals, double min_ramp) {
    Eigen::VectorXd r, r_try, r_h;
    residuals(theta, r);
    double cost = r.squaredNorm();
    double lambda = 1e-3;
    for (int it = 0; it < kMaxIterations; ++it) {
      Eigen::MatrixXd J(r.size(), 6);
      for (int k = 0; k < 6; ++k) {
        const double h = 1e-6 * std::max(1.0, std::abs(theta(k)));
        Theta tp = theta;
        tp(k) += h;
        residuals(tp, r_h);
        J.col(k) = (r_h - r) / h;
      }
      if (fixed_beta) J.col(4).setZero();
      const Eigen::Matrix<double, 6, 6> JtJ = J.transpose() * J;
      const Theta g = J.transpose() * r;
      bool accepted = false;
      while (lambda < 1e8) {
        Eigen::Matrix<double, 6, 6> Aug = JtJ;
        Aug.diagonal() += lambda * JtJ.diagonal().cwiseMax(1e-9);
        const Theta step = Aug.ldlt().solve(-g);
        const Theta trial = theta + step;
        if (trial(5) >= min_ramp && trial(1) - trial(0) > 2.0) {
          residuals(trial, r_try);
          const double c = r_try.squaredNorm();
          if (c < cost) {
            const double change = step.norm();
            theta = trial;
            r = r_try;
            cost = c;
            lambda = std::max(lambda / 10.0, 1e-9);
            accepted = true;
            if (change < 1e-8) it = kMaxIterations;
            break;
          }
        }
        lambda *= 10.0;
      }
      if (!accepted) break;
    }
  };

  // The sample window and the background estimate depend on the ramp width,
  // so re-gather until it settles. Defocus needs several rounds.
  double gathered_ramp = 0.0;
  for (int pass = 0; pass < kMaxPasses; ++pass) {
    if (pass >= 2 && std::abs(theta(5) - gathered_ramp) < 0.1 * gathered_ramp) break;
    gathered_ramp = theta(5);
    if (!gather(gathered_ramp)) return false;
    solve(direct, kMinRamp);
  }
  double ramp = theta(5);
  if (ramp > kDefocusRamp) {
    theta(5) = std::sqrt(ramp * ramp - kFootprint * kFootprint);
    if (!gather(ramp)) return false;
    int x_min = labels.width, y_min = labels.height, x_max = -1, y_max = -1;
    for (const Sample& p : samples) {
      x_min = std::min(x_min, p.x);
      y_min = std::min(y_min, p.y);
      x_max = std::max(x_max, p.x);
      y_max = std::max(y_max, p.y);
    }
    const int pad = static_cast<int>(std::ceil(6.0 * theta(5))) + 2;
    gx0 = x_min - pad;
    gy0 = y_min - pad;
    gw = x_max - x_min + 1 + 2 * pad;
    gh = y_max - y_min + 1 + 2 * pad;
    solve(convolved, 0.3);
    ramp = std::hypot(theta(5), kFootprint);
  }

  // Reject fits that wandered off the initial estimate.
  // Labels reach into a defocused halo, so the seed is further out when the
  // ramp is wide. Where a bulging boundary meets a silhouette at a shallow
  // angle blur erases the labels, and the seeded silhouettes fall short.
  const double slack = 1.5 * ramp;
  const double reach = 3.0 + slack + std::abs(start(4));
  if (std::abs(theta(0) - start(0)) > reach || std::abs(theta(1) - start(1)) > reach) return false;
  // The seed's apex is reliable, its split between uc and beta less so.
  const double apex_shift = std::abs(theta(2) + theta(4) - start(2) - start(4));
  if (apex_shift > 4.0 + std::abs(start(4)) + slack) return false;
  if (std::abs(theta(2) - start(2)) > 4.0 + std::abs(start(4)) + std::abs(theta(4) - start(4)) + slack) return false;
  if (!(ramp < 15.0)) return false;
  fit.vc = 0.5 * (theta(0) + theta(1));
  fit.a = 0.5 * (theta(1) - theta(0));
  fit.uc = theta(2);
  fit.kappa = theta(3);
  fit.beta = theta(4);
  return true;
}

}  // namespace

std::vector<Region> detect_band_regions(const HueSatImage& hs, const ColorClassSet& colors, const ColorPairs& adjacency,
                                        double saturation_threshold, int erosion_radius, const BinaryImage* roi) {
  const LabelImage labels = classify_image(colors, hs, saturation_threshold, roi);
  std::vector<Region> candidates;
  for (Region& r : connected_components(labels)) {
    if (survives_erosion(r, erosion_radius, hs.width, hs.height)) candidates.push_back(std::move(r));
  }
  const double reach = DetectionParams::adjacency_distance(erosion_radius);
  std::vector<std::vector<Pixel>> borders;
  borders.reserve(candidates.size());
  for (const Region& r : candidates) borders.push_back(border_pixels(r));

  std::vector<Region> kept;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    bool near_partner = false;
    for (std::size_t j = 0; j < candidates.size() && !near_partner; ++j) {
      if (i == j || !adjacent(adjacency, candidates[i].label, candidates[j].label)) continue;
      near_partner = borders_within(candidates[i], borders[i], candidates[j], borders[j], reach);
    }
    if (near_partner) kept.push_back(candidates[i]);
  }
  return kept;
}

CentroidLine ransac_centroid_line(const std::vector<Region>& regions, const DetectionParams& params) {
  const std::size_t n = regions.size();
  if (n < 2) throw Error(ErrorKind::InsufficientRegions, "ransac-line", "need at least two regions");

  std::vector<std::pair<std::size_t, std::size_t>> samples;
  const std::size_t all_pairs = n * (n - 1) / 2;
  if (all_pairs <= static_cast<std::size_t>(params.ransac_iterations)) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) samples.emplace_back(i, j);
  } else {
    std::mt19937_64 rng(params.ransac_seed);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (int it = 0; it < params.ransac_iterations; ++it) {
      const std::size_t i = pick(rng);
      std::size_t j = pick(rng);
      while (j == i) j = pick(rng);
      samples.emplace_back(std::min(i, j), std::max(i, j));
    }
  }

  std::optional<Line2> best;
  std::vector<std::size_t> best_inliers;
  for (const auto& [i, j] : samples) {
    const Vec2 d = regions[j].centroid - regions[i].centroid;
    if (d.norm() < 1e-9) continue;
    const Line2 line{regions[i].centroid, d.normalized()};
    std::vector<std::size_t> inliers;
    for (std::size_t k = 0; k < n; ++k) {
      if (crosses(regions[k], line)) inliers.push_back(k);
    }
    if (!best || inliers.size() > best_inliers.size()) {
      best = line;
      best_inliers = std::move(inliers);
    }
  }
  if (!best) throw Error(ErrorKind::DegenerateSample, "ransac-line", "all sampled centroids coincide");

  Line2 line = *best;
  if (best_inliers.size() >= 2) {
    std::vector<Vec2> centroids;
    for (std::size_t k : best_inliers) centroids.push_back(regions[k].centroid);
    if (auto refit = fit_line_tls(centroids)) line = *refit;
  }
  double sigma = params.r2;
  if (best_inliers.size() >= 2) {
    double sum2 = 0.0;
    for (std::size_t k : best_inliers) {
      const double s = line.signed_distance(regions[k].centroid);
      sum2 += s * s;
    }
    sigma = std::max(std::sqrt(sum2 / static_cast<double>(best_inliers.size())), static_cast<double>(params.r2));
  }
  CentroidLine out{oriented(line), {}};
  for (const Region& r : regions) {
    if (std::abs(line.signed_distance(r.centroid)) <= params.line_inlier_sigmas * sigma) out.regions.push_back(r);
  }
  return out;
}

std::vector<OrientedBox> expand_bounding_boxes(const std::vector<Region>& regions, const DetectionParams& params) {
  constexpr double kMinSemiAxis = 0.5;
  std::vector<OrientedBox> boxes;
  boxes.reserve(regions.size());
  for (const Region& r : regions) {
    const PrincipalAxes ax = principal_axes(r);
    // Semi-axes of the uniform ellipse with the region's second moments.
    const double semi_major = std::max(2.0 * std::sqrt(ax.major_var), kMinSemiAxis);
    const double semi_minor = std::max(2.0 * std::sqrt(ax.minor_var), kMinSemiAxis);
    boxes.push_back({r.centroid, ax.major, params.major_expand * semi_major, params.minor_expand * semi_minor});
  }
  return boxes;
}

BinaryImage rasterize_boxes(const std::vector<OrientedBox>& boxes, int width, int height) {
  BinaryImage roi(width, height);
  for (const OrientedBox& box : boxes) {
    const double reach = std::hypot(box.half_major, box.half_minor);
    const int x0 = std::max(0, static_cast<int>(std::floor(box.center.x() - reach)));
    const int x1 = std::min(width - 1, static_cast<int>(std::ceil(box.center.x() + reach)));
    const int y0 = std::max(0, static_cast<int>(std::floor(box.center.y() - reach)));
    const int y1 = std::min(height - 1, static_cast<int>(std::ceil(box.center.y() + reach)));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x)
        if (box.contains(Vec2(x, y))) roi.set(x, y);
  }
  return roi;
}

Kernel2D junction_kernel(double sigma_d, double sigma_a, double phi) {
  const int half = static_cast<int>(std::ceil(3.0 * sigma_d));
  Kernel2D k;
  k.width = k.height = 2 * half + 1;
  k.weights.assign(static_cast<std::size_t>(k.width) * k.height, 0.0);
  const double phi_line = fold_half_pi(phi);
  for (int v = -half; v <= half; ++v) {
    for (int u = -half; u <= half; ++u) {
      double angle_term = 0.0;
      if (u != 0 || v != 0) {
        // Undirected orientation of the offset in (-pi/2, pi/2].
        double theta = std::atan2(static_cast<double>(v), static_cast<double>(u));
        theta = fold_half_pi(theta);
        if (theta == -std::numbers::pi / 2) theta = std::numbers::pi / 2;
        const double diff = fold_half_pi(theta - phi_line);
        angle_term = diff * diff / (2.0 * sigma_a * sigma_a);
      }
      const double radial = (u * u + v * v) / (2.0 * sigma_d * sigma_d);
      k.weights[static_cast<std::size_t>(v + half) * k.width + (u + half)] = std::exp(-radial - angle_term);
    }
  }
  const double total = k.sum();
  for (double& w : k.weights) w /= total;
  return k;
}

DetectionResult extract_edge_pairs(const std::vector<Region>& regions, const ColorPairs& adjacency,
                                   const DetectionParams& params, int width, int height, const Vec2& fallback_axis,
                                   const RasterImage* image) {
  const int e = params.edge_halo();
  if (regions.empty()) throw Error(ErrorKind::NoEdges, "edge-maps", "no colored regions");

  int min_x = width, min_y = height, max_x = 0, max_y = 0;
  for (const Region& r : regions) {
    min_x = std::min(min_x, r.min_x);
    min_y = std::min(min_y, r.min_y);
    max_x = std::max(max_x, r.max_x);
    max_y = std::max(max_y, r.max_y);
  }
  const int margin = e + static_cast<int>(std::ceil(3.0 * params.sigma_d())) + 2;
  const int x0 = std::max(0, min_x - margin), y0 = std::max(0, min_y - margin);
  const int x1 = std::min(width - 1, max_x + margin), y1 = std::min(height - 1, max_y + margin);
  const int ww = x1 - x0 + 1, wh = y1 - y0 + 1;

  // Per-class masks within the window.
  std::set<ClassId> classes;
  for (const Region& r : regions) classes.insert(r.label);
  std::map<ClassId, BinaryImage> masks, grown;
  for (ClassId c : classes) masks.emplace(c, BinaryImage(ww, wh));
  for (const Region& r : regions) {
    BinaryImage& m = masks.at(r.label);
    for (const Pixel& p : r.pixels) m.set(p.x - x0, p.y - y0);
  }
  for (const auto& [c, m] : masks) grown.emplace(c, dilate_disk(m, e));
  LabelImage window_labels(ww, wh);
  for (const Region& r : regions) {
    for (const Pixel& p : r.pixels) window_labels.at(p.x - x0, p.y - y0) = static_cast<std::uint8_t>(r.label);
  }

  EdgeMaps maps;
  maps.origin_x = x0;
  maps.origin_y = y0;
  // Junction pixels must lie on the pointer: labeled, or (with the image)
  // saturated. Blur leaves a band of mixed, unlabeled hues between colors.
  BinaryImage on_pointer(ww, wh);
  for (const auto& [c, m] : masks) {
    const auto src = m.bits();
    auto dst = on_pointer.bits();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] |= src[i];
  }
  if (image) {
    for (int y = 0; y < wh; ++y)
      for (int x = 0; x < ww; ++x) {
        const Rgb& c = image->at(x + x0, y + y0);
        const float hi = std::max({c.r, c.g, c.b}), lo = std::min({c.r, c.g, c.b});
        if (hi > 0.f && (hi - lo) / hi >= params.s2) on_pointer.set(x, y);
      }
  }
  maps.ib1 = BinaryImage(ww, wh);
  for (const auto& [a, b] : adjacency) {
    if (!masks.contains(a) || !masks.contains(b)) continue;
    const auto ga = grown.at(a).bits(), gb = grown.at(b).bits(), on = on_pointer.bits();
    auto out = maps.ib1.bits();
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (ga[i] && gb[i] && on[i]) out[i] = 1;
    }
  }

  std::vector<Pixel> ib1_pixels;
  for (int y = 0; y < wh; ++y)
    for (int x = 0; x < ww; ++x)
      if (maps.ib1.get(x, y)) ib1_pixels.push_back({x, y});
  if (ib1_pixels.empty()) throw Error(ErrorKind::NoEdges, "edge-maps", "no pixels near two adjacent colors");

  const PrincipalAxes ax = principal_axes(std::span<const Pixel>(ib1_pixels));
  Vec2 phi_dir = ax.minor;
  if (ax.major_var <= 0.0 || ax.major_var - ax.minor_var <= 0.01 * ax.major_var) {
    phi_dir = Vec2(-fallback_axis.y(), fallback_axis.x());
  }
  maps.phi = std::atan2(phi_dir.y(), phi_dir.x());

  const Kernel2D kernel = junction_kernel(params.sigma_d(), DetectionParams::sigma_a(), maps.phi);
  const ScalarImage response = convolve_unit_sum(maps.ib1, kernel);
  maps.ib2 = BinaryImage(ww, wh);
  maps.ib3 = BinaryImage(ww, wh);
  std::vector<Vec2> ib3_points;
  for (int y = 0; y < wh; ++y) {
    for (int x = 0; x < ww; ++x) {
      if (response.at(x, y) >= params.binarize_threshold) {
        maps.ib2.set(x, y);
        if (maps.ib1.get(x, y)) {
          maps.ib3.set(x, y);
          ib3_points.emplace_back(x, y);
        }
      }
    }
  }
  if (ib3_points.empty()) throw Error(ErrorKind::NoEdges, "edge-maps", "filtered junction map is empty");
  const auto l1 = fit_line_tls(ib3_points);
  if (!l1) throw Error(ErrorKind::NoEdges, "edge-maps", "cannot fit a line to junction pixels");
  maps.l1 = *l1;

  struct Candidate {
    Vec2 neg, pos;
    Vec2 bulge = Vec2::Zero();
  };
  std::vector<Candidate> candidates;
  struct Junction {
    Candidate c;
    std::optional<ArcFit> arc;
    bool refined = false;
  };
  std::vector<Junction> junctions;
  for (const Region& comp : connected_components(maps.ib2)) {
    std::vector<std::pair<Vec2, double>> pos, neg;
    for (const Pixel& p : comp.pixels) {
      if (!maps.ib3.get(p.x, p.y)) continue;
      const Vec2 q(p.x, p.y);
      const double s = maps.l1.signed_distance(q);
      if (s > 0.0) pos.emplace_back(q, s);
      else if (s < 0.0) neg.emplace_back(q, s);
    }
    if (pos.empty() || neg.empty()) continue;
    Junction j{{extreme_band_centroid(neg), extreme_band_centroid(pos)}, {}, false};
    j.arc = fit_arc(comp, window_labels, adjacency, maps.l1, j.c.neg, j.c.pos, e);
    if (j.arc && image) j.refined = refine_edge_model(*image, x0, y0, window_labels, maps.l1, *j.arc, std::nullopt);
    junctions.push_back(j);
  }
  if (image) {
    // Near-straight junctions leave the bulge poorly separated from uc. The
    // bulge ratio beta / a varies smoothly along the pointer, so fit it
    // across junctions and refit each one with its bulge fixed.
    std::vector<std::pair<double, double>> ratio;
    for (const Junction& j : junctions)
      if (j.refined) ratio.emplace_back(j.arc->uc, j.arc->beta / j.arc->a);
    if (const auto trend = fit_trend(ratio)) {
      for (Junction& j : junctions) {
        if (!j.arc) continue;
        ArcFit fixed = *j.arc;
        fixed.beta = fixed.a * ((*trend)(0) + (*trend)(1) * fixed.uc);
        if (refine_edge_model(*image, x0, y0, window_labels, maps.l1, fixed, fixed.beta)) {
          j.arc = fixed;
          j.refined = true;
        }
      }
    }
  }
  for (Junction& j : junctions) {
    if (j.arc) {
      std::tie(j.c.neg, j.c.pos) = j.arc->points(maps.l1);
      j.c.bulge = j.arc->beta * maps.l1.dir;
    }
    if ((j.c.pos - j.c.neg).norm() < e) continue;
    candidates.push_back(j.c);
  }

  // Mutual nearest neighbours along L1.
  auto nearest = [&](double coord, bool want_pos) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < candidates.size(); ++k) {
      const double d = std::abs(maps.l1.coordinate(want_pos ? candidates[k].pos : candidates[k].neg) - coord);
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    return best;
  };
  std::vector<Candidate> mutual;
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    if (nearest(maps.l1.coordinate(candidates[k].neg), true) == k &&
        nearest(maps.l1.coordinate(candidates[k].pos), false) == k) {
      mutual.push_back(candidates[k]);
    }
  }

  // Separation statistics over every pair that passed the side and >= e
  // tests, applied to the mutual pairs.
  std::vector<Candidate> kept;
  if (!mutual.empty()) {
    double mean = 0.0;
    for (const auto& c : candidates) mean += (c.pos - c.neg).norm();
    mean /= static_cast<double>(candidates.size());
    double var = 0.0;
    for (const auto& c : candidates) var += std::pow((c.pos - c.neg).norm() - mean, 2);
    const double sd = std::sqrt(var / static_cast<double>(candidates.size()));
    for (const auto& c : mutual) {
      if (std::abs((c.pos - c.neg).norm() - mean) <= params.pair_separation_sigmas * sd) kept.push_back(c);
    }
  }
  if (kept.size() < 2) {
    throw Error(ErrorKind::InsufficientEdges, "edge-pairs",
                "found " + std::to_string(kept.size()) + " contour point pairs, need at least 2");
  }

  const Vec2 offset(x0, y0);
  std::vector<Vec2> all_points;
  for (const auto& c : kept) {
    all_points.push_back(c.neg + offset);
    all_points.push_back(c.pos + offset);
  }
  DetectionResult result;
  result.l2 = oriented(*fit_line_tls(all_points));
  for (const auto& c : kept) {
    EdgePointPair pair{c.neg + offset, c.pos + offset};
    pair.bulge = c.bulge;
    if (result.l2.signed_distance(pair.a) > result.l2.signed_distance(pair.b)) std::swap(pair.a, pair.b);
    pair.axis_coordinate = result.l2.coordinate(0.5 * (pair.a + pair.b));
    result.edges.push_back(pair);
  }
  std::sort(result.edges.begin(), result.edges.end(),
            [](const EdgePointPair& p, const EdgePointPair& q) { return p.axis_coordinate < q.axis_coordinate; });
  result.edges.erase(std::unique(result.edges.begin(), result.edges.end(),
                                 [](const EdgePointPair& p, const EdgePointPair& q) {
                                   return p.axis_coordinate == q.axis_coordinate;
                                 }),
                     result.edges.end());
  result.maps = std::move(maps);
  return result;
}

void label_edge_pairs(DetectionResult& result, const std::vector<Region>& regions) {
  std::vector<const Region*> crossing;
  for (const Region& r : regions) {
    if (crosses(r, result.l2)) crossing.push_back(&r);
  }
  auto& edges = result.edges;
  const Line2& l2 = result.l2;
  auto cross = [](const Vec2& u, const Vec2& v) { return u.x() * v.y() - u.y() * v.x(); };

  // Signed offset of q from the curved edge along L2, positive on the right.
  // The edge is the half ellipse through a, apex and b with conjugate
  // semi-diameters (b - a) / 2 and the bulge.
  auto offset = [&](const EdgePointPair& e, const Vec2& q) {
    const Vec2 h = 0.5 * (e.b - e.a);
    const bool curved = e.bulge.norm() > 1e-9;
    const Vec2 w = curved ? e.bulge : l2.dir;
    const double det = cross(h, w);
    const Vec2 d = q - 0.5 * (e.a + e.b);
    if (std::abs(det) < 1e-12) return l2.dir.dot(d);
    const double s = cross(d, w) / det, t = cross(h, d) / det;
    const double arc = curved ? std::sqrt(std::max(0.0, 1.0 - s * s)) : 0.0;
    return (t - arc) * w.dot(l2.dir);
  };

  // Label of the band adjacent to edge k on one side, the clipped region
  // piece nearest along L2 among pieces of real size.
  auto side_label = [&](std::size_t k, bool left) -> ClassId {
    const EdgePointPair& e = edges[k];
    const bool bounded = left ? k > 0 : k + 1 < edges.size();
    const EdgePointPair* o = bounded ? &edges[left ? k - 1 : k + 1] : nullptr;
    auto inside = [&](const Vec2& q) {
      const double fe = offset(e, q);
      if (left ? fe >= 0.0 : fe <= 0.0) return false;
      if (!o) return true;
      const double fo = offset(*o, q);
      if (left ? fo <= 0.0 : fo >= 0.0) return false;
      // Between the silhouette lines joining the two edges.
      return cross(e.a - o->a, q - o->a) * cross(e.a - o->a, e.b - o->a) >= 0.0 &&
             cross(e.b - o->b, q - o->b) * cross(e.b - o->b, e.a - o->b) >= 0.0;
    };
    struct Piece {
      ClassId label;
      std::size_t count;
      double coordinate;
    };
    std::vector<Piece> pieces;
    std::size_t largest = 0;
    for (const Region* r : crossing) {
      Vec2 acc = Vec2::Zero();
      std::size_t n = 0;
      for (const Pixel& p : r->pixels) {
        const Vec2 q(p.x, p.y);
        if (inside(q)) {
          acc += q;
          ++n;
        }
      }
      if (n == 0) continue;
      pieces.push_back({r->label, n, l2.coordinate(acc / static_cast<double>(n))});
      largest = std::max(largest, n);
    }
    // Slivers left by a slightly misplaced edge would otherwise always be
    // the nearest piece.
    ClassId best = kUndefinedClass;
    double best_d = std::numeric_limits<double>::infinity();
    for (const Piece& piece : pieces) {
      if (5 * piece.count < largest) continue;
      const double d = std::abs(piece.coordinate - e.axis_coordinate);
      if (d < best_d) {
        best_d = d;
        best = piece.label;
      }
    }
    return best;
  };

  for (std::size_t k = 0; k < edges.size(); ++k) {
    edges[k].left = side_label(k, true);
    edges[k].right = side_label(k, false);
    if (edges[k].left == edges[k].right) edges[k].left = edges[k].right = kUndefinedClass;
  }
}

DetectionResult detect_pointer(const RasterImage& img, const ColorClassSet& colors, const PointerSpec& spec,
                               const DetectionParams& params) {
  params.validate();
  const HueSatImage hs = rgb_to_hue_saturation(img);
  const ColorPairs adjacency = spec.adjacent_color_pairs();

  auto run_pass = [&](const char* stage, double s, int r, const BinaryImage* roi) {
    std::vector<Region> regions = detect_band_regions(hs, colors, adjacency, s, r, roi);
    if (regions.size() < 2) {
      throw Error(ErrorKind::PointerNotFound, stage,
                  "only " + std::to_string(regions.size()) + " colored regions survived the geometric tests");
    }
    CentroidLine line = ransac_centroid_line(regions, params);
    if (line.regions.empty()) throw Error(ErrorKind::PointerNotFound, stage, "no regions near the centroid line");
    return line;
  };

  CentroidLine first;
  CentroidLine second;
  try {
    first = run_pass("pass1-regions", params.s1, params.r1, nullptr);
    const BinaryImage roi = rasterize_boxes(expand_bounding_boxes(first.regions, params), img.width(), img.height());
    second = run_pass("pass2-regions", params.s2, params.r2, &roi);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::DegenerateSample || e.kind() == ErrorKind::InsufficientRegions) {
      throw Error(ErrorKind::PointerNotFound, e.stage(), e.detail());
    }
    throw;
  }

  DetectionResult result =
      extract_edge_pairs(second.regions, adjacency, params, img.width(), img.height(), second.line.dir, &img);
  label_edge_pairs(result, second.regions);
  result.pass1_regions = std::move(first.regions);
  result.pass2_regions = std::move(second.regions);
  return result;
}

}  // namespace bandpose
