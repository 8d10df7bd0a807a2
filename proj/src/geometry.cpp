#include "bandpose/geometry.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

namespace bandpose {

namespace {

PrincipalAxes axes_from_moments(const Vec2& mean, double sxx, double sxy, double syy) {
  PrincipalAxes ax;
  ax.mean = mean;
  Eigen::Matrix2d cov;
  cov << sxx, sxy, sxy, syy;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov);
  ax.minor_var = std::max(0.0, es.eigenvalues()(0));
  ax.major_var = std::max(0.0, es.eigenvalues()(1));
  ax.minor = es.eigenvectors().col(0).normalized();
  ax.major = es.eigenvectors().col(1).normalized();
  return ax;
}

template <typename Points, typename Get>
PrincipalAxes axes_of(const Points& pts, Get&& get) {
  if (pts.empty()) return {};
  Vec2 mean = Vec2::Zero();
  for (const auto& p : pts) mean += get(p);
  mean /= static_cast<double>(pts.size());
  double sxx = 0, sxy = 0, syy = 0;
  for (const auto& p : pts) {
    const Vec2 d = get(p) - mean;
    sxx += d.x() * d.x();
    sxy += d.x() * d.y();
    syy += d.y() * d.y();
  }
  const double n = static_cast<double>(pts.size());
  return axes_from_moments(mean, sxx / n, sxy / n, syy / n);
}

}  // namespace

PrincipalAxes principal_axes(std::span<const Vec2> pts) {
  return axes_of(pts, [](const Vec2& p) { return p; });
}

PrincipalAxes principal_axes(std::span<const Pixel> pts) {
  return axes_of(pts, [](const Pixel& p) { return Vec2(p.x, p.y); });
}

PrincipalAxes principal_axes(const Region& region) {
  return axes_from_moments(region.centroid, region.mu20, region.mu11, region.mu02);
}

std::optional<Line2> fit_line_tls(std::span<const Vec2> pts) {
  if (pts.size() < 2) return std::nullopt;
  const PrincipalAxes ax = principal_axes(pts);
  if (ax.major_var <= 0.0) return std::nullopt;
  return Line2{ax.mean, ax.major};
}

bool OrientedBox::contains(const Vec2& p) const {
  const Vec2 d = p - center;
  const Vec2 minor_axis(-axis.y(), axis.x());
  return std::abs(d.dot(axis)) <= half_major && std::abs(d.dot(minor_axis)) <= half_minor;
}

bool inside_convex(std::span<const Vec2> polygon, const Vec2& p) {
  if (polygon.size() < 3) return false;
  int sign = 0;
  for (std::size_t i = 0; i < polygon.size(); ++i) {
    const Vec2& a = polygon[i];
    const Vec2& b = polygon[(i + 1) % polygon.size()];
    const double cross = (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
    if (cross == 0.0) continue;
    const int s = cross > 0 ? 1 : -1;
    if (sign == 0) sign = s;
    else if (s != sign) return false;
  }
  return true;
}

}  // namespace bandpose
