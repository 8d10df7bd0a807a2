#pragma once

#include <optional>
#include <span>

#include "bandpose/imaging.hpp"

namespace bandpose {

/// Image line through `point` with unit direction `dir`.
struct Line2 {
  Vec2 point = Vec2::Zero();
  Vec2 dir = Vec2::UnitX();

  Vec2 normal() const { return {-dir.y(), dir.x()}; }
  double signed_distance(const Vec2& p) const { return normal().dot(p - point); }
  double coordinate(const Vec2& p) const { return dir.dot(p - point); }
  Vec2 at(double t) const { return point + t * dir; }
};

/// Principal axes of a 2D point cloud; `major`/`minor` are unit vectors with
/// variances `major_var >= minor_var`.
struct PrincipalAxes {
  Vec2 mean = Vec2::Zero();
  Vec2 major = Vec2::UnitX();
  Vec2 minor = Vec2::UnitY();
  double major_var = 0.0;
  double minor_var = 0.0;
};

PrincipalAxes principal_axes(std::span<const Vec2> pts);
PrincipalAxes principal_axes(std::span<const Pixel> pts);
PrincipalAxes principal_axes(const Region& region);

/// Total-least-squares line; std::nullopt for fewer than 2 distinct points.
std::optional<Line2> fit_line_tls(std::span<const Vec2> pts);

/// Oriented rectangle: centre, unit major axis, half extents.
struct OrientedBox {
  Vec2 center = Vec2::Zero();
  Vec2 axis = Vec2::UnitX();
  double half_major = 0.0;
  double half_minor = 0.0;

  bool contains(const Vec2& p) const;
};

/// Point-in-convex-polygon (vertices in either winding).
bool inside_convex(std::span<const Vec2> polygon, const Vec2& p);

}  // namespace bandpose
