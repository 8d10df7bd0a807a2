#pragma once

#include <set>
#include <span>
#include <utility>
#include <vector>

#include "bandpose/color_model.hpp"

namespace bandpose {

struct SideLabels {
  ClassId left = kUndefinedClass;   // tip side
  ClassId right = kUndefinedClass;  // tail side
  friend bool operator==(const SideLabels&, const SideLabels&) = default;
};

/// Measured band pattern of the pointer, tip to tail.
class PointerSpec {
 public:
  /// `band_labels` has one entry per band (edge count + 1); band k lies
  /// between edge k-1 and edge k. Radii in mm.
  PointerSpec(std::vector<double> edge_distances_mm, std::vector<double> edge_radii_mm,
              std::vector<ClassId> band_labels, double total_length_mm);

  std::size_t edge_count() const noexcept { return distances_.size(); }
  std::span<const double> distances() const noexcept { return distances_; }
  std::span<const double> radii() const noexcept { return radii_; }
  std::span<const ClassId> band_labels() const noexcept { return bands_; }
  std::span<const SideLabels> side_labels() const noexcept { return sides_; }
  double total_length() const noexcept { return total_length_; }
  double distance(std::size_t i) const { return distances_.at(i); }
  double radius(std::size_t i) const { return radii_.at(i); }

  /// Unordered pairs of color ids that meet at some edge.
  std::set<std::pair<ClassId, ClassId>> adjacent_color_pairs() const;
  bool colors_adjacent(ClassId a, ClassId b) const;

  /// Band index containing axial distance `s` (mm from the tip).
  std::size_t band_at(double s) const;

  friend bool operator==(const PointerSpec&, const PointerSpec&) = default;

 private:
  std::vector<double> distances_;
  std::vector<double> radii_;
  std::vector<ClassId> bands_;
  std::vector<SideLabels> sides_;
  double total_length_;
};

}  // namespace bandpose
