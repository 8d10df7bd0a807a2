#pragma once

#include <filesystem>
#include <vector>

#include "bandpose/camera.hpp"

namespace bandpose {

struct CloudPoint {
  Vec3 position = Vec3::Zero();  // mm
  std::size_t frame = 0;
  double rms = 0.0;  // px
  bool filtered = false;
};

struct PointCloud {
  std::vector<CloudPoint> points;
  // Set when filtering was skipped for lack of points.
  bool filter_skipped = false;

  std::vector<Vec3> kept() const;
};

/// Flags points farther than 5 MAD from the componentwise median. The MAD is
/// the median of those distances. Fewer than 5 points: nothing is flagged and
/// `filter_skipped` is set.
PointCloud filter_point_cloud(PointCloud cloud);

/// ASCII PLY with float x y z and a float quality (rms) per vertex.
void write_ply(const std::filesystem::path& path, const PointCloud& cloud, bool include_filtered);

}  // namespace bandpose
