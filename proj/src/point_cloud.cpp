#include "bandpose/point_cloud.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "bandpose/error.hpp"

namespace bandpose {

namespace {

double median(std::vector<double> v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

}  // namespace

std::vector<Vec3> PointCloud::kept() const {
  std::vector<Vec3> out;
  for (const auto& p : points) {
    if (!p.filtered) out.push_back(p.position);
  }
  return out;
}

PointCloud filter_point_cloud(PointCloud cloud) {
  for (auto& p : cloud.points) p.filtered = false;
  if (cloud.points.size() < 5) {
    cloud.filter_skipped = true;
    return cloud;
  }
  cloud.filter_skipped = false;
  Vec3 centre;
  for (int c = 0; c < 3; ++c) {
    std::vector<double> v;
    for (const auto& p : cloud.points) v.push_back(p.position(c));
    centre(c) = median(std::move(v));
  }
  std::vector<double> dist;
  for (const auto& p : cloud.points) dist.push_back((p.position - centre).norm());
  const double mad = median(dist);
  for (std::size_t k = 0; k < cloud.points.size(); ++k) cloud.points[k].filtered = dist[k] > 5.0 * mad;
  return cloud;
}

void write_ply(const std::filesystem::path& path, const PointCloud& cloud, bool include_filtered) {
  std::vector<const CloudPoint*> pts;
  for (const auto& p : cloud.points) {
    if (include_filtered || !p.filtered) pts.push_back(&p);
  }
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "ply", "cannot write " + path.string());
  out << "ply\nformat ascii 1.0\nelement vertex " << pts.size()
      << "\nproperty float x\nproperty float y\nproperty float z\nproperty float quality\nend_header\n";
  char line[160];
  for (const CloudPoint* p : pts) {
    std::snprintf(line, sizeof line, "%.6f %.6f %.6f %.6f\n", p->position.x(), p->position.y(), p->position.z(), p->rms);
    out << line;
  }
}

}  // namespace bandpose
