#include "bandpose/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <random>

#include <Eigen/Geometry>
#include <Eigen/LU>

#include "bandpose/error.hpp"
#include "bandpose/kernels.hpp"

namespace bandpose {

namespace {

constexpr int kSupersample = 4;

bool valid_color(const Rgb& c) {
  auto ok = [](float v) { return v >= 0.f && v <= 1.f; };
  return ok(c.r) && ok(c.g) && ok(c.b);
}

// Surface of revolution around the axis, in the camera frame.
struct Frustum {
  double s_a, s_b, r_a, r_b;
};

class PointerShape {
 public:
  PointerShape(const SceneSpec& scene, const CameraModel& camera) : spec_(scene.spec) {
    tip_ = camera.to_camera(scene.pose.tip);
    axis_ = (camera.R * scene.pose.direction).normalized();
    const auto b = spec_.distances();
    const auto w = spec_.radii();
    parts_.push_back({0.0, b[0], w[0], w[0]});
    for (std::size_t i = 0; i + 1 < b.size(); ++i) parts_.push_back({b[i], b[i + 1], w[i], w[i + 1]});
    if (spec_.total_length() > b.back()) parts_.push_back({b.back(), spec_.total_length(), w.back(), w.back()});
    max_radius_ = *std::max_element(w.begin(), w.end());
  }

  const Vec3& tip() const { return tip_; }
  const Vec3& axis() const { return axis_; }
  double max_radius() const { return max_radius_; }
  double length() const { return spec_.total_length(); }

  double radius_at(double s) const {
    for (const Frustum& f : parts_) {
      if (s >= f.s_a && s <= f.s_b) return f.r_a + (f.r_b - f.r_a) * (s - f.s_a) / (f.s_b - f.s_a);
    }
    return 0.0;
  }

  /// Axial coordinate of the nearest intersection of the ray lambda * D.
  std::optional<double> hit(const Vec3& D) const {
    const double alpha = axis_.dot(D);
    const double beta = -axis_.dot(tip_);
    const double DD = D.squaredNorm(), DP = D.dot(tip_), PP = tip_.squaredNorm();
    double best_l = std::numeric_limits<double>::infinity();
    double best_s = 0.0;
    auto consider = [&](double l, double s) {
      if (l > 0.0 && l < best_l) {
        best_l = l;
        best_s = s;
      }
    };
    for (const Frustum& f : parts_) {
      const double k = (f.r_b - f.r_a) / (f.s_b - f.s_a);
      const double gamma = k * alpha;
      const double delta = f.r_a + k * (beta - f.s_a);
      const double A = DD - alpha * alpha - gamma * gamma;
      const double B = -2.0 * DP - 2.0 * alpha * beta - 2.0 * gamma * delta;
      const double C = PP - beta * beta - delta * delta;
      double roots[2];
      int nroots = 0;
      if (std::abs(A) < 1e-15 * DD) {
        if (B != 0.0) roots[nroots++] = -C / B;
      } else {
        const double disc = B * B - 4.0 * A * C;
        if (disc < 0.0) continue;
        const double sq = std::sqrt(disc);
        // Numerically stable pair of roots.
        const double q = -0.5 * (B + (B >= 0.0 ? sq : -sq));
        roots[nroots++] = q / A;
        if (q != 0.0) roots[nroots++] = C / q;
      }
      for (int i = 0; i < nroots; ++i) {
        const double l = roots[i];
        const double s = alpha * l + beta;
        if (s < f.s_a || s > f.s_b) continue;
        if (gamma * l + delta < 0.0) continue;
        consider(l, s);
      }
    }
    // End caps.
    if (alpha != 0.0) {
      for (double s_cap : {0.0, length()}) {
        const double l = (s_cap - beta) / alpha;
        const Vec3 q = l * D - tip_;
        const double radial2 = q.squaredNorm() - s_cap * s_cap;
        const double r = radius_at(s_cap);
        if (radial2 <= r * r) consider(l, s_cap);
      }
    }
    if (!std::isfinite(best_l)) return std::nullopt;
    return best_s;
  }

 private:
  const PointerSpec& spec_;
  Vec3 tip_;
  Vec3 axis_;
  std::vector<Frustum> parts_;
  double max_radius_ = 0.0;
};

// Pixels whose centre lies near the projected axis.
BinaryImage pointer_window(const PointerShape& shape, const CameraModel& camera) {
  BinaryImage mask(camera.width, camera.height);
  const double L = shape.length();
  const Vec3 tail = shape.tip() + L * shape.axis();
  const double z_min = std::min(shape.tip().z(), tail.z());
  const double f = std::max(camera.K(0, 0), camera.K(1, 1));
  const double margin = 1.5 * f * shape.max_radius() / z_min + 3.0;
  auto image_of = [&](double s) {
    const Vec3 X = shape.tip() + s * shape.axis();
    const Vec3 h = camera.K * X;
    Vec2 p(h.x() / h.z(), h.y() / h.z());
    if (!camera.distortion.is_identity()) p = camera.distortion.distort(p);
    return p;
  };
  const double projected = (image_of(0.0) - image_of(L)).norm();
  const int steps = std::max(2, static_cast<int>(std::ceil(4.0 * projected / margin)) + 1);
  const int rad = static_cast<int>(std::ceil(margin));
  for (int k = 0; k <= steps; ++k) {
    const Vec2 c = image_of(L * k / steps);
    const int cx = static_cast<int>(std::lround(c.x())), cy = static_cast<int>(std::lround(c.y()));
    for (int y = cy - rad; y <= cy + rad; ++y) {
      for (int x = cx - rad; x <= cx + rad; ++x) {
        if (!mask.in_bounds(x, y)) continue;
        if ((Vec2(x, y) - c).norm() <= margin) mask.set(x, y);
      }
    }
  }
  return mask;
}

void check_in_front(const PointerShape& shape) {
  const Vec3 tail = shape.tip() + shape.length() * shape.axis();
  const double r = shape.max_radius();
  if (!(shape.tip().z() > r) || !(tail.z() > r)) {
    throw Error(ErrorKind::BehindCamera, "render", "pointer is not entirely in front of the camera");
  }
}

Rgb band_color(const SceneSpec& scene, double s) {
  const ClassId id = scene.spec.band_labels()[scene.spec.band_at(s)];
  const auto it = scene.band_colors.find(id);
  if (it == scene.band_colors.end()) throw Error(ErrorKind::InvalidArgument, "render", "band class has no color");
  Rgb c = it->second;
  for (const Highlight& h : scene.highlights) {
    if (s >= h.s0 && s <= h.s1) {
      const float v = std::max({c.r, c.g, c.b});
      const auto f = static_cast<float>(h.desaturation);
      c = {c.r + f * (v - c.r), c.g + f * (v - c.g), c.b + f * (v - c.b)};
    }
  }
  return c;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

void SceneSpec::validate() const {
  if (!(blur_sigma >= 0.0) || !(noise_sigma >= 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "scene", "blur and noise sigmas must be non-negative");
  }
  if (!valid_color(background)) throw Error(ErrorKind::InvalidArgument, "scene", "background color out of range");
  for (const auto& [id, c] : band_colors) {
    if (!valid_color(c)) throw Error(ErrorKind::InvalidArgument, "scene", "band color out of range");
  }
  for (const auto& o : occluders) {
    if (!valid_color(o.color)) throw Error(ErrorKind::InvalidArgument, "scene", "occluder color out of range");
  }
  for (const auto& d : distractors) {
    if (!valid_color(d.color)) throw Error(ErrorKind::InvalidArgument, "scene", "distractor color out of range");
  }
  if (std::abs(pose.direction.norm() - 1.0) > 1e-9) {
    throw Error(ErrorKind::InvalidArgument, "scene", "pointer direction must be a unit vector");
  }
}

GroundTruth ground_truth(const SceneSpec& scene, const CameraModel& camera) {
  GroundTruth gt;
  gt.pose = scene.pose;
  const Vec3 tip = camera.R * scene.pose.tip + camera.t;
  const Vec3 axis = camera.R * scene.pose.direction;
  // Camera centre is the origin here.
  Vec3 normal = axis.cross(tip);
  if (normal.norm() == 0.0) throw Error(ErrorKind::DegenerateGeometry, "render", "axis passes through the camera");
  normal.normalize();
  const Mat3& K = camera.K;
  auto to_pixel = [&](const Vec3& X) {
    if (!(X.z() > 0.0)) throw Error(ErrorKind::BehindCamera, "render", "contour point behind the camera");
    const double xn = X.x() / X.z(), yn = X.y() / X.z();
    Vec2 p(K(0, 0) * xn + K(0, 1) * yn + K(0, 2), K(1, 1) * yn + K(1, 2));
    if (!camera.distortion.is_identity()) p = camera.distortion.distort(p);
    return p;
  };
  auto inside = [&](const Vec2& p) {
    return p.x() >= -0.5 && p.y() >= -0.5 && p.x() <= camera.width - 0.5 && p.y() <= camera.height - 0.5;
  };
  for (std::size_t i = 0; i < scene.spec.edge_count(); ++i) {
    const Vec3 centre = tip + scene.spec.distance(i) * axis;
    const double w = scene.spec.radius(i);
    GroundTruthEdge e;
    e.edge = i;
    e.plus = to_pixel(centre + w * normal);
    e.minus = to_pixel(centre - w * normal);
    e.in_image = inside(e.plus) && inside(e.minus);
    for (const Occluder& o : scene.occluders) {
      if (o.contains(e.plus) && o.contains(e.minus)) e.occluded = true;
    }
    gt.edges.push_back(e);
  }
  return gt;
}

Rendering render(const SceneSpec& scene, const CameraModel& camera) {
  scene.validate();
  camera.validate();
  const PointerShape shape(scene, camera);
  check_in_front(shape);
  const int W = camera.width, H = camera.height;
  RasterImage img(W, H, scene.background);
  const BinaryImage window = pointer_window(shape, camera);
  const Mat3 Kinv = camera.K.inverse();

  int x_lo = W, y_lo = H, x_hi = -1, y_hi = -1;
  auto grow = [&](int x0, int y0, int x1, int y1) {
    x_lo = std::min(x_lo, std::max(0, x0));
    y_lo = std::min(y_lo, std::max(0, y0));
    x_hi = std::max(x_hi, std::min(W - 1, x1));
    y_hi = std::max(y_hi, std::min(H - 1, y1));
  };
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      if (window.get(x, y)) grow(x, y, x, y);
    }
  }
  for (const Occluder& o : scene.occluders) {
    grow(static_cast<int>(std::floor(o.x0)) - 1, static_cast<int>(std::floor(o.y0)) - 1,
         static_cast<int>(std::ceil(o.x1)) + 1, static_cast<int>(std::ceil(o.y1)) + 1);
  }
  for (const Distractor& d : scene.distractors) {
    grow(static_cast<int>(std::floor(d.center.x() - d.radius)) - 1,
         static_cast<int>(std::floor(d.center.y() - d.radius)) - 1,
         static_cast<int>(std::ceil(d.center.x() + d.radius)) + 1,
         static_cast<int>(std::ceil(d.center.y() + d.radius)) + 1);
  }

  if (x_hi >= x_lo) {
#pragma omp parallel for schedule(dynamic, 8)
    for (int y = y_lo; y <= y_hi; ++y) {
      for (int x = x_lo; x <= x_hi; ++x) {
        const bool near_pointer = window.get(x, y);
        double r = 0, g = 0, b = 0;
        bool touched = near_pointer;
        for (int sy = 0; sy < kSupersample; ++sy) {
          for (int sx = 0; sx < kSupersample; ++sx) {
            const Vec2 p(x - 0.5 + (sx + 0.5) / kSupersample, y - 0.5 + (sy + 0.5) / kSupersample);
            Rgb c = scene.background;
            bool done = false;
            for (const Occluder& o : scene.occluders) {
              if (o.contains(p)) {
                c = o.color;
                done = touched = true;
                break;
              }
            }
            if (!done && near_pointer) {
              Vec2 ideal = p;
              if (!camera.distortion.is_identity()) {
                const std::array<Vec2, 1> in{p};
                ideal = undistort_points(in, camera.distortion)[0];
              }
              if (const auto s = shape.hit(Kinv * Vec3(ideal.x(), ideal.y(), 1.0))) {
                c = band_color(scene, *s);
                done = true;
              }
            }
            if (!done) {
              for (const Distractor& d : scene.distractors) {
                if ((p - d.center).norm() <= d.radius) {
                  c = d.color;
                  touched = true;
                  break;
                }
              }
            }
            r += c.r;
            g += c.g;
            b += c.b;
          }
        }
        if (!touched) continue;
        constexpr double n = kSupersample * kSupersample;
        img.at(x, y) = {static_cast<float>(r / n), static_cast<float>(g / n), static_cast<float>(b / n)};
      }
    }
  }

  if (scene.blur_sigma > 0.0 && x_hi >= x_lo) {
    const int pad = static_cast<int>(std::ceil(4.0 * scene.blur_sigma)) + 2;
    const int wx0 = std::max(0, x_lo - pad), wy0 = std::max(0, y_lo - pad);
    const int wx1 = std::min(W - 1, x_hi + pad), wy1 = std::min(H - 1, y_hi + pad);
    RasterImage crop(wx1 - wx0 + 1, wy1 - wy0 + 1);
    for (int y = wy0; y <= wy1; ++y)
      for (int x = wx0; x <= wx1; ++x) crop.at(x - wx0, y - wy0) = img.at(x, y);
    const RasterImage blurred = kernels::parallel::gaussian_blur(crop, scene.blur_sigma);
    for (int y = wy0; y <= wy1; ++y)
      for (int x = wx0; x <= wx1; ++x) img.at(x, y) = blurred.at(x - wx0, y - wy0);
  }

  if (scene.noise_sigma > 0.0) {
    std::mt19937_64 rng(scene.seed);
    std::normal_distribution<double> noise(0.0, scene.noise_sigma);
    for (Rgb& p : img.pixels()) {
      p.r = static_cast<float>(p.r + noise(rng));
      p.g = static_cast<float>(p.g + noise(rng));
      p.b = static_cast<float>(p.b + noise(rng));
    }
    img.clamp();
  }
  return {std::move(img), ground_truth(scene, camera)};
}

LabelImage render_label_mask(const SceneSpec& scene, const CameraModel& camera) {
  const PointerShape shape(scene, camera);
  check_in_front(shape);
  const BinaryImage window = pointer_window(shape, camera);
  const Mat3 Kinv = camera.K.inverse();
  LabelImage mask(camera.width, camera.height);
  for (int y = 0; y < camera.height; ++y) {
    for (int x = 0; x < camera.width; ++x) {
      if (!window.get(x, y)) continue;
      const Vec2 p(x, y);
      if (std::any_of(scene.occluders.begin(), scene.occluders.end(), [&](const Occluder& o) { return o.contains(p); })) {
        continue;
      }
      Vec2 ideal = p;
      if (!camera.distortion.is_identity()) {
        const std::array<Vec2, 1> in{p};
        ideal = undistort_points(in, camera.distortion)[0];
      }
      if (const auto s = shape.hit(Kinv * Vec3(ideal.x(), ideal.y(), 1.0))) {
        mask.at(x, y) = static_cast<std::uint8_t>(scene.spec.band_labels()[scene.spec.band_at(*s)]);
      }
    }
  }
  return mask;
}

PointerPose sweep_pose(double depth_mm, double angle_deg, double length_mm, const CameraModel& camera) {
  const double a = angle_deg * std::numbers::pi / 180.0;
  const Vec3 mid_cam(0.0, 0.0, depth_mm);
  const Vec3 dir_cam(std::cos(a), 0.0, std::sin(a));
  PointerPose pose;
  pose.direction = (camera.R.transpose() * dir_cam).normalized();
  pose.tip = camera.to_world(mid_cam - 0.5 * length_mm * dir_cam);
  return pose;
}

std::vector<PointerPose> square_trace(const SquareTrace& trace, const CameraModel& camera) {
  if (trace.frames < 1 || !(trace.side_mm > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "square-trace", "need frames >= 1 and a positive side");
  }
  // Pen-like hold: tail up and to the right, leaning toward the camera.
  const Vec3 base_dir = Vec3(0.85, -0.3, -0.45).normalized();
  std::vector<PointerPose> poses;
  poses.reserve(static_cast<std::size_t>(trace.frames));
  const double h = 0.5 * trace.side_mm;
  for (int k = 0; k < trace.frames; ++k) {
    const double s = 4.0 * static_cast<double>(k) / trace.frames;  // perimeter position in sides
    const int side = std::min(3, static_cast<int>(s));
    const double f = s - side;
    Vec2 p;
    switch (side) {
      case 0: p = {-h + 2 * h * f, -h}; break;
      case 1: p = {h, -h + 2 * h * f}; break;
      case 2: p = {h - 2 * h * f, h}; break;
      default: p = {-h, h - 2 * h * f}; break;
    }
    const Vec3 tip_cam(trace.center_x_mm + p.x(), trace.center_y_mm + p.y(), trace.depth_mm);
    // Slow wobble of a few degrees, as a hand would.
    const double phase = 2.0 * std::numbers::pi * k / trace.frames;
    const Eigen::AngleAxisd wobble_y(0.05 * std::sin(3.0 * phase), Vec3::UnitY());
    const Eigen::AngleAxisd wobble_z(0.04 * std::cos(2.0 * phase), Vec3::UnitZ());
    const Vec3 dir_cam = (wobble_z * wobble_y * base_dir).normalized();
    poses.push_back({camera.to_world(tip_cam), (camera.R.transpose() * dir_cam).normalized()});
  }
  return poses;
}

std::vector<SweepCell> sweep(const std::vector<double>& depths_mm, const std::vector<double>& angles_deg,
                             const SceneSpec& scene_template, const CameraModel& camera, std::uint64_t seed) {
  std::vector<SweepCell> cells;
  std::uint64_t index = 0;
  for (double depth : depths_mm) {
    for (double angle : angles_deg) {
      SweepCell cell{depth, angle, scene_template};
      cell.scene.pose = sweep_pose(depth, angle, scene_template.spec.total_length(), camera);
      cell.scene.seed = mix_seed(seed, index++);
      cells.push_back(std::move(cell));
    }
  }
  return cells;
}

PointerSpec reference_pointer() {
  // Red = 1, green = 2, blue = 3; the single blue band breaks the symmetry.
  return PointerSpec({20, 38, 62, 80, 105, 122, 150, 172, 200, 226}, std::vector<double>(10, 2.5),
                     {1, 2, 1, 2, 3, 2, 1, 2, 1, 2, 1}, 251.0);
}

std::map<ClassId, Rgb> reference_band_colors() {
  return {{1, {0.85f, 0.12f, 0.10f}}, {2, {0.10f, 0.65f, 0.20f}}, {3, {0.12f, 0.25f, 0.85f}}};
}

CameraModel reference_camera() { return CameraModel::simple(3000.0, 2448, 2048); }

}  // namespace bandpose
