#include "bandpose/association.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <set>

#include <Eigen/Dense>

#include "bandpose/error.hpp"

namespace bandpose {

namespace {

constexpr std::size_t kMaxAlignments = 32;

std::size_t oriented_index(const PointerSpec& spec, std::size_t j, Orientation o) {
  return o == Orientation::Forward ? j : spec.edge_count() - 1 - j;
}

void require_distinct(std::span<const AxisMatch> m) {
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (std::size_t j = i + 1; j < m.size(); ++j) {
      if (m[i].t == m[j].t || m[i].b == m[j].b) {
        throw Error(ErrorKind::DegenerateSample, "homography-1d", "repeated coordinate in sample");
      }
    }
  }
}

}  // namespace

bool Homography1D::monotone_on(double t_min, double t_max) const {
  const double d0 = g * t_min + 1.0;
  const double d1 = g * t_max + 1.0;
  if (!(d0 * d1 > 0.0)) return false;
  return std::abs(a - c * g) > 0.0 && std::isfinite(a) && std::isfinite(c) && std::isfinite(g);
}

Homography1D fit_homography_1d(std::span<const AxisMatch, 3> matches) {
  require_distinct(matches);
  Eigen::Matrix3d A;
  Eigen::Vector3d rhs;
  for (int k = 0; k < 3; ++k) {
    A.row(k) << matches[k].t, 1.0, -matches[k].t * matches[k].b;
    rhs(k) = matches[k].b;
  }
  const Eigen::FullPivLU<Eigen::Matrix3d> lu(A);
  if (lu.rank() < 3) throw Error(ErrorKind::DegenerateSample, "homography-1d", "singular sample");
  const Eigen::Vector3d x = lu.solve(rhs);
  const Homography1D h{x(0), x(1), x(2)};
  double t_min = matches[0].t, t_max = matches[0].t;
  for (const auto& m : matches) {
    t_min = std::min(t_min, m.t);
    t_max = std::max(t_max, m.t);
    const double scale = std::max(1.0, std::abs(m.b));
    if (!(std::abs(h.map(m.t) - m.b) <= 1e-6 * scale)) {
      throw Error(ErrorKind::DegenerateSample, "homography-1d", "sample is not representable");
    }
  }
  if (!h.monotone_on(t_min, t_max)) throw Error(ErrorKind::DegenerateSample, "homography-1d", "map is not monotone");
  return h;
}

Homography1D fit_homography_1d_lsq(std::span<const AxisMatch> matches) {
  if (matches.size() < 3) throw Error(ErrorKind::DegenerateSample, "homography-1d", "need at least three matches");
  if (matches.size() == 3) return fit_homography_1d(std::span<const AxisMatch, 3>(matches.data(), 3));
  Eigen::MatrixXd A(static_cast<Eigen::Index>(matches.size()), 3);
  Eigen::VectorXd rhs(static_cast<Eigen::Index>(matches.size()));
  for (std::size_t k = 0; k < matches.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    A.row(i) << matches[k].t, 1.0, -matches[k].t * matches[k].b;
    rhs(i) = matches[k].b;
  }
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  if (qr.rank() < 3) throw Error(ErrorKind::DegenerateSample, "homography-1d", "rank-deficient matches");
  const Eigen::Vector3d x = qr.solve(rhs);
  return {x(0), x(1), x(2)};
}

bool labels_compatible(const SideLabels& detected, const PointerSpec& spec, std::size_t i, Orientation o) {
  const SideLabels& s = spec.side_labels()[i];
  const ClassId want_left = o == Orientation::Forward ? s.left : s.right;
  const ClassId want_right = o == Orientation::Forward ? s.right : s.left;
  const bool left_ok = detected.left == kUndefinedClass || detected.left == want_left;
  const bool right_ok = detected.right == kUndefinedClass || detected.right == want_right;
  return left_ok && right_ok;
}

bool labels_score(const SideLabels& detected, const PointerSpec& spec, std::size_t i, Orientation o) {
  const bool any_defined = detected.left != kUndefinedClass || detected.right != kUndefinedClass;
  return any_defined && labels_compatible(detected, spec, i, o);
}

AlignmentSet align_labels_dp(std::span<const SideLabels> detected, const PointerSpec& spec) {
  if (detected.empty()) throw Error(ErrorKind::NoAssociation, "align", "no detected edges");
  const std::size_t m = detected.size(), n = spec.edge_count();

  struct Table {
    Orientation orientation;
    std::vector<int> score;  // (m+1) x (n+1)
  };
  auto at = [n](std::vector<int>& d, std::size_t i, std::size_t j) -> int& { return d[i * (n + 1) + j]; };

  std::vector<Table> tables;
  for (Orientation o : {Orientation::Forward, Orientation::Reversed}) {
    Table t{o, std::vector<int>((m + 1) * (n + 1), 0)};
    for (std::size_t i = 1; i <= m; ++i) {
      for (std::size_t j = 1; j <= n; ++j) {
        int best = std::max(at(t.score, i - 1, j), at(t.score, i, j - 1));
        if (labels_score(detected[i - 1], spec, oriented_index(spec, j - 1, o), o)) {
          best = std::max(best, at(t.score, i - 1, j - 1) + 1);
        }
        at(t.score, i, j) = best;
      }
    }
    tables.push_back(std::move(t));
  }
  const int best_score = std::max(at(tables[0].score, m, n), at(tables[1].score, m, n));
  if (best_score == 0) throw Error(ErrorKind::NoAssociation, "align", "no detected edge labels match the pointer");

  AlignmentSet out;
  for (Table& t : tables) {
    if (at(t.score, m, n) != best_score) continue;
    const Orientation o = t.orientation;
    using MatchSet = std::vector<EdgeMatch>;
    std::vector<std::optional<std::vector<MatchSet>>> memo((m + 1) * (n + 1));
    bool truncated = false;

    // All distinct optimal match sets of the prefixes (i, j), capped.
    auto enumerate = [&](auto&& self, std::size_t i, std::size_t j) -> const std::vector<MatchSet>& {
      auto& slot = memo[i * (n + 1) + j];
      if (slot) return *slot;
      std::set<MatchSet> found;
      const int here = at(t.score, i, j);
      if (here == 0) {
        found.insert(MatchSet{});
      } else {
        auto absorb = [&](const std::vector<MatchSet>& sets, std::optional<EdgeMatch> extra) {
          for (const MatchSet& s : sets) {
            if (found.size() > kMaxAlignments) {
              truncated = true;
              return;
            }
            MatchSet copy = s;
            if (extra) copy.push_back(*extra);
            found.insert(std::move(copy));
          }
        };
        if (i > 0 && j > 0 && labels_score(detected[i - 1], spec, oriented_index(spec, j - 1, o), o) &&
            at(t.score, i - 1, j - 1) + 1 == here) {
          absorb(self(self, i - 1, j - 1), EdgeMatch{i - 1, oriented_index(spec, j - 1, o)});
        }
        if (i > 0 && at(t.score, i - 1, j) == here) absorb(self(self, i - 1, j), std::nullopt);
        if (j > 0 && at(t.score, i, j - 1) == here) absorb(self(self, i, j - 1), std::nullopt);
      }
      slot = std::vector<MatchSet>(found.begin(), found.end());
      return *slot;
    };

    for (const MatchSet& s : enumerate(enumerate, m, n)) {
      if (out.alignments.size() >= kMaxAlignments) {
        truncated = true;
        break;
      }
      out.alignments.push_back({o, s, best_score});
    }
    out.truncated = out.truncated || truncated;
  }
  return out;
}

std::vector<SideLabels> detected_labels(const DetectionResult& result) {
  std::vector<SideLabels> labels;
  labels.reserve(result.edges.size());
  for (const auto& e : result.edges) labels.push_back({e.left, e.right});
  return labels;
}

Correspondence score_hypothesis(std::span<const double> axis_coordinates, std::span<const SideLabels> labels,
                                const PointerSpec& spec, const Homography1D& h, Orientation o) {
  const std::size_t m = axis_coordinates.size(), n = spec.edge_count();
  std::vector<double> mapped(m);
  for (std::size_t k = 0; k < m; ++k) mapped[k] = h.map(axis_coordinates[k]);

  auto nearest_spec = [&](double mm) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      const double d = std::abs(spec.distance(i) - mm);
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    return best;
  };
  auto nearest_detected = [&](double mm) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < m; ++k) {
      const double d = std::abs(mapped[k] - mm);
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    return best;
  };

  Correspondence c;
  c.homography = h;
  c.orientation = o;
  c.inlier.assign(m, false);
  for (std::size_t k = 0; k < m; ++k) {
    if (!std::isfinite(mapped[k])) continue;
    const std::size_t i = nearest_spec(mapped[k]);
    if (nearest_detected(spec.distance(i)) != k) continue;
    if (!labels_compatible(labels[k], spec, i, o)) continue;
    c.inlier[k] = true;
    c.matches.emplace_back(k, i);
  }
  return c;
}

std::vector<Correspondence> associate_ransac(const DetectionResult& result, const PointerSpec& spec,
                                             const AlignmentSet& alignments, const AssociationParams& params) {
  std::vector<double> coords;
  coords.reserve(result.edges.size());
  for (const auto& e : result.edges) coords.push_back(e.axis_coordinate);
  const auto labels = detected_labels(result);
  return associate_ransac(coords, labels, spec, alignments, params);
}

std::vector<Correspondence> associate_ransac(std::span<const double> axis_coordinates,
                                             std::span<const SideLabels> labels, const PointerSpec& spec,
                                             const AlignmentSet& alignments, const AssociationParams& params) {
  auto choose3 = [](std::size_t k) -> std::size_t { return k < 3 ? 0 : k * (k - 1) * (k - 2) / 6; };
  std::size_t total = 0;
  for (const auto& a : alignments.alignments) total += choose3(a.matches.size());
  if (total == 0) throw Error(ErrorKind::InsufficientMatches, "associate", "no alignment has three matched edges");

  struct Triplet {
    std::size_t alignment;
    std::array<std::size_t, 3> idx;
  };
  std::vector<Triplet> triplets;
  if (total <= params.max_triplets) {
    for (std::size_t a = 0; a < alignments.alignments.size(); ++a) {
      const std::size_t k = alignments.alignments[a].matches.size();
      for (std::size_t p = 0; p < k; ++p)
        for (std::size_t q = p + 1; q < k; ++q)
          for (std::size_t r = q + 1; r < k; ++r) triplets.push_back({a, {p, q, r}});
    }
  } else {
    std::mt19937_64 rng(params.seed);
    std::vector<double> weights;
    for (const auto& a : alignments.alignments) weights.push_back(static_cast<double>(choose3(a.matches.size())));
    std::discrete_distribution<std::size_t> pick_alignment(weights.begin(), weights.end());
    for (std::size_t s = 0; s < params.max_triplets; ++s) {
      const std::size_t a = pick_alignment(rng);
      const std::size_t k = alignments.alignments[a].matches.size();
      std::uniform_int_distribution<std::size_t> pick(0, k - 1);
      std::array<std::size_t, 3> idx{};
      idx[0] = pick(rng);
      do idx[1] = pick(rng);
      while (idx[1] == idx[0]);
      do idx[2] = pick(rng);
      while (idx[2] == idx[0] || idx[2] == idx[1]);
      std::sort(idx.begin(), idx.end());
      triplets.push_back({a, idx});
    }
  }

  const auto [t_lo, t_hi] = std::minmax_element(axis_coordinates.begin(), axis_coordinates.end());
  std::vector<Correspondence> best;
  std::size_t best_count = 0;
  for (std::size_t h_index = 0; h_index < triplets.size(); ++h_index) {
    const Triplet& tr = triplets[h_index];
    const Alignment& al = alignments.alignments[tr.alignment];
    std::array<AxisMatch, 3> sample{};
    for (int k = 0; k < 3; ++k) {
      const EdgeMatch& em = al.matches[tr.idx[k]];
      sample[k] = {axis_coordinates[em.first], spec.distance(em.second)};
    }
    Homography1D h;
    try {
      h = fit_homography_1d(sample);
    } catch (const Error&) {
      continue;
    }
    if (!h.monotone_on(*t_lo, *t_hi)) continue;
    if (h.increasing() != (al.orientation == Orientation::Forward)) continue;
    Correspondence c = score_hypothesis(axis_coordinates, labels, spec, h, al.orientation);
    c.hypothesis_index = h_index;
    if (c.inlier_count() > best_count) {
      best_count = c.inlier_count();
      best.clear();
    }
    if (c.inlier_count() == best_count && best_count > 0) {
      const bool seen = std::any_of(best.begin(), best.end(), [&](const Correspondence& o) {
        return o.orientation == c.orientation && o.matches == c.matches;
      });
      if (!seen) best.push_back(std::move(c));
    }
  }
  if (best.empty()) throw Error(ErrorKind::NoAssociation, "associate", "no triplet produced a valid 1D homography");
  return best;
}

}  // namespace bandpose
