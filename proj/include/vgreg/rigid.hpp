// rigid.hpp - coarse rigid pre-alignment of two graphs' dense point clouds:
// least-squares rigid fit and multi-start trimmed ICP.
#pragma once

#include "graph.hpp"
#include "kdtree.hpp"

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <unordered_map>

namespace vgreg {

struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  [[nodiscard]] Vec3 apply(const Vec3& p) const { return rotation * p + translation; }

  [[nodiscard]] RigidTransform inverse() const {
    return {rotation.transpose(), -(rotation.transpose() * translation)};
  }

  /// this after other: p -> this(other(p)).
  [[nodiscard]] RigidTransform after(const RigidTransform& other) const {
    return {rotation * other.rotation, rotation * other.translation + translation};
  }

  [[nodiscard]] bool is_proper(double tol = 1e-9) const {
    return (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol &&
           std::abs(rotation.determinant() - 1.0) <= tol;
  }
};

/// Angle in degrees of the rotation R1^T R2.
inline double rotation_angle_deg(const Mat3& r1, const Mat3& r2) {
  const Mat3 r = r1.transpose() * r2;
  const double c = (r.trace() - 1.0) / 2.0;
  const double s = 0.5 * Vec3(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1)).norm();
  return std::atan2(s, c) * 180.0 / M_PI;
}

// ---------------------------------------------------------------------------

/// Node coordinates followed by every path sample, with points closer than
/// the graph's endpoint tolerance to an earlier point dropped.
inline std::vector<Vec3> collect_point_cloud(const SpatialGraph& g) {
  const double tol = g.endpoint_tolerance();
  std::vector<Vec3> out;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> cells;
  auto cell_of = [&](const Vec3& p, int dx, int dy, int dz) {
    const auto ix = static_cast<std::int64_t>(std::floor(p.x() / tol)) + dx;
    const auto iy = static_cast<std::int64_t>(std::floor(p.y() / tol)) + dy;
    const auto iz = static_cast<std::int64_t>(std::floor(p.z() / tol)) + dz;
    return Rng::mix(static_cast<std::uint64_t>(ix) * 0x9E3779B97F4A7C15ULL ^
                    Rng::mix(static_cast<std::uint64_t>(iy) + 0x632BE59BD9B4E019ULL) ^
                    Rng::mix(static_cast<std::uint64_t>(iz) * 0x85EBCA77C2B2AE63ULL + 1));
  };
  auto add = [&](const Vec3& p) {
    for (int dx = -1; dx <= 1; ++dx)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dz = -1; dz <= 1; ++dz) {
          auto it = cells.find(cell_of(p, dx, dy, dz));
          if (it == cells.end()) continue;
          for (auto idx : it->second)
            if ((out[idx] - p).norm() <= tol) return;
        }
    cells[cell_of(p, 0, 0, 0)].push_back(out.size());
    out.push_back(p);
  };
  for (const auto& n : g.nodes()) add(n.coord);
  for (const auto& e : g.edges())
    for (const auto& p : e.path) add(p);
  return out;
}

namespace detail {

/// Ratio of the two leading principal variances; near zero for collinear sets.
inline double planarity(std::span<const Vec3> pts) {
  Vec3 mean = Vec3::Zero();
  for (const auto& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  Mat3 cov = Mat3::Zero();
  for (const auto& p : pts) cov += (p - mean) * (p - mean).transpose();
  const Eigen::SelfAdjointEigenSolver<Mat3> eig(cov, Eigen::EigenvaluesOnly);
  const Vec3 ev = eig.eigenvalues();  // ascending
  return ev[2] > 0.0 ? ev[1] / ev[2] : 0.0;
}

}  // namespace detail

/// Least-squares rotation + translation taking `from` onto `to`
/// (minimizes sum |R a + t - b|^2), reflections excluded.
inline RigidTransform kabsch(std::span<const Vec3> from, std::span<const Vec3> to) {
  if (from.size() != to.size()) throw ArgumentError("kabsch: point lists differ in length");
  if (from.size() < 3) throw DegenerateError("kabsch: need at least 3 pairs");
  if (detail::planarity(from) < 1e-12 || detail::planarity(to) < 1e-12)
    throw DegenerateError("kabsch: points are collinear");
  Vec3 ca = Vec3::Zero(), cb = Vec3::Zero();
  for (std::size_t k = 0; k < from.size(); ++k) {
    ca += from[k];
    cb += to[k];
  }
  ca /= static_cast<double>(from.size());
  cb /= static_cast<double>(to.size());
  Mat3 H = Mat3::Zero();
  for (std::size_t k = 0; k < from.size(); ++k) H += (from[k] - ca) * (to[k] - cb).transpose();
  const Eigen::JacobiSVD<Mat3> svd(H, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 fix = Mat3::Identity();
  fix(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  RigidTransform T;
  T.rotation = svd.matrixV() * fix * svd.matrixU().transpose();
  T.translation = cb - T.rotation * ca;
  return T;
}

// ---------------------------------------------------------------------------
// Rotation grids

/// The 24 proper rotations of the cube (signed permutation matrices with
/// determinant +1), identity first.
inline std::vector<Mat3> cube_rotations() {
  std::vector<Mat3> out;
  const int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  for (const auto& p : perms)
    for (int s = 0; s < 8; ++s) {
      Mat3 R = Mat3::Zero();
      for (int r = 0; r < 3; ++r) R(r, p[r]) = (s >> r) & 1 ? -1.0 : 1.0;
      if (R.determinant() > 0.0) out.push_back(R);
    }
  return out;
}

/// The 60 rotations of the icosahedron, generated by closure from a 5-fold,
/// a 3-fold and a 2-fold axis. Identity first.
inline std::vector<Mat3> icosahedral_rotations() {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  const std::vector<Mat3> gens = {
      Eigen::AngleAxisd(2.0 * M_PI / 5.0, Vec3(0, 1, phi).normalized()).toRotationMatrix(),
      Eigen::AngleAxisd(2.0 * M_PI / 3.0, Vec3(1, 1, 1).normalized()).toRotationMatrix(),
      Eigen::AngleAxisd(M_PI, Vec3::UnitZ()).toRotationMatrix()};
  std::vector<Mat3> group = {Mat3::Identity()};
  for (std::size_t k = 0; k < group.size() && group.size() < 200; ++k)
    for (const auto& g : gens) {
      const Mat3 c = g * group[k];
      bool seen = false;
      for (const auto& h : group) seen = seen || (h - c).cwiseAbs().maxCoeff() < 1e-9;
      if (!seen) group.push_back(c);
    }
  return group;
}

/// n near-uniform rotations from a super-Fibonacci spiral on the unit
/// quaternions.
inline std::vector<Mat3> spiral_rotations(std::size_t n) {
  constexpr double phi = 1.4142135623730951, psi = 1.533751168755204288118041;
  std::vector<Mat3> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double s = static_cast<double>(i) + 0.5, t = s / static_cast<double>(n);
    const double r = std::sqrt(t), R = std::sqrt(1.0 - t);
    const double a = 2.0 * M_PI * s / phi, b = 2.0 * M_PI * s / psi;
    out.push_back(Eigen::Quaterniond(R * std::cos(b), r * std::sin(a), r * std::cos(a), R * std::sin(b))
                      .normalized()
                      .toRotationMatrix());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Multi-start trimmed ICP

struct RigidConfig {
  std::size_t n_rotation_starts = 24;  // 24 (cube) or 60 (icosahedron)
  double trim_fraction = 0.7;
  std::size_t max_iters = 100;
  double tol = 1e-7;  // relative RMSE change
  std::size_t max_points = 0;  // deterministic subsample cap per cloud; 0 keeps all
  // coarse search: extra spiral starts, all starts scored by a short ICP on a
  // subsample, the best `refine_top` refined on the full clouds
  std::size_t spiral_starts = 512;
  std::size_t coarse_points = 256;
  std::size_t coarse_iters = 8;
  std::size_t refine_top = 8;

  void validate() const {
    if (n_rotation_starts != 24 && n_rotation_starts != 60)
      throw ArgumentError("RigidConfig: n_rotation_starts must be 24 or 60");
    if (coarse_points < 3 || coarse_iters < 1 || refine_top < 1)
      throw ArgumentError("RigidConfig: coarse_points >= 3, coarse_iters >= 1 and refine_top >= 1");
    if (!(trim_fraction > 0.0 && trim_fraction <= 1.0))
      throw ArgumentError("RigidConfig: trim_fraction must be in (0, 1]");
    if (max_iters < 1 || !(tol > 0.0)) throw ArgumentError("RigidConfig: max_iters >= 1 and tol > 0");
  }
};

struct AlignmentReport {
  RigidTransform transform;
  double trimmed_rmse = 0.0;
  double inlier_fraction = 1.0;
  std::size_t starts_evaluated = 0;
  std::size_t best_start = 0;
  std::vector<double> rmse_trace;  // of the winning start
};

/// Every k-th point so that at most `cap` remain.
inline std::vector<Vec3> subsample(std::span<const Vec3> pts, std::size_t cap) {
  if (cap == 0 || pts.size() <= cap) return {pts.begin(), pts.end()};
  std::vector<Vec3> out;
  out.reserve(cap);
  for (std::size_t k = 0; k < cap; ++k) out.push_back(pts[k * pts.size() / cap]);
  return out;
}

namespace detail {

struct IcpRun {
  RigidTransform transform;
  std::vector<double> trace;
};

inline IcpRun trimmed_icp(std::span<const Vec3> src, const KdTree& tree, RigidTransform T,
                          std::size_t keep, const RigidConfig& cfg, double tiny) {
  IcpRun run;
  RigidTransform prev = T;
  std::vector<KdTree::Hit> hits(src.size());
  std::vector<std::size_t> order(src.size());
  std::vector<Vec3> a, b;
  for (std::size_t it = 0; it < cfg.max_iters; ++it) {
    for (std::size_t k = 0; k < src.size(); ++k) hits[k] = tree.nearest(T.apply(src[k]));
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto closer = [&](std::size_t x, std::size_t y) {
      return hits[x].dist2 < hits[y].dist2 || (hits[x].dist2 == hits[y].dist2 && x < y);
    };
    if (keep < order.size()) std::nth_element(order.begin(), order.begin() + keep, order.end(), closer);
    std::sort(order.begin(), order.begin() + keep);
    double ss = 0.0;
    for (std::size_t k = 0; k < keep; ++k) ss += hits[order[k]].dist2;
    const double rmse = std::sqrt(ss / static_cast<double>(keep));
    if (!run.trace.empty() && rmse > run.trace.back()) {
      T = prev;
      break;
    }
    run.trace.push_back(rmse);
    const auto n = run.trace.size();
    if (n >= 2 && run.trace[n - 2] - rmse <= cfg.tol * run.trace[n - 2]) break;
    if (rmse <= tiny || it + 1 == cfg.max_iters) break;
    a.clear();
    b.clear();
    for (std::size_t k = 0; k < keep; ++k) {
      a.push_back(src[order[k]]);
      b.push_back(tree.point(hits[order[k]].index));
    }
    try {
      prev = T;
      T = kabsch(a, b);
    } catch (const DegenerateError&) {
      T = prev;
      break;
    }
  }
  run.transform = T;
  return run;
}

inline void require_spread(std::span<const Vec3> pts, const char* which) {
  if (pts.size() < 3) throw DegenerateError(std::string("rigid_align: ") + which + " has fewer than 3 points");
  if (planarity(pts) < 1e-12) throw DegenerateError(std::string("rigid_align: ") + which + " is collinear");
}

}  // namespace detail

/// Best trimmed-ICP solution over a fixed set of initial rotations (the cube
/// or icosahedral group followed by a spiral grid); the initial translation
/// of each start aligns the cloud centroids. Every start is scored by a short
/// ICP on a subsample and the best `refine_top` are run to convergence on
/// the full clouds. Ties go to the earliest start.
inline AlignmentReport rigid_align(std::span<const Vec3> cloudA, std::span<const Vec3> cloudB,
                                   const RigidConfig& cfg = {}) {
  cfg.validate();
  const auto src = subsample(cloudA, cfg.max_points);
  const auto dst = subsample(cloudB, cfg.max_points);
  detail::require_spread(src, "source cloud");
  detail::require_spread(dst, "target cloud");

  Vec3 ca = Vec3::Zero(), cb = Vec3::Zero();
  for (const auto& p : src) ca += p;
  for (const auto& p : dst) cb += p;
  ca /= static_cast<double>(src.size());
  cb /= static_cast<double>(dst.size());
  const double scale = std::max(Box::of(src).diagonal(), Box::of(dst).diagonal());
  const double tiny = 1e-12 * std::max(scale, 1.0);

  const KdTree tree(dst);
  const auto keep = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(cfg.trim_fraction * static_cast<double>(src.size()))), 3,
      src.size());
  auto starts = cfg.n_rotation_starts == 60 ? icosahedral_rotations() : cube_rotations();
  for (const auto& R : spiral_rotations(cfg.spiral_starts)) starts.push_back(R);
  auto init = [&](std::size_t s) { return RigidTransform{starts[s], cb - starts[s] * ca}; };

  std::vector<std::size_t> refine(starts.size());
  std::iota(refine.begin(), refine.end(), std::size_t{0});
  if (starts.size() > cfg.refine_top) {
    const auto coarse = subsample(src, cfg.coarse_points);
    const auto coarse_keep = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(cfg.trim_fraction * static_cast<double>(coarse.size()))), 3,
        coarse.size());
    RigidConfig quick = cfg;
    quick.max_iters = cfg.coarse_iters;
    std::vector<double> score(starts.size());
    for (std::size_t s = 0; s < starts.size(); ++s)
      score[s] = detail::trimmed_icp(coarse, tree, init(s), coarse_keep, quick, tiny).trace.back();
    std::stable_sort(refine.begin(), refine.end(), [&](std::size_t x, std::size_t y) { return score[x] < score[y]; });
    refine.resize(cfg.refine_top);
    std::sort(refine.begin(), refine.end());
  }

  AlignmentReport best;
  best.trimmed_rmse = std::numeric_limits<double>::infinity();
  for (const auto s : refine) {
    auto run = detail::trimmed_icp(src, tree, init(s), keep, cfg, tiny);
    if (run.trace.back() < best.trimmed_rmse) {
      best.transform = run.transform;
      best.trimmed_rmse = run.trace.back();
      best.best_start = s;
      best.rmse_trace = std::move(run.trace);
    }
  }
  best.starts_evaluated = starts.size();
  best.inlier_fraction = static_cast<double>(keep) / static_cast<double>(src.size());
  return best;
}

/// Moves every node and path point by T. Lengths and energies are carried
/// over unchanged; the graph constructor re-checks lengths against the moved
/// paths.
inline SpatialGraph apply_transform(const SpatialGraph& g, const RigidTransform& T) {
  std::vector<Node> nodes = g.nodes();
  for (auto& n : nodes) n.coord = T.apply(n.coord);
  std::vector<Edge> edges = g.edges();
  for (auto& e : edges)
    for (auto& p : e.path) p = T.apply(p);
  return SpatialGraph(std::move(nodes), std::move(edges), DuplicateEdges::reject);
}

}  // namespace vgreg
