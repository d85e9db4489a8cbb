// affinity.hpp - pairwise distance matrices between two graphs, their
// normalization, the exponential node/edge affinities and the factorized
// quadratic-assignment objective J(X) = vec(X)^T K vec(X).
#pragma once

#include "graph.hpp"

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <limits>

namespace vgreg {

using Matrix = Eigen::MatrixXd;

// ---------------------------------------------------------------------------
// Path distance

namespace detail {

/// Structure-of-arrays segment storage for the point-to-segment kernel.
struct SegmentBank {
  std::vector<double> sx, sy, sz, dx, dy, dz, inv_len2;

  [[nodiscard]] std::size_t size() const { return sx.size(); }

  void push(const Vec3& from, const Vec3& to) {
    const Vec3 d = to - from;
    const double l2 = d.squaredNorm();
    sx.push_back(from.x());
    sy.push_back(from.y());
    sz.push_back(from.z());
    dx.push_back(d.x());
    dy.push_back(d.y());
    dz.push_back(d.z());
    inv_len2.push_back(l2 > 0.0 ? 1.0 / l2 : 0.0);
  }

  /// Appends the segments of a polyline, merging runs of collinear segments
  /// (the union of the merged pieces is the same point set).
  void append(std::span<const Vec3> pts) {
    std::size_t start = 0;
    for (std::size_t k = 1; k < pts.size(); ++k) {
      const bool last = k + 1 == pts.size();
      if (!last) {
        const Vec3 run = pts[k] - pts[start];
        const Vec3 next = pts[k + 1] - pts[k];
        const bool collinear = run.cross(next).norm() <= 1e-13 * run.norm() * next.norm() && run.dot(next) > 0.0;
        if (collinear) continue;
      }
      push(pts[start], pts[k]);
      start = k;
    }
  }
};

/// For each of `n` query points, lowers best[i] to the squared distance to
/// the nearest of segments [first, last) of the bank.
inline void nearest_segment_dist2(const double* __restrict px, const double* __restrict py,
                                  const double* __restrict pz, std::size_t n, const SegmentBank& s,
                                  std::size_t first, std::size_t last, double* __restrict best) {
  for (std::size_t k = first; k < last; ++k) {
    const double Sx = s.sx[k], Sy = s.sy[k], Sz = s.sz[k];
    const double Dx = s.dx[k], Dy = s.dy[k], Dz = s.dz[k], Il = s.inv_len2[k];
    for (std::size_t i = 0; i < n; ++i) {
      const double wx = px[i] - Sx, wy = py[i] - Sy, wz = pz[i] - Sz;
      double t = (wx * Dx + wy * Dy + wz * Dz) * Il;
      t = t > 0.0 ? t : 0.0;
      t = t < 1.0 ? t : 1.0;
      const double ex = wx - t * Dx, ey = wy - t * Dy, ez = wz - t * Dz;
      const double d2 = ex * ex + ey * ey + ez * ez;
      best[i] = d2 < best[i] ? d2 : best[i];
    }
  }
}

/// Resampled paths of every edge of one graph, stored contiguously.
struct PathBank {
  std::size_t samples = 0;
  std::vector<double> px, py, pz;     // `samples` points per edge
  SegmentBank seg;                    // merged segments of all edges
  std::vector<std::size_t> seg_start; // edge e owns [seg_start[e], seg_start[e + 1])

  PathBank(const SpatialGraph& g, std::size_t n) : samples(n) {
    seg_start.push_back(0);
    for (const auto& e : g.edges()) {
      const auto r = polyline_resample(e.path, n);
      for (const auto& p : r.points) {
        px.push_back(p.x());
        py.push_back(p.y());
        pz.push_back(p.z());
      }
      seg.append(r.points);
      seg_start.push_back(seg.size());
    }
  }

  /// Mean over edge v's samples of the distance to edge w of `other`.
  [[nodiscard]] double mean_min(std::size_t v, const PathBank& other, std::size_t w,
                                std::vector<double>& scratch) const {
    scratch.assign(samples, std::numeric_limits<double>::infinity());
    const std::size_t o = v * samples;
    nearest_segment_dist2(px.data() + o, py.data() + o, pz.data() + o, samples, other.seg,
                          other.seg_start[w], other.seg_start[w + 1], scratch.data());
    double sum = 0.0;
    for (double d2 : scratch) sum += std::sqrt(d2);
    return sum / static_cast<double>(samples);
  }
};

}  // namespace detail

/// Symmetrized mean of point-to-curve distances:
/// 0.5 * (mean_{a in A} d(a, B) + mean_{b in B} d(b, A)), where d measures to
/// the nearest segment of the other polyline.
inline double average_symmetric_distance(std::span<const Vec3> pa, std::span<const Vec3> pb) {
  if (pa.size() < 2 || pb.size() < 2)
    throw DegenerateError("average_symmetric_distance: polylines need at least 2 points");
  if (!(arc_length(pa) > 0.0) || !(arc_length(pb) > 0.0))
    throw DegenerateError("average_symmetric_distance: zero-length polyline");
  auto directed = [](std::span<const Vec3> pts, std::span<const Vec3> curve) {
    detail::SegmentBank s;
    s.append(curve);
    std::vector<double> x, y, z, best(pts.size(), std::numeric_limits<double>::infinity());
    for (const auto& p : pts) {
      x.push_back(p.x());
      y.push_back(p.y());
      z.push_back(p.z());
    }
    detail::nearest_segment_dist2(x.data(), y.data(), z.data(), pts.size(), s, 0, s.size(), best.data());
    double sum = 0.0;
    for (double d2 : best) sum += std::sqrt(d2);
    return sum / static_cast<double>(pts.size());
  };
  return 0.5 * (directed(pa, pb) + directed(pb, pa));
}

// ---------------------------------------------------------------------------
// Distance matrices and normalization

struct DistanceMatrices {
  Matrix C;  // node coordinates, nA x nB
  Matrix D;  // geodesic degrees, nA x nB
  Matrix P;  // path shapes, eA x eB
  Matrix L;  // lengths, eA x eB
  Matrix U;  // energies, eA x eB

  [[nodiscard]] DistanceMatrices transposed() const {
    return {C.transpose(), D.transpose(), P.transpose(), L.transpose(), U.transpose()};
  }
};

struct DistanceOptions {
  std::size_t path_samples = 50;
};

inline DistanceMatrices distance_matrices(const SpatialGraph& A, const SpatialGraph& B,
                                          const DistanceOptions& opt = {}) {
  if (A.empty() || B.empty()) throw ArgumentError("distance_matrices: graphs must be non-empty");
  if (opt.path_samples < 2) throw ArgumentError("distance_matrices: path_samples must be at least 2");
  const auto nA = static_cast<Eigen::Index>(A.node_count());
  const auto nB = static_cast<Eigen::Index>(B.node_count());
  DistanceMatrices dm;
  dm.C.resize(nA, nB);
  dm.D.resize(nA, nB);
  for (Eigen::Index j = 0; j < nB; ++j) {
    const auto& nb = B.nodes()[static_cast<std::size_t>(j)];
    for (Eigen::Index i = 0; i < nA; ++i) {
      const auto& na = A.nodes()[static_cast<std::size_t>(i)];
      dm.C(i, j) = (na.coord - nb.coord).norm();
      dm.D(i, j) = std::abs(na.degree_geo - nb.degree_geo);
    }
  }
  const auto eA = static_cast<Eigen::Index>(A.edge_count());
  const auto eB = static_cast<Eigen::Index>(B.edge_count());
  dm.P.resize(eA, eB);
  dm.L.resize(eA, eB);
  dm.U.resize(eA, eB);
  if (eA == 0 || eB == 0) return dm;
  const detail::PathBank bankA(A, opt.path_samples), bankB(B, opt.path_samples);
  std::vector<double> scratch;
  for (Eigen::Index w = 0; w < eB; ++w) {
    const auto& ew = B.edges()[static_cast<std::size_t>(w)];
    for (Eigen::Index v = 0; v < eA; ++v) {
      const auto& ev = A.edges()[static_cast<std::size_t>(v)];
      const auto vi = static_cast<std::size_t>(v), wi = static_cast<std::size_t>(w);
      dm.P(v, w) = 0.5 * (bankA.mean_min(vi, bankB, wi, scratch) + bankB.mean_min(wi, bankA, vi, scratch));
      dm.L(v, w) = std::abs(ev.length - ew.length);
      dm.U(v, w) = std::abs(ev.energy - ew.energy);
    }
  }
  return dm;
}

struct NormalizationStats {
  static constexpr double kFloor = 1e-8;
  double sigma_C = 1.0, sigma_D = 1.0, sigma_P = 1.0, sigma_L = 1.0, sigma_U = 1.0;
};

namespace detail {

template <typename Pick>
double pooled_offdiagonal_std(std::span<const DistanceMatrices> pop, Pick pick) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& dm : pop) {
    const Matrix& M = pick(dm);
    for (Eigen::Index c = 0; c < M.cols(); ++c)
      for (Eigen::Index r = 0; r < M.rows(); ++r)
        if (r != c) {
          sum += M(r, c);
          ++count;
        }
  }
  if (count == 0) return NormalizationStats::kFloor;
  const double mean = sum / static_cast<double>(count);
  double ss = 0.0;
  for (const auto& dm : pop) {
    const Matrix& M = pick(dm);
    for (Eigen::Index c = 0; c < M.cols(); ++c)
      for (Eigen::Index r = 0; r < M.rows(); ++r)
        if (r != c) ss += (M(r, c) - mean) * (M(r, c) - mean);
  }
  return std::max(std::sqrt(ss / static_cast<double>(count)), NormalizationStats::kFloor);
}

}  // namespace detail

/// Population standard deviation of the pooled off-diagonal entries of each
/// matrix kind, floored at NormalizationStats::kFloor.
inline NormalizationStats normalization_stats(std::span<const DistanceMatrices> population) {
  if (population.empty()) throw ArgumentError("normalization_stats: empty population");
  NormalizationStats s;
  s.sigma_C = detail::pooled_offdiagonal_std(population, [](const auto& m) -> const Matrix& { return m.C; });
  s.sigma_D = detail::pooled_offdiagonal_std(population, [](const auto& m) -> const Matrix& { return m.D; });
  s.sigma_P = detail::pooled_offdiagonal_std(population, [](const auto& m) -> const Matrix& { return m.P; });
  s.sigma_L = detail::pooled_offdiagonal_std(population, [](const auto& m) -> const Matrix& { return m.L; });
  s.sigma_U = detail::pooled_offdiagonal_std(population, [](const auto& m) -> const Matrix& { return m.U; });
  return s;
}

inline NormalizationStats normalization_stats(const DistanceMatrices& dm) {
  return normalization_stats(std::span<const DistanceMatrices>(&dm, 1));
}

// ---------------------------------------------------------------------------
// Affinities

/// Trade-offs between geometric and geodesic similarity. Each weight vector
/// lies on the simplex.
struct AffinityWeights {
  std::array<double, 2> alpha{0.5, 0.5};         // coordinates, degrees
  std::array<double, 3> beta{0.25, 0.25, 0.5};   // path shape, length, energy

  void validate() const {
    constexpr double tol = 1e-12;
    for (double a : alpha)
      if (!(a >= 0.0)) throw ArgumentError("AffinityWeights: alpha components must be non-negative");
    for (double b : beta)
      if (!(b >= 0.0)) throw ArgumentError("AffinityWeights: beta components must be non-negative");
    if (std::abs(alpha[0] + alpha[1] - 1.0) > tol) throw ArgumentError("AffinityWeights: alpha must sum to 1");
    if (std::abs(beta[0] + beta[1] + beta[2] - 1.0) > tol)
      throw ArgumentError("AffinityWeights: beta must sum to 1");
  }
};

namespace detail {
inline double bounded_exp(double neg) {
  return std::max(std::exp(neg), std::numeric_limits<double>::min());
}
}  // namespace detail

/// K_n = exp(-(a1 C / sC + a2 D / sD)), entrywise.
inline Matrix node_affinity(const DistanceMatrices& dm, const AffinityWeights& w, const NormalizationStats& s) {
  w.validate();
  Matrix K(dm.C.rows(), dm.C.cols());
  for (Eigen::Index c = 0; c < K.cols(); ++c)
    for (Eigen::Index r = 0; r < K.rows(); ++r) {
      double arg = 0.0;
      if (w.alpha[0] > 0.0) arg += w.alpha[0] * dm.C(r, c) / s.sigma_C;
      if (w.alpha[1] > 0.0) arg += w.alpha[1] * dm.D(r, c) / s.sigma_D;
      K(r, c) = detail::bounded_exp(-arg);
    }
  return K;
}

/// K_e = exp(-(b1 P / sP + b2 L / sL + b3 U / sU)), entrywise.
inline Matrix edge_affinity(const DistanceMatrices& dm, const AffinityWeights& w, const NormalizationStats& s) {
  w.validate();
  Matrix K(dm.P.rows(), dm.P.cols());
  for (Eigen::Index c = 0; c < K.cols(); ++c)
    for (Eigen::Index r = 0; r < K.rows(); ++r) {
      double arg = 0.0;
      if (w.beta[0] > 0.0) arg += w.beta[0] * dm.P(r, c) / s.sigma_P;
      if (w.beta[1] > 0.0) arg += w.beta[1] * dm.L(r, c) / s.sigma_L;
      if (w.beta[2] > 0.0) arg += w.beta[2] * dm.U(r, c) / s.sigma_U;
      K(r, c) = detail::bounded_exp(-arg);
    }
  return K;
}

using EdgeEnds = std::vector<std::array<std::size_t, 2>>;

inline EdgeEnds edge_ends(const SpatialGraph& g) {
  EdgeEnds out;
  out.reserve(g.edge_count());
  for (const auto& e : g.edges()) out.push_back({e.a, e.b});
  return out;
}

/// Factorized affinity: the full K over node-pair space is
///   K[(i,j),(i,j)]   = Kn(i,j)
///   K[(i1,j1),(i2,j2)] = Ke(v,w) for v = {i1,i2} in E_A, w = {j1,j2} in E_B
/// and zero elsewhere. vec(X) is column-major: index(i, j) = i + nA * j.
struct AffinityFactors {
  Matrix Kn;
  Matrix Ke;
  EdgeEnds edgesA, edgesB;

  static constexpr std::size_t kDenseCap = 4096;

  [[nodiscard]] Eigen::Index rows() const { return Kn.rows(); }
  [[nodiscard]] Eigen::Index cols() const { return Kn.cols(); }

  void check_shape(const Matrix& X) const {
    if (X.rows() != rows() || X.cols() != cols())
      throw ArgumentError("AffinityFactors: assignment has shape " + std::to_string(X.rows()) + "x" +
                          std::to_string(X.cols()) + ", expected " + std::to_string(rows()) + "x" +
                          std::to_string(cols()));
  }

  /// Edge part of K applied to vec(X), reshaped to nA x nB.
  [[nodiscard]] Matrix edge_product(const Matrix& X) const {
    check_shape(X);
    Matrix Y = Matrix::Zero(rows(), cols());
    const auto nEA = edgesA.size();
    for (std::size_t w = 0; w < edgesB.size(); ++w) {
      const auto b1 = static_cast<Eigen::Index>(edgesB[w][0]);
      const auto b2 = static_cast<Eigen::Index>(edgesB[w][1]);
      const double* x1 = X.col(b1).data();
      const double* x2 = X.col(b2).data();
      double* y1 = Y.col(b1).data();
      double* y2 = Y.col(b2).data();
      const double* kcol = Ke.data() + w * nEA;
      for (std::size_t v = 0; v < nEA; ++v) {
        const auto a1 = edgesA[v][0], a2 = edgesA[v][1];
        const double k = kcol[v];
        y1[a1] += k * x2[a2];
        y2[a2] += k * x1[a1];
        y2[a1] += k * x1[a2];
        y1[a2] += k * x2[a1];
      }
    }
    return Y;
  }

  /// K vec(X), reshaped.
  [[nodiscard]] Matrix product(const Matrix& X) const {
    Matrix Y = edge_product(X);
    Y.array() += Kn.array() * X.array();
    return Y;
  }

  /// Edge part of the quadratic form.
  [[nodiscard]] double edge_objective(const Matrix& X) const {
    check_shape(X);
    double total = 0.0;
    const auto nEA = edgesA.size();
    for (std::size_t w = 0; w < edgesB.size(); ++w) {
      const double* x1 = X.col(static_cast<Eigen::Index>(edgesB[w][0])).data();
      const double* x2 = X.col(static_cast<Eigen::Index>(edgesB[w][1])).data();
      const double* kcol = Ke.data() + w * nEA;
      double acc = 0.0;
      for (std::size_t v = 0; v < nEA; ++v) {
        const auto a1 = edgesA[v][0], a2 = edgesA[v][1];
        acc += kcol[v] * (x1[a1] * x2[a2] + x2[a1] * x1[a2]);
      }
      total += 2.0 * acc;
    }
    return total;
  }

  /// vec(X)^T K vec(X). The node term uses X^2 for soft X.
  [[nodiscard]] double objective(const Matrix& X) const {
    return (Kn.array() * X.array().square()).sum() + edge_objective(X);
  }

  /// Dense (nA nB) x (nA nB) K. Only for small problems.
  [[nodiscard]] Matrix dense(std::size_t cap = kDenseCap) const {
    const auto nA = rows(), nB = cols();
    const auto n = static_cast<std::size_t>(nA * nB);
    if (n > cap)
      throw CapacityError("dense affinity of side " + std::to_string(n) + " exceeds cap " + std::to_string(cap));
    auto idx = [nA](std::size_t i, std::size_t j) { return static_cast<Eigen::Index>(i + nA * j); };
    Matrix K = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (Eigen::Index j = 0; j < nB; ++j)
      for (Eigen::Index i = 0; i < nA; ++i) K(i + nA * j, i + nA * j) = Kn(i, j);
    for (std::size_t v = 0; v < edgesA.size(); ++v)
      for (std::size_t w = 0; w < edgesB.size(); ++w) {
        const double k = Ke(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(w));
        const auto [a1, a2] = edgesA[v];
        const auto [b1, b2] = edgesB[w];
        K(idx(a1, b1), idx(a2, b2)) = k;
        K(idx(a2, b2), idx(a1, b1)) = k;
        K(idx(a1, b2), idx(a2, b1)) = k;
        K(idx(a2, b1), idx(a1, b2)) = k;
      }
    return K;
  }
};

/// J(X) = vec(X)^T K vec(X) evaluated through the factors.
inline double qap_objective(const AffinityFactors& f, const Matrix& X) { return f.objective(X); }

inline AffinityFactors assemble_affinity(Matrix Kn, Matrix Ke, const SpatialGraph& A, const SpatialGraph& B) {
  if (Kn.rows() != static_cast<Eigen::Index>(A.node_count()) ||
      Kn.cols() != static_cast<Eigen::Index>(B.node_count()))
    throw ArgumentError("assemble_affinity: node affinity shape does not match the graphs");
  if (Ke.rows() != static_cast<Eigen::Index>(A.edge_count()) ||
      Ke.cols() != static_cast<Eigen::Index>(B.edge_count()))
    throw ArgumentError("assemble_affinity: edge affinity shape does not match the graphs");
  return {std::move(Kn), std::move(Ke), edge_ends(A), edge_ends(B)};
}

struct AffinityOptions {
  AffinityWeights weights{};
  DistanceOptions distances{};
  /// Population statistics; when empty the pair's own matrices are used.
  std::optional<NormalizationStats> stats;
};

/// Distance matrices, normalization and factor assembly in one step.
inline AffinityFactors build_affinity(const SpatialGraph& A, const SpatialGraph& B, const AffinityOptions& opt = {}) {
  const DistanceMatrices dm = distance_matrices(A, B, opt.distances);
  const NormalizationStats s = opt.stats.value_or(normalization_stats(dm));
  return assemble_affinity(node_affinity(dm, opt.weights, s), edge_affinity(dm, opt.weights, s), A, B);
}

}  // namespace vgreg
