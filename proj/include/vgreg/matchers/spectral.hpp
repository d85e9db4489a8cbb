// spectral.hpp - eigenvector relaxations (SM, SMAC) and probabilistic
// matching (PM).
#pragma once

#include "common.hpp"

namespace vgreg {

namespace detail {

struct PowerResult {
  Matrix x;
  std::size_t iterations = 0;
  bool converged = false;
};

/// Power iteration x <- op(x) / |op(x)| from x0 until the iterate moves less
/// than tol (2-norm).
template <typename Op>
PowerResult power_iterate(Op op, Matrix x0, std::size_t max_iters, double tol) {
  PowerResult r;
  double n0 = x0.norm();
  if (!(n0 > 0.0)) throw ArgumentError("power iteration: zero start vector");
  r.x = x0 / n0;
  for (std::size_t it = 0; it < max_iters; ++it) {
    Matrix y = op(r.x);
    const double ny = y.norm();
    if (!(ny > 0.0) || !std::isfinite(ny)) break;
    y /= ny;
    const double change = (y - r.x).norm();
    r.x = std::move(y);
    r.iterations = it + 1;
    if (change <= tol) {
      r.converged = true;
      break;
    }
  }
  return r;
}

/// Largest row sum of K, an upper bound on its spectral radius.
inline double max_degree(const AffinityFactors& f) {
  return f.product(Matrix::Ones(f.rows(), f.cols())).maxCoeff();
}

}  // namespace detail

/// Principal eigenvector of K (factorized products), reshaped to nA x nB.
inline Assignment spectral_match(const AffinityFactors& f, const MatcherConfig& cfg = {}) {
  cfg.validate();
  auto r = detail::power_iterate([&](const Matrix& x) { return f.product(x); }, uniform_matrix(f.rows(), f.cols()),
                                 cfg.power_max_iters, cfg.power_tol);
  // K is non-negative, so the Perron vector is too; abs() only removes -0 and round-off
  return finalize(f, r.x.cwiseAbs(), r.converged, r.iterations);
}

/// Orthogonal projector onto {X : all row sums equal, all column sums equal},
/// the homogeneous form of the one-to-one constraints.
inline Matrix project_balanced(const Matrix& X) {
  const Eigen::VectorXd rs = X.rowwise().sum();
  const Eigen::RowVectorXd cs = X.colwise().sum();
  const Eigen::VectorXd rc = rs.array() - rs.mean();
  const Eigen::RowVectorXd cc = cs.array() - cs.mean();
  Matrix P = X;
  P.colwise() -= rc / static_cast<double>(X.cols());
  P.rowwise() -= cc / static_cast<double>(X.rows());
  return P;
}

/// Leading eigenvector of P (K + rho I) P with P the balanced projector. The
/// shift rho (max degree of K) makes the leading eigenvalue dominant. The
/// soft output is shifted to be non-negative and scaled so rows sum to 1,
/// which keeps the equal-sum constraints.
inline Assignment smac(const AffinityFactors& f, const MatcherConfig& cfg = {}) {
  cfg.validate();
  const double rho = detail::max_degree(f);
  auto op = [&](const Matrix& x) {
    const Matrix px = project_balanced(x);
    Matrix y = f.product(px) + rho * px;
    return project_balanced(y);
  };
  Matrix x0 = project_balanced(uniform_matrix(f.rows(), f.cols()));
  if (!(x0.norm() > 0.0)) x0 = uniform_matrix(f.rows(), f.cols());
  auto r = detail::power_iterate(op, x0, cfg.power_max_iters, cfg.power_tol);
  Matrix x = r.x;
  if (x.sum() < 0.0) x = -x;
  const double lo = x.minCoeff();
  if (lo < 0.0) x.array() -= lo;
  const double row = x.sum() / static_cast<double>(x.rows());
  if (row > 0.0) x /= row;
  return finalize(f, std::move(x), r.converged, r.iterations);
}

/// Marginalizes K onto candidate pairs (K 1) and takes the nearest
/// doubly-stochastic matrix in relative entropy (Sinkhorn balancing).
inline Assignment probabilistic_match(const AffinityFactors& f, const MatcherConfig& cfg = {}) {
  cfg.validate();
  const Matrix m = f.product(Matrix::Ones(f.rows(), f.cols()));
  auto s = sinkhorn(m, cfg.pm_sinkhorn_iters, cfg.sinkhorn_tol);
  return finalize(f, std::move(s.matrix), s.converged, s.iterations);
}

}  // namespace vgreg
