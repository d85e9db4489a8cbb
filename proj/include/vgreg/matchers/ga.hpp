// ga.hpp - graduated assignment (softassign with deterministic annealing).
#pragma once

#include "common.hpp"

namespace vgreg {

/// One softassign step at inverse temperature beta:
/// sinkhorn(exp(beta * grad J(X))), grad J(X) = 2 K vec(X).
inline Matrix softassign_step(const AffinityFactors& f, const Matrix& X, double beta, std::size_t sinkhorn_iters,
                              double sinkhorn_tol) {
  const Matrix Q = 2.0 * f.product(X);
  return sinkhorn_log(beta * Q, sinkhorn_iters, sinkhorn_tol).matrix;
}

/// beta runs geometrically from ga_beta0 to ga_beta_max (a single step when
/// ga_rate is 1), with ga_inner_iters softassign steps per temperature.
inline Assignment graduated_assignment(const AffinityFactors& f, const MatcherConfig& cfg = {}) {
  cfg.validate();
  Matrix X = uniform_matrix(f.rows(), f.cols());
  std::size_t steps = 0;
  bool settled = false;
  for (double beta = cfg.ga_beta0;; beta *= cfg.ga_rate) {
    for (std::size_t k = 0; k < cfg.ga_inner_iters; ++k) {
      Matrix next = softassign_step(f, X, beta, cfg.sinkhorn_iters, cfg.sinkhorn_tol);
      const double change = (next - X).cwiseAbs().sum();
      X = std::move(next);
      ++steps;
      settled = change <= cfg.sinkhorn_tol * static_cast<double>(X.size());
      if (settled) break;
    }
    if (cfg.ga_rate == 1.0 || beta * cfg.ga_rate > cfg.ga_beta_max) break;
  }
  return finalize(f, std::move(X), true, steps);
}

}  // namespace vgreg
