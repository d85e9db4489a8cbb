// rrwm.hpp - reweighted random walk matching.
#pragma once

#include "spectral.hpp"

namespace vgreg {

/// Random walk on the association graph with transition K / d_max. Each step
/// mixes the walk result with a reweighting jump
///   y = sinkhorn(exp(inflation * x / max x))
/// as (1 - jump) * walk + jump * y, renormalized to unit mass.
inline Assignment rrwm(const AffinityFactors& f, const MatcherConfig& cfg = {}) {
  cfg.validate();
  const double dmax = detail::max_degree(f);
  if (!(dmax > 0.0)) throw ArgumentError("rrwm: affinity has no positive entries");
  Matrix x = Matrix::Constant(f.rows(), f.cols(), 1.0 / static_cast<double>(f.rows() * f.cols()));
  bool converged = false;
  std::size_t it = 0;
  for (; it < cfg.rrwm_max_iters; ++it) {
    Matrix walk = f.product(x) / dmax;
    Matrix next = walk;
    if (cfg.rrwm_jump > 0.0) {
      const double top = walk.maxCoeff();
      Matrix y = (cfg.rrwm_inflation * (walk.array() / top - 1.0)).exp().matrix();
      y = sinkhorn(y, cfg.sinkhorn_iters, cfg.sinkhorn_tol).matrix;
      y /= y.sum();
      next = (1.0 - cfg.rrwm_jump) * walk / walk.sum() + cfg.rrwm_jump * y;
    }
    next /= next.sum();
    const double change = (next - x).cwiseAbs().sum();
    x = std::move(next);
    if (change < cfg.rrwm_tol) {
      converged = true;
      ++it;
      break;
    }
  }
  return finalize(f, std::move(x), converged, it);
}

}  // namespace vgreg
