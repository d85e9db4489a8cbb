// ipfp.hpp - integer projected fixed point.
#pragma once

#include "spectral.hpp"

namespace vgreg {

namespace detail {

inline bool is_permutation_matrix(const Matrix& X) {
  for (Eigen::Index k = 0; k < X.size(); ++k)
    if (X.data()[k] != 0.0 && X.data()[k] != 1.0) return false;
  const auto lim = std::min(X.rows(), X.cols());
  return (X.rowwise().sum().array() <= 1.0).all() && (X.colwise().sum().array() <= 1.0).all() && X.sum() == lim;
}

inline Permutation permutation_of(const Matrix& X) {
  Permutation p(static_cast<std::size_t>(X.rows()), kUnassigned);
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    for (Eigen::Index j = 0; j < X.cols(); ++j)
      if (X(i, j) == 1.0) p[static_cast<std::size_t>(i)] = static_cast<std::size_t>(j);
  return p;
}

}  // namespace detail

/// From the current point x: b = argmax over permutations of <K x, b>,
/// then the exact maximizer of J on the segment [x, b]. Stops once b
/// repeats. The returned permutation is the best discrete b visited (or
/// the init when it is itself a permutation and never beaten); `trace`
/// holds J at each accepted discrete point and is non-decreasing.
inline Assignment ipfp(const AffinityFactors& f, const Matrix& init, const MatcherConfig& cfg = {}) {
  cfg.validate();
  f.check_shape(init);
  if (!init.allFinite() || init.minCoeff() < 0.0) throw ArgumentError("ipfp: init must be finite and non-negative");

  Matrix x = init;
  Permutation best;
  double best_j = -std::numeric_limits<double>::infinity();
  Assignment out;
  if (detail::is_permutation_matrix(init)) {
    best = detail::permutation_of(init);
    best_j = qap_objective(f, best);
    out.trace.push_back(best_j);
  }

  Permutation prev_b;
  bool converged = false;
  std::size_t it = 0;
  for (; it < cfg.ipfp_max_iters; ++it) {
    const Matrix Kx = f.product(x);
    Permutation b = hungarian(Kx);
    if (b == prev_b) {
      converged = true;
      break;
    }
    const Matrix B = permutation_matrix(b, f.rows(), f.cols());
    const double jb = qap_objective(f, B);
    if (jb > best_j) {
      best = b;
      best_j = jb;
      out.trace.push_back(jb);
    }
    const Matrix d = B - x;
    const double C = (Kx.array() * d.array()).sum();  // x^T K d
    const double D = f.objective(d);                  // d^T K d
    double t = 1.0;
    if (D < 0.0) t = std::clamp(-C / D, 0.0, 1.0);
    x += t * d;
    prev_b = std::move(b);
  }

  out.permutation = std::move(best);
  out.objective = qap_objective(f, out.permutation);
  out.soft = x.cwiseMax(0.0);
  out.converged = converged;
  out.iterations = it;
  return out;
}

/// IPFP from the uniform matrix.
inline Assignment ipfp_u(const AffinityFactors& f, const MatcherConfig& cfg = {}) {
  return ipfp(f, uniform_matrix(f.rows(), f.cols()), cfg);
}

/// IPFP from the spectral solution, rescaled to the mass of a full
/// assignment.
inline Assignment ipfp_sm(const AffinityFactors& f, const MatcherConfig& cfg = {}) {
  Matrix x = spectral_match(f, cfg).soft;
  const double s = x.sum();
  const auto mass = static_cast<double>(std::min(f.rows(), f.cols()));
  if (s > 0.0) x *= mass / s;
  else x = uniform_matrix(f.rows(), f.cols());
  return ipfp(f, x, cfg);
}

}  // namespace vgreg
