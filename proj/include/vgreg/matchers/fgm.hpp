// fgm.hpp - factorized graph matching: path following from a concave to a
// convex relaxation of J over the doubly-stochastic polytope.
//
// With Ke = U S V^T and, for each factor c, the symmetric node x node
// matrices A1_c(i, m) = sqrt(s_c) U(v_im, c), A2_c(j, l) = sqrt(s_c) V(w_jl, c),
// the edge term is E(X) = sum_c <X^T A1_c, A2_c X^T>. With
//   R(X) = 1/2 sum_c (|X^T A1_c|^2 + |A2_c X^T|^2)
//        = 1/2 (tr(X^T M1 X) + tr(X M2 X^T)),  M1 = sum A1_c A1_c^T, M2 = sum A2_c^T A2_c,
// which is constant on permutation matrices,
//   F_lo(X) = L(X) + E(X) - R(X) = L(X) - 1/2 sum_c |X^T A1_c - A2_c X^T|^2   (concave)
//   F_hi(X) = L(X) + E(X) + R(X) = L(X) + 1/2 sum_c |X^T A1_c + A2_c X^T|^2   (convex)
// and F_g = (1 - g) F_lo + g F_hi = L + E + (2g - 1) R, L(X) = <Kn, X>.
// Both agree with J up to the constant tr(M1) + tr(M2) on permutations.
#pragma once

#include "common.hpp"

#include <Eigen/SVD>

namespace vgreg {

namespace detail {

/// M(i, k) = sum over nodes m adjacent to both i and k of Q(v_im, v_km).
inline Matrix fold_edge_gram(const Matrix& Q, const EdgeEnds& ends, Eigen::Index n) {
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> inc(static_cast<std::size_t>(n));
  for (std::size_t e = 0; e < ends.size(); ++e) {
    inc[ends[e][0]].emplace_back(ends[e][1], e);
    inc[ends[e][1]].emplace_back(ends[e][0], e);
  }
  Matrix M = Matrix::Zero(n, n);
  for (const auto& around : inc)
    for (const auto& [i, v] : around)
      for (const auto& [k, w] : around)
        M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) +=
            Q(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(w));
  return M;
}

struct FgmModel {
  AffinityFactors f;  // padded to square
  Matrix M1, M2;

  [[nodiscard]] double R(const Matrix& X) const {
    return 0.5 * ((X.array() * (M1 * X).array()).sum() + (X.array() * (X * M2).array()).sum());
  }
  [[nodiscard]] double F(const Matrix& X, double s) const {
    return (f.Kn.array() * X.array()).sum() + f.edge_objective(X) + s * R(X);
  }
  [[nodiscard]] Matrix grad(const Matrix& X, double s) const {
    Matrix G = f.Kn + 2.0 * f.edge_product(X);
    G.noalias() += s * (M1 * X);
    G.noalias() += s * (X * M2);
    return G;
  }
};

inline FgmModel fgm_model(const AffinityFactors& f) {
  const Eigen::Index n = std::max(f.rows(), f.cols());
  FgmModel m;
  m.f.Kn = Matrix::Zero(n, n);
  m.f.Kn.topLeftCorner(f.rows(), f.cols()) = f.Kn;
  m.f.Ke = f.Ke;
  m.f.edgesA = f.edgesA;
  m.f.edgesB = f.edgesB;
  if (f.Ke.size() == 0) {
    m.M1 = m.M2 = Matrix::Zero(n, n);
    return m;
  }
  const Eigen::BDCSVD<Matrix> svd(f.Ke, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd s = svd.singularValues();
  const Matrix Q1 = svd.matrixU() * s.asDiagonal() * svd.matrixU().transpose();
  const Matrix Q2 = svd.matrixV() * s.asDiagonal() * svd.matrixV().transpose();
  m.M1 = fold_edge_gram(Q1, f.edgesA, n);
  m.M2 = fold_edge_gram(Q2, f.edgesB, n);
  return m;
}

}  // namespace detail

struct FgmStart {
  std::optional<Matrix> init;   // nA x nB, defaults to uniform
  std::optional<double> gamma;  // run a single stage at this gamma
};

/// Frank-Wolfe (linear assignment direction, exact line search) on F_g for
/// g = 0, step, ..., 1, warm-started. `trace` holds F at the end of each
/// stage; the result is the discretization of the last stage, flagged
/// unconverged when that stage hit the iteration cap.
inline Assignment fgm(const AffinityFactors& f, const MatcherConfig& cfg = {}, const FgmStart& start = {}) {
  cfg.validate();
  const auto model = detail::fgm_model(f);
  const Eigen::Index n = model.f.Kn.rows();

  Matrix X = Matrix::Constant(n, n, 1.0 / static_cast<double>(n));
  if (start.init) {
    f.check_shape(*start.init);
    X.setZero();
    X.topLeftCorner(f.rows(), f.cols()) = *start.init;
  }

  std::vector<double> gammas;
  if (start.gamma) {
    if (!(*start.gamma >= 0.0 && *start.gamma <= 1.0)) throw ArgumentError("fgm: gamma must be in [0, 1]");
    gammas.push_back(*start.gamma);
  } else {
    const auto steps = static_cast<std::size_t>(std::ceil(1.0 / cfg.fgm_path_step - 1e-9));
    for (std::size_t k = 0; k <= steps; ++k)
      gammas.push_back(std::min(1.0, static_cast<double>(k) * cfg.fgm_path_step));
  }

  Assignment out;
  bool last_converged = true;
  std::size_t total = 0;
  for (double gamma : gammas) {
    const double s = 2.0 * gamma - 1.0;
    bool converged = false;
    for (std::size_t it = 0; it < cfg.fgm_inner_iters; ++it) {
      ++total;
      const Matrix G = model.grad(X, s);
      const Matrix Y = permutation_matrix(hungarian(G), n, n);
      const Matrix D = Y - X;
      const double g = (G.array() * D.array()).sum();
      if (g <= cfg.fgm_tol * std::max(1.0, std::abs(model.F(X, s)))) {
        converged = true;
        break;
      }
      const double q = model.f.edge_objective(D) + s * model.R(D);
      const double t = q >= 0.0 ? 1.0 : std::min(1.0, -g / (2.0 * q));
      X += t * D;
    }
    last_converged = converged;
    out.trace.push_back(model.F(X, s));
  }

  Matrix soft = X.topLeftCorner(f.rows(), f.cols()).cwiseMax(0.0);
  auto result = finalize(f, std::move(soft), last_converged, total);
  result.trace = std::move(out.trace);
  return result;
}

}  // namespace vgreg
