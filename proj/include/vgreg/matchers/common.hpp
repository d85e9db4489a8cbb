// common.hpp - assignment type, solver configuration, optimal linear
// assignment and Sinkhorn balancing shared by every matcher.
#pragma once

#include "../affinity.hpp"

#include <algorithm>
#include <optional>
#include <string_view>

namespace vgreg {

inline constexpr std::size_t kUnassigned = std::numeric_limits<std::size_t>::max();

/// Row i of A -> column of B, or kUnassigned.
using Permutation = std::vector<std::size_t>;

struct Assignment {
  Matrix soft;               // non-negative relaxed solution, nA x nB
  Permutation permutation;   // discretized one-to-one map
  double objective = 0.0;    // J of the binary matrix induced by permutation
  bool converged = true;
  std::size_t iterations = 0;
  std::vector<double> trace; // solver-specific objective history

  [[nodiscard]] std::size_t assigned_count() const {
    return static_cast<std::size_t>(std::count_if(permutation.begin(), permutation.end(),
                                                  [](std::size_t c) { return c != kUnassigned; }));
  }
};

enum class Algorithm { GA, SM, SMAC, PM, IPFP_U, IPFP_SM, RRWM, FGM };

inline constexpr std::array<Algorithm, 8> kAllAlgorithms = {Algorithm::GA,     Algorithm::SM,     Algorithm::SMAC,
                                                           Algorithm::PM,     Algorithm::IPFP_U, Algorithm::IPFP_SM,
                                                           Algorithm::RRWM,   Algorithm::FGM};

inline constexpr std::array<Algorithm, 6> kRequiredAlgorithms = {Algorithm::GA,     Algorithm::SM,
                                                                Algorithm::IPFP_U, Algorithm::IPFP_SM,
                                                                Algorithm::RRWM,   Algorithm::FGM};

inline std::string_view algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::GA: return "GA";
    case Algorithm::SM: return "SM";
    case Algorithm::SMAC: return "SMAC";
    case Algorithm::PM: return "PM";
    case Algorithm::IPFP_U: return "IPFP-U";
    case Algorithm::IPFP_SM: return "IPFP-SM";
    case Algorithm::RRWM: return "RRWM";
    case Algorithm::FGM: return "FGM";
  }
  return "?";
}

inline Algorithm parse_algorithm(std::string_view s) {
  for (auto a : kAllAlgorithms)
    if (algorithm_name(a) == s) return a;
  if (s == "IPFP_U") return Algorithm::IPFP_U;
  if (s == "IPFP_SM") return Algorithm::IPFP_SM;
  throw ArgumentError("unknown algorithm '" + std::string(s) + "'");
}

struct MatcherConfig {
  Algorithm algorithm = Algorithm::FGM;

  // power iterations (SM, SMAC)
  std::size_t power_max_iters = 2000;
  double power_tol = 1e-10;

  // Sinkhorn balancing inside GA and RRWM
  std::size_t sinkhorn_iters = 30;
  double sinkhorn_tol = 1e-9;

  // graduated assignment
  double ga_beta0 = 0.5;
  double ga_rate = 1.075;
  double ga_beta_max = 200.0;
  std::size_t ga_inner_iters = 4;

  // IPFP
  std::size_t ipfp_max_iters = 100;

  // RRWM
  double rrwm_inflation = 30.0;
  double rrwm_jump = 0.8;  // weight of the reweighted jump in each step
  std::size_t rrwm_max_iters = 1000;
  double rrwm_tol = 1e-9;

  // PM
  std::size_t pm_sinkhorn_iters = 1000;

  // FGM
  double fgm_path_step = 0.1;
  std::size_t fgm_inner_iters = 50;
  double fgm_tol = 1e-9;

  // All solvers are deterministic; kept so runs can be labelled and replayed.
  std::uint64_t seed = 0;

  void validate() const {
    auto cap = [](std::size_t v, const char* name) {
      if (v < 1) throw ArgumentError(std::string("MatcherConfig: ") + name + " must be >= 1");
    };
    auto pos = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v)) throw ArgumentError(std::string("MatcherConfig: ") + name + " must be > 0");
    };
    cap(power_max_iters, "power_max_iters");
    cap(sinkhorn_iters, "sinkhorn_iters");
    cap(ga_inner_iters, "ga_inner_iters");
    cap(ipfp_max_iters, "ipfp_max_iters");
    cap(rrwm_max_iters, "rrwm_max_iters");
    cap(pm_sinkhorn_iters, "pm_sinkhorn_iters");
    cap(fgm_inner_iters, "fgm_inner_iters");
    pos(power_tol, "power_tol");
    pos(sinkhorn_tol, "sinkhorn_tol");
    pos(rrwm_tol, "rrwm_tol");
    pos(fgm_tol, "fgm_tol");
    pos(ga_beta0, "ga_beta0");
    pos(ga_beta_max, "ga_beta_max");
    pos(rrwm_inflation, "rrwm_inflation");
    if (!(ga_rate >= 1.0)) throw ArgumentError("MatcherConfig: ga_rate must be >= 1");
    if (!(rrwm_jump >= 0.0 && rrwm_jump <= 1.0)) throw ArgumentError("MatcherConfig: rrwm_jump must be in [0, 1]");
    if (!(fgm_path_step > 0.0 && fgm_path_step <= 1.0))
      throw ArgumentError("MatcherConfig: fgm_path_step must be in (0, 1]");
  }
};

// ---------------------------------------------------------------------------

inline Matrix permutation_matrix(const Permutation& p, Eigen::Index rows, Eigen::Index cols) {
  Matrix X = Matrix::Zero(rows, cols);
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] != kUnassigned) X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(p[i])) = 1.0;
  return X;
}

inline double qap_objective(const AffinityFactors& f, const Permutation& p) {
  if (p.size() != static_cast<std::size_t>(f.rows()))
    throw ArgumentError("qap_objective: permutation length does not match node count");
  return qap_objective(f, permutation_matrix(p, f.rows(), f.cols()));
}

inline bool is_injective(const Permutation& p, std::size_t cols) {
  std::vector<char> used(cols, 0);
  for (auto c : p) {
    if (c == kUnassigned) continue;
    if (c >= cols || used[c]) return false;
    used[c] = 1;
  }
  return true;
}

inline double linear_score(const Matrix& S, const Permutation& p) {
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] != kUnassigned) total += S(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(p[i]));
  return total;
}

// ---------------------------------------------------------------------------
// Optimal linear assignment

namespace detail {

/// Shortest-augmenting-path Hungarian method on a square cost matrix
/// (minimization). Returns row -> column and the final duals.
struct LapResult {
  std::vector<std::size_t> row_to_col;
  std::vector<double> u, v;
};

inline LapResult solve_lap(const Matrix& cost) {
  const auto n = static_cast<std::size_t>(cost.rows());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(static_cast<Eigen::Index>(i0 - 1), static_cast<Eigen::Index>(j - 1)) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  LapResult r;
  r.row_to_col.assign(n, 0);
  for (std::size_t j = 1; j <= n; ++j) r.row_to_col[p[j] - 1] = j - 1;
  r.u.assign(u.begin() + 1, u.end());
  r.v.assign(v.begin() + 1, v.end());
  return r;
}

/// Moves an optimal matching to the lexicographically smallest optimal one
/// by re-routing inside the subgraph of tight edges.
inline void lexicographic_optimum(const Matrix& cost, LapResult& r) {
  const auto n = r.row_to_col.size();
  const double eps = 1e-11 * (1.0 + cost.cwiseAbs().maxCoeff());
  auto tight = [&](std::size_t i, std::size_t j) {
    return cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) - r.u[i] - r.v[j] <= eps;
  };
  std::vector<std::size_t> col_to_row(n);
  for (std::size_t i = 0; i < n; ++i) col_to_row[r.row_to_col[i]] = i;
  std::vector<char> seen(n);

  // Alternating path in the tight subgraph from `row` to column `target`,
  // skipping column `avoid` and rows <= `fixed`. Applied only on success.
  std::size_t fixed = 0, avoid = 0, target = 0;
  auto dfs = [&](auto&& self, std::size_t row) -> bool {
    for (std::size_t c = 0; c < n; ++c) {
      if (c == avoid || seen[c] || !tight(row, c)) continue;
      seen[c] = 1;
      if (c == target || (col_to_row[c] > fixed && self(self, col_to_row[c]))) {
        r.row_to_col[row] = c;
        col_to_row[c] = row;
        return true;
      }
    }
    return false;
  };

  for (std::size_t row = 0; row < n; ++row) {
    const std::size_t current = r.row_to_col[row];
    for (std::size_t c = 0; c < current; ++c) {
      if (!tight(row, c)) continue;
      const std::size_t owner = col_to_row[c];
      if (owner < row) continue;
      fixed = row;
      avoid = c;
      target = current;
      std::fill(seen.begin(), seen.end(), 0);
      if (dfs(dfs, owner)) {
        r.row_to_col[row] = c;
        col_to_row[c] = row;
        break;
      }
    }
  }
}

}  // namespace detail

/// Injective assignment maximizing the total score. Rectangular inputs
/// assign min(rows, cols) pairs; among optimal assignments the
/// lexicographically smallest (row order) is returned.
inline Permutation hungarian(const Matrix& scores) {
  const auto rows = static_cast<std::size_t>(scores.rows());
  const auto cols = static_cast<std::size_t>(scores.cols());
  if (!scores.allFinite()) throw ArgumentError("hungarian: scores must be finite");
  if (rows == 0) return {};
  if (cols == 0) return Permutation(rows, kUnassigned);
  const auto n = static_cast<Eigen::Index>(std::max(rows, cols));
  Matrix cost = Matrix::Zero(n, n);
  cost.topLeftCorner(scores.rows(), scores.cols()) = -scores;
  auto lap = detail::solve_lap(cost);
  const auto before = lap.row_to_col;
  double total_before = 0.0;
  for (std::size_t i = 0; i < before.size(); ++i)
    total_before += cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(before[i]));
  detail::lexicographic_optimum(cost, lap);
  double total_after = 0.0;
  for (std::size_t i = 0; i < lap.row_to_col.size(); ++i)
    total_after += cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(lap.row_to_col[i]));
  if (total_after > total_before) lap.row_to_col = before;

  Permutation p(rows, kUnassigned);
  for (std::size_t i = 0; i < rows; ++i)
    if (lap.row_to_col[i] < cols) p[i] = lap.row_to_col[i];
  return p;
}

// ---------------------------------------------------------------------------
// Sinkhorn balancing

struct SinkhornResult {
  Matrix matrix;
  std::size_t iterations = 0;
  bool converged = false;
};

/// Alternating row/column scaling. Square inputs become doubly stochastic;
/// for rectangular inputs the shorter side sums to 1 and the longer side to
/// min/max. Inputs with an all-zero row or column are lifted by a small
/// constant first.
inline SinkhornResult sinkhorn(Matrix M, std::size_t iters = 1000, double tol = 1e-9) {
  if (M.size() == 0) return {M, 0, true};
  if (!M.allFinite() || M.minCoeff() < 0.0) throw ArgumentError("sinkhorn: matrix must be finite and non-negative");
  const double top = M.maxCoeff();
  if ((M.rowwise().sum().array() <= 0.0).any() || (M.colwise().sum().array() <= 0.0).any())
    M.array() += 1e-12 * std::max(top, 1.0);
  const auto r = static_cast<double>(M.rows()), c = static_cast<double>(M.cols());
  const double row_target = r <= c ? 1.0 : c / r;
  const double col_target = c <= r ? 1.0 : r / c;
  SinkhornResult out;
  for (std::size_t it = 0; it < iters; ++it) {
    const Eigen::VectorXd rs = M.rowwise().sum();
    M.array().colwise() *= (row_target / rs.array());
    const Eigen::RowVectorXd cs = M.colwise().sum();
    M.array().rowwise() *= (col_target / cs.array());
    out.iterations = it + 1;
    const double err = (M.rowwise().sum().array() - row_target).abs().maxCoeff();
    if (err <= tol) {
      out.converged = true;
      break;
    }
  }
  out.matrix = std::move(M);
  return out;
}

inline Matrix sinkhorn_normalize(const Matrix& M, std::size_t iters = 1000, double tol = 1e-9) {
  return sinkhorn(M, iters, tol).matrix;
}

/// Sinkhorn balancing of exp(L) carried out on log potentials, so entries
/// far below the maximum never underflow to an all-zero row or column.
inline SinkhornResult sinkhorn_log(const Matrix& L, std::size_t iters = 1000, double tol = 1e-9) {
  if (L.size() == 0) return {L, 0, true};
  if (!L.allFinite()) throw ArgumentError("sinkhorn_log: log matrix must be finite");
  const auto r = static_cast<double>(L.rows()), c = static_cast<double>(L.cols());
  const double log_row = std::log(r <= c ? 1.0 : c / r);
  const double log_col = std::log(c <= r ? 1.0 : r / c);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(L.rows());
  Eigen::RowVectorXd v = Eigen::RowVectorXd::Zero(L.cols());
  auto lse_rows = [&](Eigen::VectorXd& out) {
    for (Eigen::Index i = 0; i < L.rows(); ++i) {
      const Eigen::RowVectorXd t = L.row(i) + v;
      const double m = t.maxCoeff();
      out[i] = m + std::log((t.array() - m).exp().sum());
    }
  };
  SinkhornResult out;
  Eigen::VectorXd rl(L.rows());
  for (std::size_t it = 0; it < iters; ++it) {
    lse_rows(rl);
    u = log_row - rl.array();
    for (Eigen::Index j = 0; j < L.cols(); ++j) {
      const Eigen::VectorXd t = L.col(j) + u;
      const double m = t.maxCoeff();
      v[j] = log_col - (m + std::log((t.array() - m).exp().sum()));
    }
    out.iterations = it + 1;
    lse_rows(rl);
    const double err = ((rl.array() + u.array()).exp() - std::exp(log_row)).abs().maxCoeff();
    if (err <= tol) {
      out.converged = true;
      break;
    }
  }
  out.matrix = ((L.colwise() + u).rowwise() + v).array().exp().matrix();
  return out;
}

// ---------------------------------------------------------------------------

/// Clamps the relaxed solution to a non-negative finite matrix, discretizes
/// it and evaluates J on the discrete solution.
inline Assignment finalize(const AffinityFactors& f, Matrix soft, bool converged, std::size_t iterations) {
  for (Eigen::Index k = 0; k < soft.size(); ++k) {
    double& x = soft.data()[k];
    if (!std::isfinite(x) || x < 0.0) x = 0.0;
  }
  Assignment a;
  a.permutation = hungarian(soft);
  a.soft = std::move(soft);
  a.objective = qap_objective(f, a.permutation);
  a.converged = converged;
  a.iterations = iterations;
  return a;
}

inline Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols) {
  return Matrix::Constant(rows, cols, 1.0 / static_cast<double>(std::max(rows, cols)));
}

}  // namespace vgreg
