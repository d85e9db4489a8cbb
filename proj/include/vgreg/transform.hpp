// transform.hpp - point-pair fits of similarity, affine and thin-plate
// spline transforms.
#pragma once

#include "core.hpp"

#include <Eigen/Dense>

namespace vgreg {

enum class TransformKind { similarity, affine, nonrigid_tps };

inline std::string_view transform_kind_name(TransformKind k) {
  switch (k) {
    case TransformKind::similarity: return "similarity";
    case TransformKind::affine: return "affine";
    case TransformKind::nonrigid_tps: return "tps";
  }
  return "?";
}

struct TransformEstimate {
  TransformKind kind = TransformKind::similarity;
  // similarity: linear = scale * rotation; affine: general 3x3
  Mat3 linear = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  double scale = 1.0;
  Mat3 rotation = Mat3::Identity();
  // tps: f(p) = linear p + translation + sum_k weights.row(k) * |p - controls[k]|
  std::vector<Vec3> controls;
  Eigen::MatrixX3d weights;
  double lambda = 0.0;

  [[nodiscard]] Vec3 operator()(const Vec3& p) const {
    Vec3 q = linear * p + translation;
    for (std::size_t k = 0; k < controls.size(); ++k)
      q += weights.row(static_cast<Eigen::Index>(k)).transpose() * (p - controls[k]).norm();
    return q;
  }
};

namespace detail {

inline void require_pairs(std::span<const Vec3> a, std::span<const Vec3> b, std::size_t minimum, const char* who) {
  if (a.size() != b.size()) throw ArgumentError(std::string(who) + ": point lists differ in length");
  if (a.size() < minimum)
    throw DegenerateError(std::string(who) + ": need at least " + std::to_string(minimum) + " pairs");
}

/// Singular values of the centred point set, descending.
inline Vec3 spread(std::span<const Vec3> pts) {
  Vec3 mean = Vec3::Zero();
  for (const auto& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  Mat3 cov = Mat3::Zero();
  for (const auto& p : pts) cov += (p - mean) * (p - mean).transpose();
  Vec3 ev = Eigen::SelfAdjointEigenSolver<Mat3>(cov, Eigen::EigenvaluesOnly).eigenvalues().cwiseMax(0.0);
  return {ev[2], ev[1], ev[0]};
}

}  // namespace detail

/// Least-squares scale * rotation + translation (Umeyama).
inline TransformEstimate fit_similarity(std::span<const Vec3> a, std::span<const Vec3> b) {
  detail::require_pairs(a, b, 3, "fit_similarity");
  const Vec3 sp = detail::spread(a);
  if (!(sp[1] > 1e-12 * sp[0])) throw DegenerateError("fit_similarity: points are collinear");
  const auto n = static_cast<double>(a.size());
  Vec3 ca = Vec3::Zero(), cb = Vec3::Zero();
  for (std::size_t k = 0; k < a.size(); ++k) {
    ca += a[k];
    cb += b[k];
  }
  ca /= n;
  cb /= n;
  Mat3 H = Mat3::Zero();
  double var_a = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    H += (b[k] - cb) * (a[k] - ca).transpose();
    var_a += (a[k] - ca).squaredNorm();
  }
  const Eigen::JacobiSVD<Mat3> svd(H, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 S = Mat3::Identity();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) S(2, 2) = -1.0;
  TransformEstimate t;
  t.kind = TransformKind::similarity;
  t.rotation = svd.matrixU() * S * svd.matrixV().transpose();
  t.scale = (svd.singularValues().asDiagonal() * S).trace() / var_a;
  if (!(t.scale > 0.0)) throw DegenerateError("fit_similarity: non-positive scale");
  t.linear = t.scale * t.rotation;
  t.translation = cb - t.linear * ca;
  return t;
}

/// Least-squares 3x3 matrix + translation.
inline TransformEstimate fit_affine(std::span<const Vec3> a, std::span<const Vec3> b) {
  detail::require_pairs(a, b, 4, "fit_affine");
  const Vec3 sp = detail::spread(a);
  if (!(sp[2] > 1e-12 * sp[0])) throw DegenerateError("fit_affine: points are coplanar");
  const auto n = static_cast<Eigen::Index>(a.size());
  Eigen::MatrixX4d P(n, 4);
  Eigen::MatrixX3d Y(n, 3);
  for (Eigen::Index k = 0; k < n; ++k) {
    P.row(k) << a[static_cast<std::size_t>(k)].transpose(), 1.0;
    Y.row(k) = b[static_cast<std::size_t>(k)].transpose();
  }
  const Eigen::Matrix<double, 4, 3> M = P.colPivHouseholderQr().solve(Y);
  TransformEstimate t;
  t.kind = TransformKind::affine;
  t.linear = M.topRows<3>().transpose();
  t.translation = M.row(3).transpose();
  return t;
}

/// Thin-plate spline in 3D (kernel U(r) = r) through the pairs, with
/// smoothing lambda * mean(U) added to the kernel diagonal. lambda = 0
/// interpolates.
inline TransformEstimate fit_tps(std::span<const Vec3> a, std::span<const Vec3> b, double lambda) {
  detail::require_pairs(a, b, 4, "fit_tps");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ArgumentError("fit_tps: lambda must be >= 0");
  const Vec3 sp = detail::spread(a);
  if (!(sp[2] > 1e-12 * sp[0])) throw DegenerateError("fit_tps: control points are coplanar");
  const auto n = static_cast<Eigen::Index>(a.size());
  Matrix L = Matrix::Zero(n + 4, n + 4);
  double mean_u = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const double u = (a[static_cast<std::size_t>(i)] - a[static_cast<std::size_t>(j)]).norm();
      L(i, j) = u;
      mean_u += u;
    }
  mean_u /= static_cast<double>(n * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    L(i, i) += lambda * mean_u;
    L.block<1, 3>(i, n) = a[static_cast<std::size_t>(i)].transpose();
    L(i, n + 3) = 1.0;
    L.block<3, 1>(n, i) = a[static_cast<std::size_t>(i)];
    L(n + 3, i) = 1.0;
  }
  Eigen::MatrixX3d Y = Eigen::MatrixX3d::Zero(n + 4, 3);
  for (Eigen::Index i = 0; i < n; ++i) Y.row(i) = b[static_cast<std::size_t>(i)].transpose();
  const Eigen::FullPivLU<Matrix> lu(L);
  if (!lu.isInvertible()) throw DegenerateError("fit_tps: singular system (repeated control points?)");
  const Eigen::MatrixX3d sol = lu.solve(Y);
  if (!sol.allFinite()) throw DegenerateError("fit_tps: non-finite solution");
  TransformEstimate t;
  t.kind = TransformKind::nonrigid_tps;
  t.controls.assign(a.begin(), a.end());
  t.weights = sol.topRows(n);
  t.linear = sol.middleRows(n, 3).transpose();
  t.translation = sol.row(n + 3).transpose();
  t.lambda = lambda;
  return t;
}

inline TransformEstimate estimate_transform(std::span<const Vec3> a, std::span<const Vec3> b, TransformKind kind,
                                            double tps_lambda = 0.05) {
  switch (kind) {
    case TransformKind::similarity: return fit_similarity(a, b);
    case TransformKind::affine: return fit_affine(a, b);
    case TransformKind::nonrigid_tps: return fit_tps(a, b, tps_lambda);
  }
  throw ArgumentError("estimate_transform: unknown kind");
}

}  // namespace vgreg
