#include <vgreg/synth.hpp>
#include <vgreg/affinity.hpp>

#include <gtest/gtest.h>

#include <cmath>

using namespace vgreg;

namespace {

double point_segment(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 d = b - a;
  const double l2 = d.squaredNorm();
  if (l2 == 0.0) return (p - a).norm();
  const double t = std::clamp((p - a).dot(d) / l2, 0.0, 1.0);
  return (p - (a + t * d)).norm();
}

double directed_oracle(const Polyline& pts, const Polyline& curve) {
  double sum = 0.0;
  for (const auto& p : pts) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < curve.size(); ++k) best = std::min(best, point_segment(p, curve[k - 1], curve[k]));
    sum += best;
  }
  return sum / static_cast<double>(pts.size());
}

double asd_oracle(const Polyline& a, const Polyline& b) { return 0.5 * (directed_oracle(a, b) + directed_oracle(b, a)); }

Polyline random_polyline(Rng& rng, std::size_t n) {
  Polyline p{Vec3(rng.uniform(0, 10), rng.uniform(0, 10), rng.uniform(0, 10))};
  while (p.size() < n) p.push_back(p.back() + Vec3(rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3)));
  return p;
}

// Small random graph with bent three-point paths.
SpatialGraph random_graph(std::size_t n, double density, std::uint64_t seed) {
  Rng rng(seed, 5);
  std::vector<Node> nodes(n);
  for (auto& x : nodes) x.coord = Vec3(rng.uniform(0, 20), rng.uniform(0, 20), rng.uniform(0, 20));
  std::vector<Edge> edges;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b) {
      if (rng.uniform() > density) continue;
      const Vec3 mid = 0.5 * (nodes[a].coord + nodes[b].coord) + Vec3(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2));
      edges.push_back(make_edge(a, b, {nodes[a].coord, mid, nodes[b].coord}, rng.uniform(1, 10)));
    }
  return SpatialGraph(nodes, edges);
}

Eigen::VectorXd vec(const Matrix& X) { return Eigen::Map<const Eigen::VectorXd>(X.data(), X.size()); }

Matrix random_binary(Rng& rng, Eigen::Index r, Eigen::Index c) {
  Matrix X(r, c);
  for (Eigen::Index k = 0; k < X.size(); ++k) X.data()[k] = rng.uniform() < 0.4 ? 1.0 : 0.0;
  return X;
}

}  // namespace

// ---------------------------------------------------------------------------
// average symmetric distance

TEST(AverageSymmetricDistance, IdenticalIsZero) {
  Rng rng(1);
  const auto p = random_polyline(rng, 12);
  EXPECT_NEAR(average_symmetric_distance(p, p), 0.0, 1e-12);
}

TEST(AverageSymmetricDistance, ParallelOffset) {
  const Polyline a{Vec3(0, 0, 0), Vec3(5, 0, 0), Vec3(10, 0, 0)};
  const Polyline b{Vec3(0, 3, 0), Vec3(10, 3, 0)};
  EXPECT_NEAR(average_symmetric_distance(a, b), 3.0, 1e-12);
}

TEST(AverageSymmetricDistance, MatchesBruteForceOracle) {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = random_polyline(rng, 20), b = random_polyline(rng, 20);
    const double v = average_symmetric_distance(a, b);
    EXPECT_NEAR(v, asd_oracle(a, b), 1e-12 * std::max(1.0, v));
    EXPECT_NEAR(v, average_symmetric_distance(b, a), 1e-12 * std::max(1.0, v));
  }
}

TEST(AverageSymmetricDistance, DegenerateInputs) {
  EXPECT_THROW(average_symmetric_distance(Polyline{Vec3::Zero()}, Polyline{Vec3::Zero(), Vec3::Ones()}), DegenerateError);
  EXPECT_THROW(average_symmetric_distance(Polyline{Vec3::Zero(), Vec3::Zero()}, Polyline{Vec3::Zero(), Vec3::Ones()}),
               DegenerateError);
}

// ---------------------------------------------------------------------------
// distance matrices

TEST(DistanceMatrices, SelfDistanceDiagonalsVanish) {
  const auto g = random_graph(8, 0.5, 3);
  const auto dm = distance_matrices(g, g);
  for (Eigen::Index i = 0; i < dm.C.rows(); ++i) {
    EXPECT_EQ(dm.C(i, i), 0.0);
    EXPECT_EQ(dm.D(i, i), 0.0);
  }
  for (Eigen::Index v = 0; v < dm.P.rows(); ++v) {
    EXPECT_NEAR(dm.P(v, v), 0.0, 1e-12);
    EXPECT_EQ(dm.L(v, v), 0.0);
    EXPECT_EQ(dm.U(v, v), 0.0);
  }
}

TEST(DistanceMatrices, SingleNodes) {
  std::vector<Node> a(1), b(1);
  b[0].coord = Vec3(0, 7, 0);
  const auto dm = distance_matrices(SpatialGraph(a, {}), SpatialGraph(b, {}));
  ASSERT_EQ(dm.C.size(), 1);
  EXPECT_EQ(dm.C(0, 0), 7.0);
  EXPECT_EQ(dm.P.size(), 0);
}

TEST(DistanceMatrices, SyntheticPairMatchesDoubleLoop) {
  const auto A = synthetic_gvg(1), B = synthetic_gvg(2);
  const auto dm = distance_matrices(A, B);
  for (std::size_t i = 0; i < A.node_count(); ++i)
    for (std::size_t j = 0; j < B.node_count(); ++j) {
      ASSERT_EQ(dm.C(i, j), (A.node(i).coord - B.node(j).coord).norm());
      ASSERT_EQ(dm.D(i, j), std::abs(A.node(i).degree_geo - B.node(j).degree_geo));
    }
  for (std::size_t v = 0; v < A.edge_count(); ++v)
    for (std::size_t w = 0; w < B.edge_count(); ++w) {
      ASSERT_EQ(dm.L(v, w), std::abs(A.edges()[v].length - B.edges()[w].length));
      ASSERT_EQ(dm.U(v, w), std::abs(A.edges()[v].energy - B.edges()[w].energy));
    }
  // P on a deterministic sample of entries against resample + brute force
  Rng rng(4);
  for (int k = 0; k < 400; ++k) {
    const auto v = rng.index(A.edge_count()), w = rng.index(B.edge_count());
    const auto pa = polyline_resample(A.edges()[v].path, 50).points;
    const auto pb = polyline_resample(B.edges()[w].path, 50).points;
    const double expect = asd_oracle(pa, pb);
    ASSERT_NEAR(dm.P(v, w), expect, 1e-12 * std::max(1.0, expect)) << v << "," << w;
  }
}

TEST(DistanceMatrices, SwappingGraphsTransposes) {
  const auto A = random_graph(6, 0.6, 5), B = random_graph(7, 0.5, 6);
  const auto ab = distance_matrices(A, B), ba = distance_matrices(B, A);
  EXPECT_EQ(ab.C.transpose(), ba.C);
  EXPECT_EQ(ab.D.transpose(), ba.D);
  EXPECT_EQ(ab.L.transpose(), ba.L);
  EXPECT_EQ(ab.U.transpose(), ba.U);
  EXPECT_LE((ab.P.transpose() - ba.P).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(DistanceMatrices, EntriesFiniteAndNonNegative) {
  const auto dm = distance_matrices(random_graph(7, 0.5, 8), random_graph(6, 0.6, 9));
  for (const Matrix* M : {&dm.C, &dm.D, &dm.P, &dm.L, &dm.U}) {
    EXPECT_TRUE(M->allFinite());
    if (M->size()) {
      EXPECT_GE(M->minCoeff(), 0.0);
    }
  }
}

TEST(DistanceMatrices, IsometryLeavesCAndPUnchanged) {
  const auto A = random_graph(6, 0.6, 10), B = random_graph(6, 0.6, 11);
  const Mat3 R = Eigen::AngleAxisd(0.7, Vec3(1, 2, 3).normalized()).toRotationMatrix();
  const Vec3 t(3, -4, 5);
  auto move = [&](const SpatialGraph& g) {
    auto nodes = g.nodes();
    for (auto& n : nodes) n.coord = R * n.coord + t;
    auto edges = g.edges();
    for (auto& e : edges)
      for (auto& p : e.path) p = R * p + t;
    return SpatialGraph(nodes, edges);
  };
  const auto d0 = distance_matrices(A, B), d1 = distance_matrices(move(A), move(B));
  EXPECT_LE((d0.C - d1.C).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LE((d0.P - d1.P).cwiseAbs().maxCoeff(), 1e-10);
}

// ---------------------------------------------------------------------------
// normalization

TEST(NormalizationStats, TwoPointStd) {
  DistanceMatrices dm;
  dm.C = Matrix{{0, 1}, {3, 0}};
  dm.D = dm.P = dm.L = dm.U = dm.C;
  const auto s = normalization_stats(dm);
  EXPECT_DOUBLE_EQ(s.sigma_C, 1.0);
  EXPECT_DOUBLE_EQ(s.sigma_U, 1.0);
}

TEST(NormalizationStats, ConstantEntriesHitFloor) {
  DistanceMatrices dm;
  dm.C = Matrix::Constant(3, 3, 2.0);
  dm.D = dm.P = dm.L = dm.U = dm.C;
  const auto s = normalization_stats(dm);
  EXPECT_EQ(s.sigma_C, NormalizationStats::kFloor);
  EXPECT_EQ(s.sigma_P, NormalizationStats::kFloor);
}

TEST(NormalizationStats, PopulationMatchesWelfordOracle) {
  std::vector<SpatialGraph> graphs;
  for (std::uint64_t s = 1; s <= 10; ++s) graphs.push_back(synthetic_gvg(s, 20));
  std::vector<DistanceMatrices> pop;
  for (std::size_t k = 1; k < graphs.size(); ++k) pop.push_back(distance_matrices(graphs[0], graphs[k]));
  const auto s = normalization_stats(pop);
  auto welford = [&](auto pick) {
    double mean = 0.0, m2 = 0.0;
    std::size_t n = 0;
    for (const auto& dm : pop) {
      const Matrix& M = pick(dm);
      for (Eigen::Index r = 0; r < M.rows(); ++r)
        for (Eigen::Index c = 0; c < M.cols(); ++c) {
          if (r == c) continue;
          ++n;
          const double d = M(r, c) - mean;
          mean += d / static_cast<double>(n);
          m2 += d * (M(r, c) - mean);
        }
    }
    return std::sqrt(m2 / static_cast<double>(n));
  };
  EXPECT_NEAR(s.sigma_C, welford([](const auto& m) -> const Matrix& { return m.C; }), 1e-9 * s.sigma_C);
  EXPECT_NEAR(s.sigma_D, welford([](const auto& m) -> const Matrix& { return m.D; }), 1e-9 * s.sigma_D);
  EXPECT_NEAR(s.sigma_P, welford([](const auto& m) -> const Matrix& { return m.P; }), 1e-9 * s.sigma_P);
  EXPECT_NEAR(s.sigma_L, welford([](const auto& m) -> const Matrix& { return m.L; }), 1e-9 * s.sigma_L);
  EXPECT_NEAR(s.sigma_U, welford([](const auto& m) -> const Matrix& { return m.U; }), 1e-9 * s.sigma_U);
  EXPECT_THROW(normalization_stats(std::span<const DistanceMatrices>{}), ArgumentError);
}

// ---------------------------------------------------------------------------
// weights and kernels

TEST(AffinityWeights, SimplexValidation) {
  AffinityWeights w;
  EXPECT_NO_THROW(w.validate());
  w.alpha = {0.6, 0.5};
  EXPECT_THROW(w.validate(), ArgumentError);
  w.alpha = {1.2, -0.2};
  EXPECT_THROW(w.validate(), ArgumentError);
  w.alpha = {1.0, 0.0};
  EXPECT_NO_THROW(w.validate());
  w.beta = {0.3, 0.3, 0.3};
  EXPECT_THROW(w.validate(), ArgumentError);
  w.beta = {0.5, 0.5 + 1e-13, 0.0};
  EXPECT_NO_THROW(w.validate());
  w.beta = {0.5, 0.5 + 1e-11, 0.0};
  EXPECT_THROW(w.validate(), ArgumentError);
}

TEST(NodeAffinity, ClosedFormValues) {
  DistanceMatrices dm;
  dm.C = Matrix{{0.0, 4.0}};
  dm.D = Matrix{{0.0, 6.0}};
  NormalizationStats s;
  s.sigma_C = 2.0;
  s.sigma_D = 3.0;
  const auto K = node_affinity(dm, {}, s);
  EXPECT_EQ(K(0, 0), 1.0);
  EXPECT_NEAR(K(0, 1), std::exp(-2.0), 1e-15);
  EXPECT_NEAR(K(0, 1), 0.13534, 1e-5);
}

TEST(EdgeAffinity, ClosedFormValues) {
  DistanceMatrices dm;
  dm.P = Matrix{{0.0, 2.0}};
  dm.L = Matrix{{0.0, 3.0}};
  dm.U = Matrix{{0.0, 5.0}};
  NormalizationStats s;
  s.sigma_P = 2.0;
  s.sigma_L = 3.0;
  s.sigma_U = 5.0;
  const auto K = edge_affinity(dm, {}, s);
  EXPECT_EQ(K(0, 0), 1.0);
  EXPECT_NEAR(K(0, 1), std::exp(-1.0), 1e-15);
  EXPECT_NEAR(K(0, 1), 0.36788, 1e-5);
}

TEST(Affinity, PerEntryScalarOracle) {
  Rng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    DistanceMatrices dm;
    auto rnd = [&](int r, int c) {
      Matrix M(r, c);
      for (Eigen::Index k = 0; k < M.size(); ++k) M.data()[k] = rng.uniform(0, 10);
      return M;
    };
    dm.C = rnd(4, 5);
    dm.D = rnd(4, 5);
    dm.P = rnd(6, 7);
    dm.L = rnd(6, 7);
    dm.U = rnd(6, 7);
    AffinityWeights w;
    const double a = rng.uniform();
    w.alpha = {a, 1.0 - a};
    const double b1 = rng.uniform(0, 0.5), b2 = rng.uniform(0, 0.5);
    w.beta = {b1, b2, 1.0 - b1 - b2};
    NormalizationStats s{};
    s.sigma_C = rng.uniform(1, 3);
    s.sigma_D = rng.uniform(1, 3);
    s.sigma_P = rng.uniform(1, 3);
    s.sigma_L = rng.uniform(1, 3);
    s.sigma_U = rng.uniform(1, 3);
    const auto Kn = node_affinity(dm, w, s);
    const auto Ke = edge_affinity(dm, w, s);
    for (Eigen::Index i = 0; i < 4; ++i)
      for (Eigen::Index j = 0; j < 5; ++j) {
        const double expect = std::exp(-(w.alpha[0] * dm.C(i, j) / s.sigma_C + w.alpha[1] * dm.D(i, j) / s.sigma_D));
        EXPECT_NEAR(Kn(i, j), expect, 1e-15);
        EXPECT_GT(Kn(i, j), 0.0);
        EXPECT_LE(Kn(i, j), 1.0);
      }
    for (Eigen::Index v = 0; v < 6; ++v)
      for (Eigen::Index u = 0; u < 7; ++u) {
        const double expect = std::exp(-(w.beta[0] * dm.P(v, u) / s.sigma_P + w.beta[1] * dm.L(v, u) / s.sigma_L +
                                         w.beta[2] * dm.U(v, u) / s.sigma_U));
        EXPECT_NEAR(Ke(v, u), expect, 1e-15);
        EXPECT_GT(Ke(v, u), 0.0);
        EXPECT_LE(Ke(v, u), 1.0);
      }
  }
}

TEST(Affinity, EntriesStayPositiveForHugeDistances) {
  DistanceMatrices dm;
  dm.C = Matrix::Constant(1, 1, 1e6);
  dm.D = Matrix::Constant(1, 1, 1e6);
  const auto K = node_affinity(dm, {}, {});
  EXPECT_GT(K(0, 0), 0.0);
}

TEST(Affinity, OneOnlyForZeroDistances) {
  const auto A = random_graph(6, 0.6, 20), B = random_graph(6, 0.6, 21);
  const auto dm = distance_matrices(A, B);
  const auto s = normalization_stats(dm);
  const auto Kn = node_affinity(dm, {}, s);
  for (Eigen::Index k = 0; k < Kn.size(); ++k)
    EXPECT_EQ(Kn.data()[k] == 1.0, dm.C.data()[k] == 0.0 && dm.D.data()[k] == 0.0);
}

TEST(Affinity, ZeroWeightMakesKernelIgnoreTheDistance) {
  const auto A = random_graph(6, 0.6, 22), B = random_graph(6, 0.6, 23);
  auto dm = distance_matrices(A, B);
  const auto s = normalization_stats(dm);
  AffinityWeights w;
  w.alpha = {1.0, 0.0};
  w.beta = {1.0, 0.0, 0.0};
  const auto Kn = node_affinity(dm, w, s);
  const auto Ke = edge_affinity(dm, w, s);
  auto changed = dm;
  changed.D.array() += 5.0;
  changed.L.array() *= 3.0;
  changed.U.array() += 1.0;
  EXPECT_EQ(node_affinity(changed, w, s), Kn);
  EXPECT_EQ(edge_affinity(changed, w, s), Ke);
  w.beta = {0.0, 0.0, 1.0};
  const auto Ku = edge_affinity(dm, w, s);
  auto moved = dm;
  moved.P.array() += 2.0;
  moved.L.array() += 2.0;
  EXPECT_EQ(edge_affinity(moved, w, s), Ku);
}

TEST(Affinity, StrictlyDecreasingInEachDistance) {
  DistanceMatrices dm;
  dm.C = Matrix::Constant(1, 1, 1.0);
  dm.D = Matrix::Constant(1, 1, 1.0);
  dm.P = dm.L = dm.U = Matrix::Constant(1, 1, 1.0);
  const NormalizationStats s{};
  const double kn = node_affinity(dm, {}, s)(0, 0), ke = edge_affinity(dm, {}, s)(0, 0);
  for (Matrix DistanceMatrices::*field : {&DistanceMatrices::C, &DistanceMatrices::D}) {
    auto d = dm;
    (d.*field)(0, 0) += 0.01;
    EXPECT_LT(node_affinity(d, {}, s)(0, 0), kn);
  }
  for (Matrix DistanceMatrices::*field : {&DistanceMatrices::P, &DistanceMatrices::L, &DistanceMatrices::U}) {
    auto d = dm;
    (d.*field)(0, 0) += 0.01;
    EXPECT_LT(edge_affinity(d, {}, s)(0, 0), ke);
  }
}

TEST(Affinity, SwappingGraphsTransposesKernels) {
  const auto A = random_graph(6, 0.6, 24), B = random_graph(5, 0.7, 25);
  const auto fab = build_affinity(A, B), fba = build_affinity(B, A);
  EXPECT_LE((fab.Kn.transpose() - fba.Kn).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((fab.Ke.transpose() - fba.Ke).cwiseAbs().maxCoeff(), 1e-12);
}

// ---------------------------------------------------------------------------
// factors and the objective

TEST(AffinityFactors, SingleEdgeDensePattern) {
  std::vector<Node> n(2);
  n[1].coord = Vec3(1, 0, 0);
  const SpatialGraph g(n, {make_edge(0, 1, {n[0].coord, n[1].coord}, 1.0)});
  const auto f = assemble_affinity(Matrix{{0.9, 0.2}, {0.3, 0.8}}, Matrix::Constant(1, 1, 0.5), g, g);
  const Matrix K = f.dense();
  // index(i, j) = i + 2 j: (0,0)=0, (1,0)=1, (0,1)=2, (1,1)=3
  const Matrix expect{{0.9, 0.0, 0.0, 0.5}, {0.0, 0.3, 0.5, 0.0}, {0.0, 0.5, 0.2, 0.0}, {0.5, 0.0, 0.0, 0.8}};
  EXPECT_EQ(K, expect);
}

TEST(AffinityFactors, DenseIsSymmetricAndMatchesFactorizedObjective) {
  Rng rng(30);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto A = random_graph(2 + seed % 4, 0.6, 100 + seed), B = random_graph(2 + (seed / 4) % 4, 0.6, 200 + seed);
    const auto f = build_affinity(A, B);
    const Matrix K = f.dense();
    EXPECT_EQ(K, K.transpose());
    for (int t = 0; t < 100; ++t) {
      const Matrix X = random_binary(rng, f.rows(), f.cols());
      const double dense = vec(X).dot(K * vec(X));
      EXPECT_NEAR(qap_objective(f, X), dense, 1e-10);
      const Matrix KX = f.product(X);
      EXPECT_LE((vec(KX) - K * vec(X)).cwiseAbs().maxCoeff(), 1e-12);
    }
    Matrix S(f.rows(), f.cols());
    for (Eigen::Index k = 0; k < S.size(); ++k) S.data()[k] = rng.uniform();
    EXPECT_NEAR(qap_objective(f, S), vec(S).dot(K * vec(S)), 1e-10);
  }
}

TEST(AffinityFactors, ZeroAssignmentGivesZero) {
  const auto A = random_graph(4, 0.7, 40);
  const auto f = build_affinity(A, A);
  EXPECT_EQ(qap_objective(f, Matrix::Zero(4, 4)), 0.0);
}

TEST(AffinityFactors, TriangleSelfMatchClosedForm) {
  std::vector<Node> n(3);
  n[1].coord = Vec3(4, 0, 0);
  n[2].coord = Vec3(0, 3, 0);
  std::vector<Edge> e{make_edge(0, 1, {n[0].coord, n[1].coord}, 1.0), make_edge(1, 2, {n[1].coord, n[2].coord}, 2.0),
                      make_edge(0, 2, {n[0].coord, n[2].coord}, 4.0)};
  const SpatialGraph g(n, e);
  const auto f = build_affinity(g, g);
  const Matrix I = Matrix::Identity(3, 3);
  const double expect = f.Kn.diagonal().sum() + 2.0 * f.Ke.diagonal().sum();
  EXPECT_NEAR(qap_objective(f, I), expect, 1e-12);
  EXPECT_NEAR(expect, 3.0 + 2.0 * 3.0, 1e-12);
}

TEST(AffinityFactors, ShapeAndCapErrors) {
  const auto A = random_graph(4, 0.7, 41);
  const auto f = build_affinity(A, A);
  EXPECT_THROW(qap_objective(f, Matrix::Zero(3, 4)), ArgumentError);
  EXPECT_THROW(f.dense(15), CapacityError);
  EXPECT_THROW(assemble_affinity(Matrix::Zero(2, 2), f.Ke, A, A), ArgumentError);
}
