#include <vgreg/deformable.hpp>
#include <vgreg/eval.hpp>

#include <gtest/gtest.h>

using namespace vgreg;

namespace {

std::vector<Vec3> random_points(Rng& rng, std::size_t n) {
  std::vector<Vec3> p;
  for (std::size_t k = 0; k < n; ++k) p.emplace_back(rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5));
  return p;
}

template <typename F>
std::vector<Vec3> mapped(const std::vector<Vec3>& pts, F fn) {
  std::vector<Vec3> out;
  for (const auto& p : pts) out.push_back(fn(p));
  return out;
}

double accuracy_of(const Assignment& a, std::size_t n) { return matching_accuracy(a, GroundTruth::identity(n)); }

}  // namespace

TEST(FitSimilarity, PureScaling) {
  Rng rng(1);
  const auto a = random_points(rng, 12);
  const auto t = fit_similarity(a, mapped(a, [](const Vec3& p) { return Vec3(2.0 * p); }));
  EXPECT_NEAR(t.scale, 2.0, 1e-9);
  EXPECT_LE((t.rotation - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LE(t.translation.norm(), 1e-9);
}

TEST(FitSimilarity, RecoversRotationScaleTranslation) {
  Rng rng(2);
  const auto a = random_points(rng, 15);
  const Mat3 R = Eigen::AngleAxisd(0.8, Vec3(1, 2, 3).normalized()).toRotationMatrix();
  const Vec3 t(4, -1, 2);
  const auto est = fit_similarity(a, mapped(a, [&](const Vec3& p) { return Vec3(0.7 * R * p + t); }));
  EXPECT_NEAR(est.scale, 0.7, 1e-9);
  EXPECT_LE((est.rotation - R).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LE((est.translation - t).norm(), 1e-9);
}

TEST(FitAffine, ExactRecovery) {
  Rng rng(3);
  const auto a = random_points(rng, 10);
  Mat3 M;
  M << 1.2, 0.3, -0.1, 0.0, 0.9, 0.4, 0.2, -0.3, 1.1;
  const Vec3 b(1, 2, 3);
  const auto est = fit_affine(a, mapped(a, [&](const Vec3& p) { return Vec3(M * p + b); }));
  EXPECT_LE((est.linear - M).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LE((est.translation - b).norm(), 1e-9);
}

TEST(FitTps, InterpolatesAsLambdaVanishes) {
  Rng rng(4);
  const auto a = random_points(rng, 10);
  const auto b = mapped(a, [](const Vec3& p) { return Vec3(p + Vec3(std::sin(p.y()), 0.3 * p.x() * p.z() / 5, 0.2)); });
  const auto t = fit_tps(a, b, 0.0);
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_LE((t(a[k]) - b[k]).norm(), 1e-6);
  const auto smooth = fit_tps(a, b, 1.0);
  double r0 = 0.0, r1 = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    r0 += (t(a[k]) - b[k]).squaredNorm();
    r1 += (smooth(a[k]) - b[k]).squaredNorm();
  }
  EXPECT_GT(r1, r0);
}

TEST(FitTps, ReproducesAffineMapsExactly) {
  Rng rng(5);
  const auto a = random_points(rng, 12);
  Mat3 M = Mat3::Identity();
  M(0, 1) = 0.4;
  const auto b = mapped(a, [&](const Vec3& p) { return Vec3(M * p + Vec3(1, 1, 1)); });
  const auto t = fit_tps(a, b, 0.3);
  const Vec3 q(0.3, -2.0, 1.7);
  EXPECT_LE((t(q) - (M * q + Vec3(1, 1, 1))).norm(), 1e-8);
}

TEST(EstimateTransform, DegenerateConfigurations) {
  const std::vector<Vec3> two{Vec3(0, 0, 0), Vec3(1, 0, 0)};
  EXPECT_THROW(estimate_transform(two, two, TransformKind::similarity), DegenerateError);
  const std::vector<Vec3> line{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0), Vec3(3, 0, 0)};
  EXPECT_THROW(estimate_transform(line, line, TransformKind::similarity), DegenerateError);
  const std::vector<Vec3> plane{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(1, 1, 0), Vec3(2, 1, 0)};
  EXPECT_THROW(estimate_transform(plane, plane, TransformKind::affine), DegenerateError);
  EXPECT_THROW(estimate_transform(plane, plane, TransformKind::nonrigid_tps), DegenerateError);
  EXPECT_THROW(estimate_transform(plane, line, TransformKind::affine), ArgumentError);
  Rng rng(6);
  const auto a = random_points(rng, 6);
  EXPECT_THROW(fit_tps(a, a, -1.0), ArgumentError);
}

// ---------------------------------------------------------------------------

TEST(DeformableMatch, EmptyScheduleEqualsBaseMatcher) {
  const auto A = synthetic_gvg(3, 20);
  const auto B = deform(A, 0.1, 5);
  DeformableConfig cfg;
  cfg.schedule.clear();
  const auto r = deformable_match(A, B, cfg);
  const auto base = run_matcher(build_affinity(A, B), cfg.matcher);
  EXPECT_EQ(r.assignment.permutation, base.permutation);
  EXPECT_EQ(r.assignment.objective, base.objective);
  EXPECT_TRUE(r.transforms.empty());
  EXPECT_EQ(r.stages_tried, 0u);
}

TEST(DeformableMatch, ScaledCopyIsFullyRecovered) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto A = synthetic_gvg(seed, 20);
    Vec3 c = Vec3::Zero();
    for (const auto& n : A.nodes()) c += n.coord;
    c /= static_cast<double>(A.node_count());
    const auto B = warp_graph(A, [&](const Vec3& p) { return Vec3(c + 1.3 * (p - c)); }, EnergyUpdate::keep,
                              SyntheticPotential{});
    const auto r = deformable_match(A, B, {});
    EXPECT_EQ(accuracy_of(r.assignment, 20), 100.0) << "seed " << seed;
    for (std::size_t k = 1; k < r.objectives.size(); ++k) EXPECT_GT(r.objectives[k], r.objectives[k - 1]);
  }
}

TEST(DeformableMatch, SmoothWarpNeverLowersJ) {
  double deformable_total = 0.0, rigid_total = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto A = synthetic_gvg(seed, 30);
    const auto B = deform(A, 0.1, seed + 100);
    const auto r = deformable_match(A, B, {});
    DeformableConfig none;
    none.schedule.clear();
    const auto base = deformable_match(A, B, none);
    EXPECT_GE(r.assignment.objective, r.objectives.front());
    EXPECT_EQ(r.objectives.front(), base.assignment.objective);
    deformable_total += accuracy_of(r.assignment, 30);
    rigid_total += accuracy_of(base.assignment, 30);
  }
  EXPECT_GE(deformable_total, rigid_total);
}

TEST(DeformableMatch, WarpedGraphStaysValid) {
  const auto A = synthetic_gvg(7, 25);
  const auto B = deform(A, 0.2, 3);
  const auto r = deformable_match(A, B, {});
  EXPECT_EQ(r.warped.node_count(), A.node_count());
  EXPECT_EQ(r.warped.edge_count(), A.edge_count());
  for (std::size_t e = 0; e < A.edge_count(); ++e) {
    EXPECT_EQ(r.warped.edges()[e].energy, A.edges()[e].energy);
    EXPECT_NEAR(r.warped.edges()[e].length, arc_length(r.warped.edges()[e].path), 1e-9 * r.warped.edges()[e].length);
  }
  EXPECT_EQ(r.transforms.size() + 1, r.objectives.size());
}
