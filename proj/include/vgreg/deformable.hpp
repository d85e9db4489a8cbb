// deformable.hpp - alternation between graph matching and fitting a
// geometric transform of graph A onto B from the current correspondences.
#pragma once

#include "matchers.hpp"
#include "synth.hpp"
#include "transform.hpp"

namespace vgreg {

inline const std::vector<TransformKind>& default_schedule() {
  static const std::vector<TransformKind> s = {TransformKind::similarity, TransformKind::affine,
                                               TransformKind::nonrigid_tps};
  return s;
}

struct DeformableConfig {
  MatcherConfig matcher{};
  AffinityOptions affinity{};
  std::vector<TransformKind> schedule = default_schedule();
  double tps_lambda = 0.05;
  double tol = 1e-6;  // relative J improvement needed to accept a stage
  /// Warped edges keep the source energies; the alternative re-integrates a
  /// synthetic potential along the warped paths.
  EnergyUpdate energies = EnergyUpdate::keep;
  SyntheticPotential potential{};
};

struct DeformableResult {
  Assignment assignment;
  std::vector<TransformEstimate> transforms;  // accepted stages, in order
  std::vector<double> objectives;             // J of stage 0 and of each accepted stage
  SpatialGraph warped;                        // A after the accepted transforms
  std::size_t stages_tried = 0;
};

/// Stage 0 matches A to B as given. Each later stage fits the next transform
/// kind to the current correspondences, warps A, rebuilds the affinity with
/// the stage-0 normalization and re-matches; a stage is kept only when J
/// improves by more than `tol` (relative), otherwise the alternation stops.
inline DeformableResult deformable_match(const SpatialGraph& A, const SpatialGraph& B, const DeformableConfig& cfg) {
  AffinityOptions aff = cfg.affinity;
  if (!aff.stats) aff.stats = normalization_stats(distance_matrices(A, B, aff.distances));

  DeformableResult out{run_matcher(build_affinity(A, B, aff), cfg.matcher), {}, {}, A, 0};
  out.objectives.push_back(out.assignment.objective);

  for (const auto kind : cfg.schedule) {
    ++out.stages_tried;
    std::vector<Vec3> pa, pb;
    for (std::size_t i = 0; i < out.assignment.permutation.size(); ++i) {
      const auto j = out.assignment.permutation[i];
      if (j == kUnassigned) continue;
      pa.push_back(out.warped.node(i).coord);
      pb.push_back(B.node(j).coord);
    }
    TransformEstimate T;
    try {
      T = estimate_transform(pa, pb, kind, cfg.tps_lambda);
    } catch (const DegenerateError&) {
      break;
    }
    SpatialGraph next = warp_graph(out.warped, T, cfg.energies, cfg.potential);
    Assignment a = run_matcher(build_affinity(next, B, aff), cfg.matcher);
    const double best = out.assignment.objective;
    if (!(a.objective > best + cfg.tol * std::max(1.0, std::abs(best)))) break;
    out.assignment = std::move(a);
    out.transforms.push_back(std::move(T));
    out.objectives.push_back(out.assignment.objective);
    out.warped = std::move(next);
  }
  return out;
}

}  // namespace vgreg
