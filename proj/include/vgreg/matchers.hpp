// matchers.hpp - every graph matcher behind one entry point.
#pragma once

#include "matchers/common.hpp"
#include "matchers/fgm.hpp"
#include "matchers/ga.hpp"
#include "matchers/ipfp.hpp"
#include "matchers/rrwm.hpp"
#include "matchers/spectral.hpp"

namespace vgreg {

inline Assignment run_matcher(const AffinityFactors& f, const MatcherConfig& cfg) {
  if (f.rows() == 0 || f.cols() == 0) throw ArgumentError("run_matcher: both graphs need at least one node");
  switch (cfg.algorithm) {
    case Algorithm::GA: return graduated_assignment(f, cfg);
    case Algorithm::SM: return spectral_match(f, cfg);
    case Algorithm::SMAC: return smac(f, cfg);
    case Algorithm::PM: return probabilistic_match(f, cfg);
    case Algorithm::IPFP_U: return ipfp_u(f, cfg);
    case Algorithm::IPFP_SM: return ipfp_sm(f, cfg);
    case Algorithm::RRWM: return rrwm(f, cfg);
    case Algorithm::FGM: return fgm(f, cfg);
  }
  throw ArgumentError("run_matcher: unknown algorithm");
}

inline Assignment run_matcher(const AffinityFactors& f, Algorithm a, MatcherConfig cfg = {}) {
  cfg.algorithm = a;
  return run_matcher(f, cfg);
}

}  // namespace vgreg
