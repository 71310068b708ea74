#pragma once

#include <cstdint>

namespace treedual {

/// Monte Carlo estimate of E[1/R_t] for the radial part R of a
/// three-dimensional Brownian motion started at distance one. The inverse
/// radius is a strict local martingale: its expectation drifts below the
/// initial value 1, and `defect` quantifies the gap.
struct DefectEstimate {
  double t = 0.0;
  std::int64_t paths = 0;
  double estimate = 0.0;
  double std_error = 0.0;
  double defect = 0.0;  ///< 1 - estimate
};

/// Exact sampling: R_t is the norm of a Gaussian vector with mean (1, 0, 0)
/// and componentwise variance t, so no discretization bias enters. Paths are
/// generated in fixed-size batches with seed-derived independent streams and
/// merged in batch order; results are reproducible bit for bit per seed.
DefectEstimate estimate_defect(double t, std::int64_t paths, std::uint64_t seed);

}  // namespace treedual
