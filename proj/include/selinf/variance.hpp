#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "selinf/data.hpp"
#include "selinf/events.hpp"

namespace selinf {

struct VarianceEstimate {
  double sigma2_hat = 0.0;
  int n_samples = 0;
  int burn_in = 0;
  double score_residual = 0.0;  // |E||Z||^2 - ||(I-P_M)y||^2| at termination
  std::uint64_t seed = 0;
  std::string assumption_note;
};

struct SigmaConfig {
  int n_samples = 5000;
  int burn_in = 1000;
  std::uint64_t seed = 1;
};

/// Coordinate-wise Gibbs sampler for N(mean, sigma2 I) truncated to the
/// polytope. Each sweep redraws every coordinate from its univariate
/// truncated-normal conditional with cutoffs read off the constraint rows.
/// Returns n_samples rows (one per post-burn-in sweep); every row satisfies
/// A y <= b + feas_tol.
Matrix gibbs_tmvn(const Polytope& poly, const Vector& mean, double sigma2,
                  int n_samples, int burn_in, std::uint64_t seed,
                  const std::optional<Vector>& start = std::nullopt);

/// Maximum-likelihood sigma^2 on the selection event: solves the score
/// equation E_{C,sigma2}||Z||^2 = ||(I-P_M)y||^2 by monotone bisection, with
/// the left side estimated by Gibbs sampling under common random numbers
/// across candidates.
VarianceEstimate estimate_sigma(const Polytope& event,
                                const RegressionData& data,
                                const std::vector<int>& M,
                                const SigmaConfig& config = {});

}  // namespace selinf
