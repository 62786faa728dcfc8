#pragma once

#include <limits>
#include <utility>
#include <vector>

#include "selinf/errors.hpp"

namespace selinf {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Total log-mass below which a truncation region is reported as degenerate
/// rather than silently producing a 0/0 pivot. All masses are carried in log
/// space, so the floor sits at the representability limit of the log
/// computation itself (|z| ~ 1e4 standard deviations), not at the linear
/// underflow point: pivot inversions routinely and validly visit masses far
/// below 1e-300.
inline constexpr double kDegenerateLogMass = -1e8;

// ---------------------------------------------------------------------------
// Stable normal-distribution primitives. All masses are handled in log space
// via the complementary error function; interval masses are evaluated as a
// one-sided tail difference on whichever side is farther from the mean.
// ---------------------------------------------------------------------------

double norm_pdf(double z);
double log_norm_pdf(double z);
double norm_cdf(double z);

/// log Phi(z), accurate for z down to -1e5 and beyond (asymptotic series in
/// the far tail where erfc underflows).
double log_norm_cdf(double z);

/// log P(Z > z) = log Phi(-z).
double log_norm_sf(double z);

/// log(Phi(b) - Phi(a)) for a < b in standard units; -inf when a >= b.
double log_interval_mass(double a, double b);

/// log(exp(la) + exp(lb)).
double log_sum_exp(double la, double lb);

/// log(exp(la) - exp(lb)) for la >= lb.
double log_diff_exp(double la, double lb);

/// Inverse standard-normal CDF from a log-probability lp = log p, p in (0,1).
double norm_quantile_from_logp(double lp);

/// Inverse standard-normal CDF.
double norm_quantile(double p);

// ---------------------------------------------------------------------------
// Truncation regions: a finite union of disjoint intervals on the real line.
// ---------------------------------------------------------------------------

struct TruncationRegion {
  /// Sorted by lower end, pairwise disjoint, each with lo < hi. lo may be
  /// -inf and hi may be +inf.
  std::vector<std::pair<double, double>> intervals;

  static TruncationRegion whole_line() { return interval(-kInf, kInf); }

  static TruncationRegion interval(double lo, double hi);

  /// Sorts, drops empty pieces, merges overlapping/touching ones.
  static TruncationRegion from_intervals(
      std::vector<std::pair<double, double>> raw);

  bool empty() const { return intervals.empty(); }
  double lower() const { return empty() ? kInf : intervals.front().first; }
  double upper() const { return empty() ? -kInf : intervals.back().second; }

  bool contains(double x, double tol = 0.0) const;

  /// Set intersection with another region.
  TruncationRegion intersect(const TruncationRegion& other) const;
};

/// CDF of N(mu, sigma2) truncated to `region`, evaluated at x and clamped to
/// [0, 1]. x below every interval gives 0, above every interval gives 1.
/// Throws DegenerateRegionError when the region's total mass underflows.
double tn_cdf(double x, double mu, double sigma2,
              const TruncationRegion& region);

/// Solves tn_cdf(x, mu, sigma2, region) = target for mu, which is unique
/// because the truncated-normal CDF is monotone decreasing in the mean.
/// Bracketed bisection with geometric bracket expansion; |cdf - target| is
/// driven below 1e-8.
double invert_mu(double x, double sigma2, const TruncationRegion& region,
                 double target);

/// Inverse CDF of N(mu, sigma2) truncated to the single interval [lo, hi],
/// evaluated at u in (0, 1). Log-space throughout, robust in far tails.
double tn_quantile(double u, double mu, double sigma2, double lo, double hi);

}  // namespace selinf
