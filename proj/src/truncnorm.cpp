#include "selinf/truncnorm.hpp"

#include <algorithm>
#include <cmath>

namespace selinf {

namespace {
constexpr double kSqrt2 = 1.4142135623730951;
constexpr double kInvSqrt2 = 0.7071067811865476;
constexpr double kLogSqrt2Pi = 0.9189385332046727;  // log(sqrt(2*pi))
}  // namespace

double norm_pdf(double z) {
  if (std::isinf(z)) return 0.0;
  return std::exp(-0.5 * z * z - kLogSqrt2Pi);
}

double log_norm_pdf(double z) {
  if (std::isinf(z)) return -kInf;
  return -0.5 * z * z - kLogSqrt2Pi;
}

double norm_cdf(double z) {
  if (std::isinf(z)) return z > 0 ? 1.0 : 0.0;
  return 0.5 * std::erfc(-z * kInvSqrt2);
}

double log_norm_cdf(double z) {
  if (std::isinf(z)) return z > 0 ? 0.0 : -kInf;
  if (z > 8.0) {
    // Phi(z) = 1 - Q(z) with Q(z) < 1e-15: log1p is exact here.
    return std::log1p(-0.5 * std::erfc(z * kInvSqrt2));
  }
  double x = -z * kInvSqrt2;  // erfc argument, x > -5.66
  if (x < 25.0) return std::log(0.5 * std::erfc(x));
  // erfc(x) ~ exp(-x^2)/(x sqrt(pi)) * (1 - 1/(2x^2) + 3/(4x^4) - ...)
  const double r = 1.0 / (x * x);
  const double series =
      1.0 + r * (-0.5 + r * (0.75 + r * (-1.875 + r * 6.5625)));
  return -x * x - std::log(x) - 0.5 * std::log(M_PI) + std::log(series) -
         std::log(2.0);
}

double log_norm_sf(double z) { return log_norm_cdf(-z); }

double log_sum_exp(double la, double lb) {
  if (la == -kInf) return lb;
  if (lb == -kInf) return la;
  const double m = std::max(la, lb);
  return m + std::log1p(std::exp(std::min(la, lb) - m));
}

double log_diff_exp(double la, double lb) {
  if (lb == -kInf) return la;
  if (!(la > lb)) return -kInf;
  return la + std::log1p(-std::exp(lb - la));
}

double log_interval_mass(double a, double b) {
  if (!(a < b)) return -kInf;
  if (a == -kInf && b == kInf) return 0.0;
  if (a == -kInf) return log_norm_cdf(b);
  if (b == kInf) return log_norm_sf(a);
  if (a >= 0.0) return log_diff_exp(log_norm_sf(a), log_norm_sf(b));
  if (b <= 0.0) return log_diff_exp(log_norm_cdf(b), log_norm_cdf(a));
  // Interval straddles 0: two nonnegative erf pieces, no cancellation.
  return std::log(0.5 * std::erf(b * kInvSqrt2) +
                  0.5 * std::erf(-a * kInvSqrt2));
}

double norm_quantile_from_logp(double lp) {
  if (!(lp < 0.0)) {
    if (lp == 0.0) return kInf;
    throw InvalidInput("norm_quantile_from_logp: log-probability must be < 0");
  }
  const double log_half = std::log(0.5);
  // Solve on the lower half and mirror.
  if (lp > log_half) return -norm_quantile_from_logp(log_diff_exp(0.0, lp));

  // Initial guess: invert the tail asymptotics logPhi(x) ~ -x^2/2 - log(-x)
  // - log(sqrt(2 pi)) by fixed point, valid for any lp <= log(1/2).
  double x = -std::sqrt(std::max(1e-16, -2.0 * lp));
  for (int i = 0; i < 4; ++i) {
    double inner = -2.0 * (lp + std::log(std::max(1e-8, -x)) + kLogSqrt2Pi);
    if (inner <= 0) {
      x = -1e-8;
      break;
    }
    x = -std::sqrt(inner);
  }

  // Safeguarded Newton on g(x) = logPhi(x) - lp, g'(x) = phi/Phi.
  double lo = -1e6, hi = 0.0;
  for (int it = 0; it < 100; ++it) {
    double g = log_norm_cdf(x) - lp;
    if (std::abs(g) < 1e-13) break;
    if (g > 0)
      hi = x;
    else
      lo = x;
    double deriv = std::exp(log_norm_pdf(x) - log_norm_cdf(x));
    double step = deriv > 0 ? g / deriv : 0.0;
    double next = x - step;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == x) break;
    x = next;
  }
  return x;
}

double norm_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw InvalidInput("norm_quantile: p must lie in (0,1)");
  return norm_quantile_from_logp(std::log(p));
}

TruncationRegion TruncationRegion::interval(double lo, double hi) {
  TruncationRegion r;
  if (lo < hi) r.intervals.emplace_back(lo, hi);
  return r;
}

TruncationRegion TruncationRegion::from_intervals(
    std::vector<std::pair<double, double>> raw) {
  std::erase_if(raw, [](const auto& iv) { return !(iv.first < iv.second); });
  std::sort(raw.begin(), raw.end());
  TruncationRegion r;
  for (const auto& iv : raw) {
    if (!r.intervals.empty() && iv.first <= r.intervals.back().second) {
      r.intervals.back().second = std::max(r.intervals.back().second, iv.second);
    } else {
      r.intervals.push_back(iv);
    }
  }
  return r;
}

bool TruncationRegion::contains(double x, double tol) const {
  for (const auto& [lo, hi] : intervals)
    if (x >= lo - tol && x <= hi + tol) return true;
  return false;
}

TruncationRegion TruncationRegion::intersect(
    const TruncationRegion& other) const {
  std::vector<std::pair<double, double>> out;
  std::size_t i = 0, j = 0;
  while (i < intervals.size() && j < other.intervals.size()) {
    const auto& a = intervals[i];
    const auto& b = other.intervals[j];
    const double lo = std::max(a.first, b.first);
    const double hi = std::min(a.second, b.second);
    if (lo < hi) out.emplace_back(lo, hi);
    if (a.second < b.second)
      ++i;
    else
      ++j;
  }
  return from_intervals(std::move(out));
}

double tn_cdf(double x, double mu, double sigma2,
              const TruncationRegion& region) {
  if (!(sigma2 > 0.0)) throw InvalidInput("tn_cdf: sigma2 must be positive");
  if (region.empty())
    throw DegenerateRegionError("tn_cdf: empty truncation region", -kInf);
  const double s = std::sqrt(sigma2);

  const std::size_t m = region.intervals.size();
  std::vector<double> lm(m);
  double max_lm = -kInf;
  for (std::size_t i = 0; i < m; ++i) {
    const auto& [lo, hi] = region.intervals[i];
    const double a = lo == -kInf ? -kInf : (lo - mu) / s;
    const double b = hi == kInf ? kInf : (hi - mu) / s;
    lm[i] = log_interval_mass(a, b);
    max_lm = std::max(max_lm, lm[i]);
  }

  // Drop intervals whose relative mass is negligible, then accumulate.
  const double cutoff = max_lm + std::log(1e-16);
  double log_den = -kInf, log_num = -kInf;
  for (std::size_t i = 0; i < m; ++i) {
    if (lm[i] < cutoff) continue;
    log_den = log_sum_exp(log_den, lm[i]);
    const auto& [lo, hi] = region.intervals[i];
    if (x <= lo) continue;
    if (x >= hi) {
      log_num = log_sum_exp(log_num, lm[i]);
    } else {
      const double a = lo == -kInf ? -kInf : (lo - mu) / s;
      log_num = log_sum_exp(log_num, log_interval_mass(a, (x - mu) / s));
    }
  }

  if (log_den < kDegenerateLogMass) {
    // A mean far outside the hull pushes all mass to the nearest endpoint;
    // the CDF limit there is exact. Only an interior mean with vanishing
    // mass marks the region itself as degenerate.
    if (mu > region.upper()) return x >= region.upper() ? 1.0 : 0.0;
    if (mu < region.lower()) return x > region.lower() ? 1.0 : 0.0;
    throw DegenerateRegionError(
        "tn_cdf: truncation region mass underflows (log-mass " +
            std::to_string(log_den) + ")",
        log_den);
  }
  if (log_num == -kInf) return 0.0;
  return std::clamp(std::exp(log_num - log_den), 0.0, 1.0);
}

double invert_mu(double x, double sigma2, const TruncationRegion& region,
                 double target) {
  if (!(target > 0.0 && target < 1.0))
    throw InvalidInput("invert_mu: target must lie in (0,1)");
  if (region.empty() || !(x > region.lower()) || !(x < region.upper()))
    throw NumericalError(
        "invert_mu: x must be strictly interior to the region's support");

  // Monotone decreasing in mu; degenerate evaluations far from x behave as
  // the limit (1 below x, 0 above).
  auto eval = [&](double mu) {
    try {
      return tn_cdf(x, mu, sigma2, region);
    } catch (const DegenerateRegionError&) {
      return mu < x ? 1.0 : 0.0;
    }
  };

  const double s = std::sqrt(sigma2);
  double step = s;
  double lo = x - step, hi = x + step;
  bool ok_lo = eval(lo) >= target, ok_hi = eval(hi) <= target;
  for (int i = 0; i < 200 && !(ok_lo && ok_hi); ++i) {
    step *= 2.0;
    if (!ok_lo) {
      lo = x - step;
      ok_lo = eval(lo) >= target;
    }
    if (!ok_hi) {
      hi = x + step;
      ok_hi = eval(hi) <= target;
    }
  }
  if (!(ok_lo && ok_hi))
    throw NumericalError(
        "invert_mu: bracket expansion failed after 200 doublings "
        "(numerically degenerate region)");

  double mid = 0.5 * (lo + hi);
  for (int it = 0; it < 500; ++it) {
    mid = 0.5 * (lo + hi);
    const double f = eval(mid);
    if (std::abs(f - target) <= 1e-8) return mid;
    if (f > target)
      lo = mid;
    else
      hi = mid;
    if (hi - lo < 1e-14 * std::max(1.0, std::abs(x))) break;
  }
  const double f = eval(mid);
  if (std::abs(f - target) <= 1e-6) return mid;  // flat-CDF slack
  throw NumericalError("invert_mu: bisection stalled on a degenerate region");
}

double tn_quantile(double u, double mu, double sigma2, double lo, double hi) {
  if (!(u > 0.0 && u < 1.0))
    throw InvalidInput("tn_quantile: u must lie in (0,1)");
  if (!(sigma2 > 0.0))
    throw InvalidInput("tn_quantile: sigma2 must be positive");
  if (!(lo < hi)) throw InvalidInput("tn_quantile: empty interval");
  const double s = std::sqrt(sigma2);
  const double a = lo == -kInf ? -kInf : (lo - mu) / s;
  const double b = hi == kInf ? kInf : (hi - mu) / s;
  const double lm = log_interval_mass(a, b);
  if (lm < kDegenerateLogMass)
    throw DegenerateRegionError("tn_quantile: interval mass underflows", lm);

  // Work on whichever side keeps the target probability small.
  const double lp_cdf = log_sum_exp(log_norm_cdf(a), std::log(u) + lm);
  double z;
  if (lp_cdf <= std::log(0.5)) {
    z = norm_quantile_from_logp(lp_cdf);
  } else {
    const double lq = log_sum_exp(log_norm_sf(b), std::log1p(-u) + lm);
    z = -norm_quantile_from_logp(lq);
  }
  z = std::clamp(z, a, b);
  return mu + s * z;
}

}  // namespace selinf
