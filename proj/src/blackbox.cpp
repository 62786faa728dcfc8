#include "selinf/blackbox.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "selinf/parallel.hpp"
#include "selinf/truncnorm.hpp"

namespace selinf {

namespace {

struct GridSupport {
  std::vector<double> kept;  // grid values where the outcome matches
  double observed = 0.0;
};

GridSupport evaluate_grid(const std::function<bool(const Vector&)>& same_outcome,
                          const Vector& y, const Contrast& eta,
                          const NoiseModel& noise, const GridSpec& grid) {
  if (grid.points < 2) throw InvalidInput("blackbox: grid needs >= 2 points");
  const double observed = eta.eta.dot(y);
  const double sd = std::sqrt(eta.scale);
  const Vector dir = noise.apply(eta.eta) / eta.scale;
  const Vector y0 = y - observed * dir;  // eta'y0 = 0

  std::vector<double> points(grid.points);
  const double lo = observed - grid.half_width_sd * sd;
  const double hi = observed + grid.half_width_sd * sd;
  for (int i = 0; i < grid.points; ++i)
    points[i] = lo + (hi - lo) * i / (grid.points - 1);
  points.push_back(observed);  // force-included; known to match
  std::sort(points.begin(), points.end());
  points.erase(std::unique(points.begin(), points.end()), points.end());

  std::vector<char> match(points.size(), 0);
  parallel::for_each_index(static_cast<long>(points.size()), [&](long i) {
    if (points[i] == observed) {
      match[i] = 1;
      return;
    }
    match[i] = same_outcome(y0 + points[i] * dir) ? 1 : 0;
  });

  GridSupport out;
  out.observed = observed;
  for (std::size_t i = 0; i < points.size(); ++i)
    if (match[i]) out.kept.push_back(points[i]);
  if (out.kept.size() < 2)
    throw NumericalError(
        "blackbox: selector matched the observed outcome nowhere else on the "
        "grid; refine the grid or check the selector");
  return out;
}

double discrete_pivot(const GridSupport& support, double null_value,
                      double scale) {
  // Weights are the N(null_value, scale) density on the kept support,
  // accumulated with a max-shift to avoid underflow.
  double max_lw = -kInf;
  std::vector<double> lw(support.kept.size());
  for (std::size_t i = 0; i < support.kept.size(); ++i) {
    const double d = support.kept[i] - null_value;
    lw[i] = -0.5 * d * d / scale;
    max_lw = std::max(max_lw, lw[i]);
  }
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < support.kept.size(); ++i) {
    const double w = std::exp(lw[i] - max_lw);
    den += w;
    if (support.kept[i] <= support.observed) num += w;
  }
  return std::clamp(num / den, 0.0, 1.0);
}

}  // namespace

PivotResult approx_pvalue(const std::function<bool(const Vector&)>& same_outcome,
                          const Vector& y, const Contrast& eta,
                          const NoiseModel& noise, double null_value,
                          const GridSpec& grid, Side side) {
  const GridSupport support = evaluate_grid(same_outcome, y, eta, noise, grid);
  PivotResult res;
  res.pivot = discrete_pivot(support, null_value, eta.scale);
  res.side = side;
  res.null_value = null_value;
  res.eta = eta;
  res.observed = support.observed;
  switch (side) {
    case Side::lower:
      res.p_value = res.pivot;
      break;
    case Side::upper:
      res.p_value = 1.0 - res.pivot;
      break;
    case Side::two_sided:
      res.p_value = std::min(1.0, 2.0 * std::min(res.pivot, 1.0 - res.pivot));
      break;
  }
  return res;
}

double approx_invert_mu(const std::function<bool(const Vector&)>& same_outcome,
                        const Vector& y, const Contrast& eta,
                        const NoiseModel& noise, const GridSpec& grid,
                        double target) {
  if (!(target > 0.0 && target < 1.0))
    throw InvalidInput("blackbox: target must lie in (0,1)");
  const GridSupport support = evaluate_grid(same_outcome, y, eta, noise, grid);
  const double sd = std::sqrt(eta.scale);

  auto f = [&](double mu) { return discrete_pivot(support, mu, eta.scale); };
  double step = sd;
  double lo = support.observed - step, hi = support.observed + step;
  bool ok_lo = f(lo) >= target, ok_hi = f(hi) <= target;
  for (int i = 0; i < 200 && !(ok_lo && ok_hi); ++i) {
    step *= 2.0;
    if (!ok_lo) {
      lo = support.observed - step;
      ok_lo = f(lo) >= target;
    }
    if (!ok_hi) {
      hi = support.observed + step;
      ok_hi = f(hi) <= target;
    }
  }
  if (!(ok_lo && ok_hi))
    throw NumericalError("blackbox: could not bracket the pivot inversion");
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (f(mid) > target)
      lo = mid;
    else
      hi = mid;
    if (hi - lo < 1e-10 * std::max(1.0, sd)) break;
  }
  return 0.5 * (lo + hi);
}

}  // namespace selinf
