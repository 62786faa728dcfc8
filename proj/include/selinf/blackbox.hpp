#pragma once

#include <functional>

#include "selinf/data.hpp"
#include "selinf/inference.hpp"

namespace selinf {

/// 1-D search grid along the contrast direction. Points are equispaced over
/// eta'y +- half_width_sd standard deviations; the observed eta'y is always
/// inserted.
struct GridSpec {
  int points = 2000;
  double half_width_sd = 10.0;
};

/// Approximate selective pivot for an arbitrary deterministic selector:
/// walks the line y0 + c * Sigma eta / (eta'Sigma eta), keeps the grid values
/// c where the selector reproduces the observed outcome, and evaluates the
/// discrete truncated-normal CDF of eta'y on that support under
/// N(null_value, eta'Sigma eta).
///
/// `same_outcome(y_c)` must return whether the selector's outcome at y_c
/// equals its outcome at the observed y (it is trusted to hold at y itself).
PivotResult approx_pvalue(const std::function<bool(const Vector&)>& same_outcome,
                          const Vector& y, const Contrast& eta,
                          const NoiseModel& noise, double null_value,
                          const GridSpec& grid, Side side = Side::lower);

/// Inverts the approximate pivot in the null value: finds mu with
/// pivot(mu) = target, using the same fixed grid support. Monotone decreasing
/// in mu, so bracketed bisection applies.
double approx_invert_mu(const std::function<bool(const Vector&)>& same_outcome,
                        const Vector& y, const Contrast& eta,
                        const NoiseModel& noise, const GridSpec& grid,
                        double target);

}  // namespace selinf
