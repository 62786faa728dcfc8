#pragma once

#include <optional>
#include <string>
#include <vector>

#include "selinf/data.hpp"
#include "selinf/events.hpp"
#include "selinf/solvers.hpp"
#include "selinf/truncnorm.hpp"

namespace selinf {

/// Truncation bounds of eta'y along the event, holding the orthogonal
/// component of y fixed: the one-dimensional slice of the polytope.
struct TruncationResult {
  double v_minus = -kInf;
  double v_plus = kInf;
  double v_zero = kInf;
  Vector alpha_vec;  // A Sigma eta / (eta' Sigma eta) for the observed member
  TruncationRegion region;
  double observed = 0.0;  // eta'y
};

enum class Side { lower, upper, two_sided };

struct PivotResult {
  double pivot = 0.0;    // truncated-normal CDF transform of eta'y
  double p_value = 1.0;  // one- or two-sided per `side`
  Side side = Side::two_sided;
  double null_value = 0.0;
  Contrast eta;
  double observed = 0.0;
  TruncationRegion region;
};

struct SelectiveInterval {
  double lower = -kInf;
  double upper = kInf;
  double level = 0.0;  // 1 - alpha
  std::string label;
  std::string conditioning;
  std::string warning;  // set when a bracket failure forced an infinite end
};

/// State of the path-wise FWER procedure.
struct PathState {
  std::vector<double> lambdas;
  std::vector<LassoFit> fits;  // one per visited lambda
  std::vector<std::optional<PivotResult>> gof_pvalues;
  std::vector<std::string> skip_reasons;  // per visited lambda, "" if tested
  Polytope cumulative;  // row-stacked per-lambda selection events
  int stop_index = -1;  // first non-rejection, or number of lambdas if none
};

/// Truncation bounds of eta'y along the event. For a single polytope the region is the
/// interval [V-, V+]; for a union event it is the union of member intervals
/// merged into disjoint pieces. Throws when y is outside the event or the
/// bounds come back inconsistent (V+ < V- beyond 1e-7, or V0 < 0).
TruncationResult truncation_interval(const SelectionEvent& event,
                                     const Contrast& eta,
                                     const NoiseModel& noise, const Vector& y);

/// Pivot = tn_cdf(eta'y; null_value, eta'Sigma eta, region) and its one- or
/// two-sided p-value.
PivotResult selective_pvalue(const SelectionEvent& event, const Contrast& eta,
                             const NoiseModel& noise, const Vector& y,
                             double null_value, Side side);

/// eta with eta'y equal to the j-th OLS coefficient of y on X_M and
/// eta'mu = the submodel target (X_M^dagger mu)_j. j indexes columns of X.
Contrast coef_contrast(const Matrix& X, const std::vector<int>& M, int j,
                       const NoiseModel& noise,
                       const std::vector<std::string>& names = {});

/// Equal-tailed selective confidence interval: L solves cdf = 1 - alpha/2 and
/// U solves cdf = alpha/2 in the mean parameter. A bracket failure on one
/// side yields an infinite endpoint plus a warning instead of an error.
SelectiveInterval selective_ci(const SelectionEvent& event, const Contrast& eta,
                               const NoiseModel& noise, const Vector& y,
                               double alpha);

/// One selective CI per active coefficient; controls the false coverage rate
/// at alpha by construction.
std::vector<SelectiveInterval> fcr_batch(const SelectionEvent& event,
                                         const Matrix& X, const Vector& y,
                                         const NoiseModel& noise, double alpha,
                                         const std::vector<std::string>& names = {});

/// Goodness-of-fit test of zero inactive partial correlation,
/// conditioning on the lasso event refined by the argmax block. Upper-sided:
/// reject when pivot > 1 - alpha (p_value < alpha).
PivotResult gof_test(const Matrix& X, const Vector& y,
                     const std::vector<int>& M, const std::vector<int>& z,
                     double lambda, const NoiseModel& noise);

/// Composite null |eta'mu| <= delta0: the worst case sits at delta0, so the
/// test evaluates the pivot there. Upper-sided.
PivotResult composite_test(const SelectionEvent& event, const Contrast& eta,
                           const NoiseModel& noise, const Vector& y,
                           double delta0);

/// Sequential testing along a decreasing lambda path. Each test conditions on
/// the entire sequence of events so far; stops at the first non-rejection.
/// Controls FWER at alpha.
PathState path_fwer(const RegressionData& data,
                    const std::vector<double>& lambdas, double alpha);

struct FdrResult {
  std::vector<int> active;
  Vector p_values;            // two-sided, aligned with `active`
  std::vector<int> rejected;  // subset of active
};

/// Full-model inference (n >= p): selective p-value per selected coefficient,
/// then the Benjamini-Yekutieli step-up rule at level alpha.
FdrResult full_model_fdr(const RegressionData& data, double lambda,
                         double alpha);

}  // namespace selinf
