#pragma once

#include <utility>
#include <vector>

#include "selinf/data.hpp"

namespace selinf {

inline constexpr double kKktTol = 1e-8;

/// Lasso / elastic-net fit in the form the selection-event encoding needs:
/// the active set M, signs z, the KKT-exact active block U and inactive
/// subgradient W. beta_hat is U scattered into R^p.
struct LassoFit {
  Vector beta_hat;
  std::vector<int> active;  // ordered, 0-based
  std::vector<int> signs;   // +1/-1 per active entry
  double lambda = 0.0;
  double gamma = 0.0;  // l2 damping; 0 for plain lasso
  Vector U;            // |M|-vector, exact active-block solution
  Vector W;            // (p-|M|)-vector, inactive subgradient
  double kkt_residual = 0.0;
};

/// Minimizes 0.5*||y - X b||^2 + lambda*||b||_1 by cyclic coordinate descent,
/// then refits U exactly on the support so that signs and subgradients are
/// KKT-exact rather than solver-approximate.
LassoFit fit_lasso(const RegressionData& data, double lambda);

/// Minimizes 0.5*||y - X b||^2 + lambda*||b||_1 + 0.5*gamma*||b||^2.
/// gamma = 0 reduces to fit_lasso.
LassoFit fit_elastic_net(const RegressionData& data, double lambda,
                         double gamma);

struct ScreenResult {
  std::vector<int> active;  // k indices, sorted by |x_j'y| descending
  std::vector<int> signs;   // sign(x_j'y) per active entry
};

/// Selects the k columns with the largest |x_j'y|. Errors on an exact tie at
/// the cutoff rank, where the selection event is ill-defined.
ScreenResult marginal_screen(const RegressionData& data, int k);

/// Orthogonal matching pursuit path: greedy argmax of |r'x_j| with full
/// least-squares re-projection of the residual after each step.
struct StepwisePath {
  std::vector<std::pair<int, int>> steps;  // (index, sign) per step
  std::vector<Vector> residuals;           // residuals[i] = r_{i+1}; size k+1,
                                           // residuals[0] = y
};

StepwisePath omp(const RegressionData& data, int k);

struct NnlsResult {
  Vector beta;              // p, >= 0
  std::vector<int> active;  // zero-dual set, 0-based, ascending
  Vector dual;              // -X'(y - X beta), >= 0
};

/// Nonnegative least squares via Lawson-Hanson active-set iteration
/// (at most 10*p outer iterations).
NnlsResult nnls(const RegressionData& data);

}  // namespace selinf
