#pragma once

#include <vector>

#include "selinf/data.hpp"
#include "selinf/inference.hpp"

namespace selinf {

/// Equi-correlated knockoff copy of X: X~'X~ = X'X and X'X~ = X'X - s I with
/// s = min(2 lambda_min(X'X), 1), built from the orthogonal complement of
/// span(X). Requires n >= 2p and unit-norm columns. Both Gram identities are
/// verified to 1e-8 before returning.
Matrix equi_knockoffs(const Matrix& X);

struct FdpPair {
  double fdp = 0.0;
  double fdp_plus = 0.0;
};

/// FDP estimates for a model M over the augmented index space [0, 2p):
/// indices < p are real, >= p are knockoffs.
///   fdp      = |M cap knockoffs| / (|M cap reals| v 1)
///   fdp_plus = |M cap knockoffs| / ((|M cap reals| v 1) + 1)
FdpPair fdp_estimates(const std::vector<int>& M, int p);

/// Full state of the knockoff selection run.
struct KnockoffState {
  Matrix X_tilde;
  std::vector<std::vector<int>> lasso_active;    // active set of [X X~] per lambda
  std::vector<std::vector<int>> lasso_signs;     // matching signs per lambda
  std::vector<std::vector<int>> model_sequence;  // nested: M(1) >= ... >= M(m)
  /// Survival depth per augmented column: largest t with the column in M(t),
  /// 0 when it never enters. Columns surviving deeper entered at larger
  /// lambda.
  std::vector<int> depth;
  /// Signed statistics, one per real/knockoff pair: +depth of the real when
  /// it outlasts its knockoff, -depth of the knockoff when the knockoff
  /// wins, 0 on ties (including pairs that never enter).
  std::vector<double> W;
  std::vector<double> fdp_curve, fdp_plus_curve;  // indexed by t-1
  int T = -1;       // min t with fdp <= alpha (1-based), -1 if none
  int T_plus = -1;  // same under fdp_plus
  bool plus = false;
  std::vector<int> selected;  // real variables in M(T) (or M(T+))
};

/// Runs the lasso on [X X~] along the decreasing lambda path, forms the
/// nested model sequence from cumulative active-set unions, and picks the
/// largest model whose FDP estimate (FDP+ when `plus`) is at most alpha.
KnockoffState knockoff_select(const RegressionData& data,
                              const std::vector<double>& lambdas, double alpha,
                              bool plus);

/// BC-style FDP curve computed from the W statistics at threshold t.
FdpPair fdp_from_w(const std::vector<double>& W, int t);

/// Selective CIs for the knockoff-selected coefficients, conditioning on the
/// realized path event: the intersection over lambda_1..lambda_{T+1} of the
/// per-lambda sign-union events on the augmented design (a superset of the
/// exact knockoff event, hence conservative). When `use_blackbox`, the
/// approximate route conditions on {j in KO(y)} directly via the grid search.
std::vector<SelectiveInterval> knockoff_ci(const RegressionData& data,
                                           const std::vector<double>& lambdas,
                                           const KnockoffState& state,
                                           double alpha,
                                           bool use_blackbox = false,
                                           int grid_points = 2000);

}  // namespace selinf
