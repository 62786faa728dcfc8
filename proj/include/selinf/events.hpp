#pragma once

#include <optional>
#include <tuple>
#include <vector>

#include "selinf/data.hpp"
#include "selinf/solvers.hpp"

namespace selinf {

inline constexpr double kFeasTol = 1e-9;

/// Conditioning block for the goodness-of-fit direction: the index (into the
/// inactive set) and sign of the largest projected partial correlation, plus
/// the difference/sum constraint rows that pin that argmax.
struct SignedMaxEvent {
  int j_star = 0;  // position within the inactive list
  int column = 0;  // the same variable as a column index of X
  int s_star = 1;
  Matrix A2;  // 2*(q-1) rows for q inactive columns, b-part is zero
};

/// Lasso selection event {(M, z) observed} as affine constraints on y:
/// inactive rows bound the subgradient, active rows pin the signs.
Polytope lasso_event(const Matrix& X, const std::vector<int>& M,
                     const std::vector<int>& z, double lambda);

/// Elastic-net variant: the same construction with the damped Gram inverse
/// (X_M'X_M + gamma I)^-1 wherever the plain inverse appears.
Polytope enet_event(const Matrix& X, const std::vector<int>& M,
                    const std::vector<int>& z, double lambda, double gamma);

/// Marginal screening event: each selected |x_i'y| beats each unselected one,
/// with the observed signs.
Polytope ms_event(const Matrix& X, const std::vector<int>& M,
                  const std::vector<int>& s);

/// OMP event; order-aware, one signed-argmax block per step against the
/// step's projected residual.
Polytope omp_event(const Matrix& X, const StepwisePath& path);

/// NNLS event A(M) y <= 0, including the two identically-zero active blocks
/// the KKT derivation produces.
Polytope nnls_event(const Matrix& X, const std::vector<int>& M);

/// Lasso event refined by the goodness-of-fit argmax: returns the augmented
/// polytope, the signed-max block, and the test direction
/// eta = s * (I - P_M) X_{-M} e_{j*} (unnormalized; caller attaches noise).
std::tuple<Polytope, SignedMaxEvent, Vector> gof_event(
    const Matrix& X, const std::vector<int>& M, const std::vector<int>& z,
    double lambda, const Vector& y);

/// Row-stacks events over the same ambient dimension.
Polytope intersect(const std::vector<Polytope>& events);

/// Union over sign vectors of the lasso event with active set M: the
/// conditioning set for inference given only {M_hat = M}. Members that a
/// feasibility search certifies empty are pruned.
SelectionEvent union_over_signs(const Matrix& X, const std::vector<int>& M,
                                double lambda);

inline constexpr int kSignUnionCap = 12;

/// Ay <= b + tol componentwise. Zero rows always pass.
bool contains(const Polytope& poly, const Vector& y, double tol = kFeasTol);

/// Membership for any event kind; a union holds when some member holds.
bool contains(const SelectionEvent& event, const Vector& y,
              double tol = kFeasTol);

/// Searches for a point with A x <= b - margin by relaxed alternating
/// projections from `start` (or the origin). Empty result means the search
/// failed, which for a well-scaled polytope indicates infeasibility.
std::optional<Vector> find_interior_point(
    const Polytope& poly, double margin = 1e-7, int max_iter = 2000,
    const std::optional<Vector>& start = std::nullopt);

}  // namespace selinf
