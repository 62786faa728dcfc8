#include "selinf/events.hpp"

#include "selinf/truncnorm.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <algorithm>
#include <cmath>

#include "selinf/parallel.hpp"

namespace selinf {

namespace {

Matrix submatrix(const Matrix& X, const std::vector<int>& cols) {
  Matrix out(X.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.col(j) = X.col(cols[j]);
  return out;
}

std::vector<int> complement(int p, const std::vector<int>& M) {
  std::vector<bool> in(p, false);
  for (int j : M) in[j] = true;
  std::vector<int> out;
  for (int j = 0; j < p; ++j)
    if (!in[j]) out.push_back(j);
  return out;
}

void check_signs(const std::vector<int>& M, const std::vector<int>& z) {
  if (M.size() != z.size())
    throw InvalidInput("event: sign vector length does not match |M|");
  for (int s : z)
    if (s != 1 && s != -1) throw InvalidInput("event: signs must be +1 or -1");
}

// Shared core of lasso_event / enet_event. gamma = 0 gives the plain lasso
// blocks of the (M, z) characterization; gamma > 0 substitutes the damped
// Gram inverse everywhere it enters through P_M and (X_M')^dagger.
Polytope l1_event(const Matrix& X, const std::vector<int>& M,
                  const std::vector<int>& z, double lambda, double gamma,
                  const char* method) {
  if (M.empty()) throw InvalidInput("event: active set must be non-empty");
  check_signs(M, z);
  if (!(lambda > 0.0)) throw InvalidInput("event: lambda must be positive");
  const int n = static_cast<int>(X.rows());
  const int p = static_cast<int>(X.cols());
  const int m = static_cast<int>(M.size());
  const std::vector<int> inact = complement(p, M);
  const int q = static_cast<int>(inact.size());

  const Matrix XM = submatrix(X, M);
  Vector zv(m);
  for (int i = 0; i < m; ++i) zv(i) = z[i];

  // K = (X_M'X_M + gamma I)^{-1} applied through a factorization; the
  // projection is never materialized as an n x n matrix.
  Matrix KXt;  // K X_M'   (m x n)
  Vector Kz;   // K z      (m)
  if (gamma == 0.0) {
    Eigen::HouseholderQR<Matrix> qr(XM);
    const Matrix R = qr.matrixQR().topRows(m).triangularView<Eigen::Upper>();
    const double rmax = R.diagonal().cwiseAbs().maxCoeff();
    for (int i = 0; i < m; ++i)
      if (std::abs(R(i, i)) < 1e-12 * std::max(1.0, rmax))
        throw NumericalError("event: X_M is rank deficient");
    const Matrix Q = qr.householderQ() * Matrix::Identity(n, m);
    KXt = R.triangularView<Eigen::Upper>().solve(Q.transpose());
    Kz = R.triangularView<Eigen::Upper>().solve(
        R.transpose().triangularView<Eigen::Lower>().solve(zv));
  } else {
    Matrix G = XM.transpose() * XM;
    G.diagonal().array() += gamma;
    Eigen::LDLT<Matrix> ldlt(G);
    if (ldlt.info() != Eigen::Success)
      throw NumericalError("event: damped Gram matrix not positive definite");
    KXt = ldlt.solve(XM.transpose());
    Kz = ldlt.solve(zv);
  }

  const Matrix Xi = submatrix(X, inact);
  const Matrix XiR =
      Xi.transpose() - (Xi.transpose() * XM) * KXt;  // X_{-M}'(I - P_M), q x n
  const Vector cross = Xi.transpose() * (XM * Kz);   // X_{-M}'(X_M')^dagger z

  Matrix A(2 * q + m, n);
  Vector b(2 * q + m);
  A.topRows(q) = XiR / lambda;
  b.head(q) = Vector::Ones(q) - cross;
  A.middleRows(q, q) = -XiR / lambda;
  b.segment(q, q) = Vector::Ones(q) + cross;
  A.bottomRows(m) = -(zv.asDiagonal() * KXt);
  b.tail(m) = -lambda * (zv.asDiagonal() * Kz);

  EventMeta meta;
  meta.method = method;
  meta.active = M;
  meta.signs = z;
  meta.lambda = lambda;
  meta.gamma = gamma;
  return Polytope::make(std::move(A), std::move(b), std::move(meta));
}

}  // namespace

Polytope lasso_event(const Matrix& X, const std::vector<int>& M,
                     const std::vector<int>& z, double lambda) {
  return l1_event(X, M, z, lambda, 0.0, "lasso");
}

Polytope enet_event(const Matrix& X, const std::vector<int>& M,
                    const std::vector<int>& z, double lambda, double gamma) {
  return l1_event(X, M, z, lambda, gamma, "enet");
}

Polytope ms_event(const Matrix& X, const std::vector<int>& M,
                  const std::vector<int>& s) {
  if (M.empty()) throw InvalidInput("event: screening set must be non-empty");
  check_signs(M, s);
  const int n = static_cast<int>(X.rows());
  const int p = static_cast<int>(X.cols());
  const std::vector<int> inact = complement(p, M);
  const int k = static_cast<int>(M.size());
  const int q = static_cast<int>(inact.size());

  Matrix A(2 * k * q + k, n);
  int row = 0;
  for (int i = 0; i < k; ++i) {
    const Vector si_xi = s[i] * X.col(M[i]);
    for (int j : inact) {
      A.row(row++) = (X.col(j) - si_xi).transpose();
      A.row(row++) = (-X.col(j) - si_xi).transpose();
    }
    A.row(row++) = -si_xi.transpose();
  }
  EventMeta meta;
  meta.method = "screen";
  meta.active = M;
  meta.signs = s;
  return Polytope::make(std::move(A), Vector::Zero(2 * k * q + k),
                        std::move(meta));
}

Polytope omp_event(const Matrix& X, const StepwisePath& path) {
  const int n = static_cast<int>(X.rows());
  const int p = static_cast<int>(X.cols());
  const int k = static_cast<int>(path.steps.size());
  if (k < 1) throw InvalidInput("event: empty omp path");

  std::vector<Eigen::RowVectorXd> rows;
  std::vector<int> selected;
  Matrix R = Matrix::Identity(n, n);  // I - P over the selected prefix
  for (int step = 0; step < k; ++step) {
    const auto [pi, si] = path.steps[step];
    const Eigen::RowVectorXd proj_pi = si * (X.col(pi).transpose() * R);
    for (int j = 0; j < p; ++j) {
      if (j == pi ||
          std::find(selected.begin(), selected.end(), j) != selected.end())
        continue;
      const Eigen::RowVectorXd proj_j = X.col(j).transpose() * R;
      rows.push_back(proj_j - proj_pi);
      rows.push_back(-proj_j - proj_pi);
    }
    rows.push_back(-proj_pi);
    selected.push_back(pi);
    const Matrix XS = submatrix(X, selected);
    Eigen::ColPivHouseholderQR<Matrix> qr(XS);
    if (qr.rank() < static_cast<Eigen::Index>(selected.size()))
      throw NumericalError("event: omp path is rank deficient");
    R = Matrix::Identity(n, n) - XS * qr.solve(Matrix::Identity(n, n));
  }

  Matrix A(static_cast<Eigen::Index>(rows.size()), n);
  for (std::size_t i = 0; i < rows.size(); ++i) A.row(i) = rows[i];
  EventMeta meta;
  meta.method = "omp";
  for (const auto& [pi, si] : path.steps) {
    meta.active.push_back(pi);
    meta.signs.push_back(si);
    meta.step_order.push_back(pi);
  }
  return Polytope::make(std::move(A),
                        Vector::Zero(static_cast<Eigen::Index>(rows.size())),
                        std::move(meta));
}

Polytope nnls_event(const Matrix& X, const std::vector<int>& M) {
  const int n = static_cast<int>(X.rows());
  const int p = static_cast<int>(X.cols());
  if (M.empty()) throw InvalidInput("event: nnls active set must be non-empty");
  const std::vector<int> inact = complement(p, M);
  const Matrix XM = submatrix(X, M);
  Eigen::ColPivHouseholderQR<Matrix> qr(XM);
  if (qr.rank() < static_cast<Eigen::Index>(M.size()))
    throw NumericalError("event: X_M is rank deficient");
  const int m = static_cast<int>(M.size());
  const int q = static_cast<int>(inact.size());
  const Matrix Q = Eigen::HouseholderQR<Matrix>(XM).householderQ() *
                   Matrix::Identity(n, m);
  auto residualize = [&](const Matrix& cols) -> Matrix {
    return cols.transpose() - (cols.transpose() * Q) * Q.transpose();
  };
  // Pseudoinverse rows for the primal block, via the thin QR factors.
  const Matrix R = Eigen::HouseholderQR<Matrix>(XM)
                       .matrixQR()
                       .topRows(m)
                       .triangularView<Eigen::Upper>();
  const Matrix pinv = R.triangularView<Eigen::Upper>().solve(Q.transpose());

  Matrix A(3 * m + q, n);
  // The zero-dual blocks +-X_M'(I - P_M) vanish identically; writing the
  // exact zeros keeps them from resurfacing as 1e-16 noise constraints.
  A.topRows(2 * m).setZero();
  // Inactive block: a strictly positive dual means x_j'(I - P_M) y < 0.
  if (q > 0) A.middleRows(2 * m, q) = residualize(submatrix(X, inact));
  // Primal block: the active-set coefficients X_M^dagger y are nonnegative.
  A.bottomRows(m) = -pinv;
  EventMeta meta;
  meta.method = "nnls";
  meta.active = M;
  return Polytope::make(std::move(A), Vector::Zero(3 * m + q),
                        std::move(meta));
}

std::tuple<Polytope, SignedMaxEvent, Vector> gof_event(
    const Matrix& X, const std::vector<int>& M, const std::vector<int>& z,
    double lambda, const Vector& y) {
  const int n = static_cast<int>(X.rows());
  const int p = static_cast<int>(X.cols());
  if (M.empty() || static_cast<int>(M.size()) >= p)
    throw InvalidInput("gof: M must be a non-empty proper subset");
  const std::vector<int> inact = complement(p, M);
  const int q = static_cast<int>(inact.size());

  const Matrix XM = submatrix(X, M);
  Eigen::ColPivHouseholderQR<Matrix> qr(XM);
  if (qr.rank() < static_cast<Eigen::Index>(M.size()))
    throw NumericalError("gof: X_M is rank deficient");
  const Matrix Q =
      Eigen::HouseholderQR<Matrix>(XM).householderQ() *
      Matrix::Identity(n, static_cast<Eigen::Index>(M.size()));
  const Matrix Xi = submatrix(X, inact);
  const Matrix XiR =
      Xi.transpose() - (Xi.transpose() * Q) * Q.transpose();  // q x n

  const Vector r = XiR * y;  // partial correlations of inactive columns
  int jstar = 0;
  bool tie = false;
  for (int j = 1; j < q; ++j) {
    if (std::abs(r(j)) > std::abs(r(jstar))) {
      jstar = j;
      tie = false;
    } else if (std::abs(r(j)) == std::abs(r(jstar))) {
      tie = true;
    }
  }
  if (tie && q > 1)
    throw TieError("gof: tie in the max projected partial correlation");
  const int s = r(jstar) >= 0 ? 1 : -1;

  // Difference/sum rows: s*(r_jstar - r_i) > 0 and s*(r_jstar + r_i) > 0.
  SignedMaxEvent sm;
  sm.j_star = jstar;
  sm.column = inact[jstar];
  sm.s_star = s;
  sm.A2.resize(2 * (q - 1), n);
  int row = 0;
  for (int i = 0; i < q; ++i) {
    if (i == jstar) continue;
    sm.A2.row(row++) = -s * (XiR.row(jstar) - XiR.row(i));
    sm.A2.row(row++) = -s * (XiR.row(jstar) + XiR.row(i));
  }

  // The test direction is built from s, so the event must pin s as well:
  // s * r_jstar > 0. Pairwise sums imply it when q >= 2; with a single
  // inactive column it has to be stated explicitly.
  Polytope base = lasso_event(X, M, z, lambda);
  Matrix A(base.rows() + sm.A2.rows() + 1, n);
  Vector b(base.rows() + sm.A2.rows() + 1);
  A.topRows(base.rows()) = base.A;
  b.head(base.rows()) = base.b;
  A.middleRows(base.rows(), sm.A2.rows()) = sm.A2;
  A.bottomRows(1) = -s * XiR.row(jstar);
  b.tail(sm.A2.rows() + 1).setZero();

  EventMeta meta = base.meta;
  meta.method = "gof";
  meta.note = "jstar=" + std::to_string(inact[jstar] + 1) +
              " s=" + std::to_string(s);

  const Vector xj = X.col(inact[jstar]);
  const Vector eta = s * (xj - Q * (Q.transpose() * xj));
  return {Polytope::make(std::move(A), std::move(b), std::move(meta)), sm, eta};
}

Polytope intersect(const std::vector<Polytope>& events) {
  if (events.empty()) throw InvalidInput("intersect: no events given");
  const int n = events.front().dim();
  Eigen::Index rows = 0;
  for (const auto& e : events) {
    if (e.dim() != n) throw InvalidInput("intersect: dimension mismatch");
    rows += e.rows();
  }
  Matrix A(rows, n);
  Vector b(rows);
  Eigen::Index at = 0;
  EventMeta meta;
  meta.method = "intersect";
  for (const auto& e : events) {
    A.middleRows(at, e.rows()) = e.A;
    b.segment(at, e.rows()) = e.b;
    at += e.rows();
    if (!meta.note.empty()) meta.note += "+";
    meta.note += e.meta.method;
  }
  return Polytope::make(std::move(A), std::move(b), std::move(meta));
}

SelectionEvent union_over_signs(const Matrix& X, const std::vector<int>& M,
                                double lambda) {
  const int m = static_cast<int>(M.size());
  if (m < 1) throw InvalidInput("union: active set must be non-empty");
  if (m > kSignUnionCap)
    throw InvalidInput("union: |M| = " + std::to_string(m) +
                       " exceeds the sign-union cap of " +
                       std::to_string(kSignUnionCap));
  const long count = 1L << m;
  const Matrix XM = submatrix(X, M);
  Eigen::LDLT<Matrix> gram(XM.transpose() * XM);
  if (gram.info() != Eigen::Success)
    throw NumericalError("union: X_M is rank deficient");

  std::vector<std::optional<Polytope>> slots(count);
  parallel::for_each_index(count, [&](long mask) {
    std::vector<int> z(m);
    Vector zv(m);
    for (int i = 0; i < m; ++i) {
      z[i] = (mask >> i) & 1 ? 1 : -1;
      zv(i) = z[i];
    }
    Polytope poly = lasso_event(X, M, z, lambda);
    // Warm start: the response XM*(lambda z) + lambda (XM')^dagger z yields
    // U = lambda z exactly and is near-feasible when the pattern is
    // realizable at all.
    const Vector seed = XM * (lambda * zv) + lambda * (XM * gram.solve(zv));
    if (find_interior_point(poly, 1e-7, 500, seed)) slots[mask] = std::move(poly);
  });
  std::vector<Polytope> members;
  for (auto& s : slots)
    if (s) members.push_back(std::move(*s));
  if (members.empty())
    throw NumericalError("union: every sign pattern is infeasible");
  return SelectionEvent::union_of(std::move(members));
}

bool contains(const Polytope& poly, const Vector& y, double tol) {
  if (poly.rows() == 0) return true;
  if (poly.dim() != y.size())
    throw InvalidInput("contains: dimension mismatch");
  return ((poly.A * y - poly.b).array() <= tol).all();
}

bool contains(const SelectionEvent& event, const Vector& y, double tol) {
  if (event.is_single()) return contains(event.poly(), y, tol);
  if (event.is_union()) {
    for (const auto& p : event.members())
      if (contains(p, y, tol)) return true;
    return false;
  }
  return event.selector().same_outcome(y);
}

std::optional<Vector> find_interior_point(const Polytope& poly, double margin,
                                          int max_iter,
                                          const std::optional<Vector>& start) {
  const int n = poly.dim();
  Vector x = start.value_or(Vector::Zero(n));
  if (poly.rows() == 0) return x;

  // Normalize rows; identically-zero rows are feasible iff b_j >= 0.
  const Eigen::Index m = poly.rows();
  Matrix A(m, n);
  Vector b(m);
  Eigen::Index kept = 0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const double norm = poly.A.row(i).norm();
    if (norm < 1e-14) {
      if (poly.b(i) < -1e-12) return std::nullopt;
      continue;
    }
    A.row(kept) = poly.A.row(i) / norm;
    b(kept) = poly.b(i) / norm;
    ++kept;
  }
  A.conservativeResize(kept, n);
  b.conservativeResize(kept);
  if (kept == 0) return x;

  // Relaxed alternating projections onto the shrunk system A x <= b - margin.
  const double relax = 1.5;
  for (int it = 0; it < max_iter; ++it) {
    double worst = -kInf;
    Eigen::Index worst_i = -1;
    const Vector resid = A * x - b;
    for (Eigen::Index i = 0; i < kept; ++i)
      if (resid(i) > worst) {
        worst = resid(i);
        worst_i = i;
      }
    if (worst <= -margin) return x;
    x -= relax * (worst + margin) * A.row(worst_i).transpose();
  }
  return std::nullopt;
}

}  // namespace selinf
