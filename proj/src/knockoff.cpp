#include "selinf/knockoff.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <algorithm>
#include <cmath>

#include "selinf/blackbox.hpp"
#include "selinf/solvers.hpp"

namespace selinf {

Matrix equi_knockoffs(const Matrix& X) {
  const int n = static_cast<int>(X.rows());
  const int p = static_cast<int>(X.cols());
  if (n < 2 * p)
    throw InvalidInput("knockoffs: need n >= 2p (n=" + std::to_string(n) +
                       ", p=" + std::to_string(p) + ")");
  for (int j = 0; j < p; ++j)
    if (std::abs(X.col(j).norm() - 1.0) > 1e-6)
      throw InvalidInput("knockoffs: column " + std::to_string(j + 1) +
                         " is not unit-norm; standardize the design first");

  const Matrix G = X.transpose() * X;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(G);
  const double lam_min = eig.eigenvalues().minCoeff();
  if (lam_min < 1e-10)
    throw NumericalError("knockoffs: Gram matrix is numerically singular");
  const double s = std::min(2.0 * lam_min, 1.0);

  const Matrix Ginv = eig.eigenvectors() *
                      eig.eigenvalues().cwiseInverse().asDiagonal() *
                      eig.eigenvectors().transpose();

  // C'C = 2 s I - s^2 G^{-1}, PSD because s <= 2 lambda_min.
  Matrix B = -s * s * Ginv;
  B.diagonal().array() += 2.0 * s;
  Eigen::SelfAdjointEigenSolver<Matrix> eb(B);
  const Vector ev = eb.eigenvalues().cwiseMax(0.0);
  const Matrix C = ev.cwiseSqrt().asDiagonal() * eb.eigenvectors().transpose();

  // Orthonormal basis of a p-dimensional subspace orthogonal to span(X).
  Eigen::HouseholderQR<Matrix> qr(X);
  const Matrix Qfull = qr.householderQ() * Matrix::Identity(n, 2 * p);
  const Matrix U = Qfull.rightCols(p);

  const Matrix Xt = X - s * (X * Ginv) + U * C;

  if ((Xt.transpose() * Xt - G).lpNorm<Eigen::Infinity>() > 1e-8)
    throw NumericalError("knockoffs: Gram identity X~'X~ = X'X failed");
  Matrix cross_target = G;
  cross_target.diagonal().array() -= s;
  if ((X.transpose() * Xt - cross_target).lpNorm<Eigen::Infinity>() > 1e-8)
    throw NumericalError("knockoffs: cross-Gram identity failed");
  return Xt;
}

FdpPair fdp_estimates(const std::vector<int>& M, int p) {
  int real = 0, fake = 0;
  for (int j : M) {
    if (j < 0 || j >= 2 * p)
      throw InvalidInput("fdp: index out of [0, 2p)");
    (j < p ? real : fake)++;
  }
  FdpPair out;
  out.fdp = static_cast<double>(fake) / std::max(real, 1);
  out.fdp_plus = static_cast<double>(fake) / (std::max(real, 1) + 1);
  return out;
}

FdpPair fdp_from_w(const std::vector<double>& W, int t) {
  int neg = 0, pos = 0;
  for (double w : W) {
    if (w <= -t) ++neg;
    if (w >= t) ++pos;
  }
  FdpPair out;
  out.fdp = static_cast<double>(neg) / std::max(pos, 1);
  out.fdp_plus = static_cast<double>(neg) / (std::max(pos, 1) + 1);
  return out;
}

namespace {

KnockoffState select_with_knockoffs(const Matrix& X, Matrix X_tilde,
                                    const Vector& y,
                                    const std::vector<double>& lambdas,
                                    double alpha, bool plus) {
  const int p = static_cast<int>(X.cols());
  const int m = static_cast<int>(lambdas.size());
  for (int l = 0; l < m; ++l) {
    if (!(lambdas[l] > 0.0))
      throw InvalidInput("knockoff: lambdas must be positive");
    if (l > 0 && !(lambdas[l] < lambdas[l - 1]))
      throw InvalidInput("knockoff: lambdas must be strictly decreasing");
  }

  Matrix aug(X.rows(), 2 * p);
  aug << X, X_tilde;
  const RegressionData aug_data = RegressionData::make(aug, y);

  KnockoffState st;
  st.X_tilde = std::move(X_tilde);
  st.plus = plus;

  // First path index at which each augmented column becomes active.
  std::vector<int> first_entry(2 * p, 0);  // 1-based; 0 = never
  for (int l = 0; l < m; ++l) {
    const LassoFit fit = fit_lasso(aug_data, lambdas[l]);
    st.lasso_active.push_back(fit.active);
    st.lasso_signs.push_back(fit.signs);
    for (int c : fit.active)
      if (first_entry[c] == 0) first_entry[c] = l + 1;
  }

  // Survival depth: entering at path index e means membership in
  // M(1), ..., M(m + 1 - e), i.e. depth m + 1 - e.
  st.depth.assign(2 * p, 0);
  for (int c = 0; c < 2 * p; ++c)
    if (first_entry[c] > 0) st.depth[c] = m + 1 - first_entry[c];

  st.model_sequence.resize(m);
  for (int t = 1; t <= m; ++t)
    for (int c = 0; c < 2 * p; ++c)
      if (st.depth[c] >= t) st.model_sequence[t - 1].push_back(c);

  st.W.assign(p, 0.0);
  for (int j = 0; j < p; ++j) {
    const int dr = st.depth[j], dk = st.depth[j + p];
    if (dr > dk)
      st.W[j] = dr;
    else if (dk > dr)
      st.W[j] = -dk;
  }

  st.fdp_curve.resize(m);
  st.fdp_plus_curve.resize(m);
  for (int t = 1; t <= m; ++t) {
    const FdpPair f = fdp_estimates(st.model_sequence[t - 1], p);
    st.fdp_curve[t - 1] = f.fdp;
    // The FDR-controlling variant needs the +1 on the knockoff count: with
    // the +1 in the denominator instead, any all-real prefix passes at every
    // threshold and the false discovery rate is not controlled.
    int real = 0, fake = 0;
    for (int c : st.model_sequence[t - 1]) (c < p ? real : fake)++;
    st.fdp_plus_curve[t - 1] =
        static_cast<double>(1 + fake) / std::max(real, 1);
    if (st.T < 0 && f.fdp <= alpha) st.T = t;
    if (st.T_plus < 0 && st.fdp_plus_curve[t - 1] <= alpha) st.T_plus = t;
  }

  const int chosen = plus ? st.T_plus : st.T;
  if (chosen > 0)
    for (int j = 0; j < p; ++j)
      if (st.depth[j] >= chosen) st.selected.push_back(j);
  return st;
}

}  // namespace

KnockoffState knockoff_select(const RegressionData& data,
                              const std::vector<double>& lambdas, double alpha,
                              bool plus) {
  return select_with_knockoffs(data.X, equi_knockoffs(data.X), data.y, lambdas,
                               alpha, plus);
}

std::vector<SelectiveInterval> knockoff_ci(const RegressionData& data,
                                           const std::vector<double>& lambdas,
                                           const KnockoffState& state,
                                           double alpha, bool use_blackbox,
                                           int grid_points) {
  if (state.selected.empty()) return {};
  const NoiseModel& noise = data.require_noise();
  const int p = data.p();

  std::vector<SelectiveInterval> out;

  if (use_blackbox) {
    for (int j : state.selected) {
      const Contrast eta =
          coef_contrast(data.X, state.selected, j, noise, data.names);
      auto same = [&, j](const Vector& yprime) {
        const KnockoffState s2 =
            select_with_knockoffs(data.X, state.X_tilde, yprime, lambdas,
                                  alpha, state.plus);
        return std::find(s2.selected.begin(), s2.selected.end(), j) !=
               s2.selected.end();
      };
      GridSpec grid;
      grid.points = grid_points;
      SelectiveInterval ci;
      ci.level = 1.0 - alpha;
      ci.label = eta.label;
      ci.conditioning = "blackbox knockoff membership";
      try {
        ci.lower = approx_invert_mu(same, data.y, eta, noise, grid,
                                    1.0 - alpha / 2);
        ci.upper = approx_invert_mu(same, data.y, eta, noise, grid, alpha / 2);
      } catch (const NumericalError& e) {
        ci.warning = e.what();
      }
      out.push_back(std::move(ci));
    }
    return out;
  }

  // Path-event route: intersect the per-lambda sign-union regions along the
  // contrast direction. Large active sets fall back to the observed-sign
  // polytope (finer but still valid conditioning).
  Matrix aug(data.n(), 2 * p);
  aug << data.X, state.X_tilde;

  std::vector<SelectionEvent> events;
  for (std::size_t l = 0; l < state.lasso_active.size(); ++l) {
    const auto& active = state.lasso_active[l];
    const double lambda = lambdas[l];
    if (active.empty()) {
      Matrix A(4 * p, data.n());
      A.topRows(2 * p) = aug.transpose() / lambda;
      A.bottomRows(2 * p) = -aug.transpose() / lambda;
      events.push_back(SelectionEvent::single(
          Polytope::make(std::move(A), Vector::Ones(4 * p))));
    } else if (static_cast<int>(active.size()) <= kSignUnionCap) {
      events.push_back(union_over_signs(aug, active, lambda));
    } else {
      events.push_back(SelectionEvent::single(
          lasso_event(aug, active, state.lasso_signs[l], lambda)));
    }
  }

  for (int j : state.selected) {
    const Contrast eta =
        coef_contrast(data.X, state.selected, j, noise, data.names);
    TruncationRegion region = TruncationRegion::whole_line();
    for (const auto& ev : events) {
      const TruncationResult tr = truncation_interval(ev, eta, noise, data.y);
      region = region.intersect(tr.region);
    }
    const double obs = eta.eta.dot(data.y);
    SelectiveInterval ci;
    ci.level = 1.0 - alpha;
    ci.label = eta.label;
    ci.conditioning = "knockoff path sign-union events";
    try {
      ci.lower = invert_mu(obs, eta.scale, region, 1.0 - alpha / 2);
    } catch (const NumericalError& e) {
      ci.lower = -kInf;
      ci.warning = std::string("lower endpoint unbounded: ") + e.what();
    }
    try {
      ci.upper = invert_mu(obs, eta.scale, region, alpha / 2);
    } catch (const NumericalError& e) {
      ci.upper = kInf;
      if (!ci.warning.empty()) ci.warning += "; ";
      ci.warning += std::string("upper endpoint unbounded: ") + e.what();
    }
    out.push_back(std::move(ci));
  }
  return out;
}

}  // namespace selinf
