#include "selinf/inference.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <cmath>

namespace selinf {

namespace {

struct SliceBounds {
  double v_minus, v_plus, v_zero;
  Vector alpha_vec;
};

// One-polytope slice: a = A Sigma eta / (eta'Sigma eta), then
// V-/V+ over the rows with negative/positive a and V0 over the zero rows.
// Rows whose norm is negligible relative to the matrix scale are structural
// zeros (residualized blocks), not constraints; dividing by their fp noise
// would fabricate bounds.
SliceBounds slice_bounds(const Polytope& poly, const Vector& dir,
                         double dir_norm, const Vector& y, double observed) {
  SliceBounds out{-kInf, kInf, kInf, {}};
  const Eigen::Index m = poly.rows();
  out.alpha_vec = poly.A * dir;
  if (m == 0) return out;
  const Vector Ay = poly.A * y;
  const double max_row_norm = poly.A.rowwise().norm().maxCoeff();
  for (Eigen::Index j = 0; j < m; ++j) {
    const double aj = out.alpha_vec(j);
    const double row_scale =
        std::max(poly.A.row(j).norm(), 1e-4 * max_row_norm);
    const double zero_tol = 1e-11 * row_scale * dir_norm;
    const double resid = poly.b(j) - Ay(j);
    if (aj > zero_tol) {
      out.v_plus = std::min(out.v_plus, observed + resid / aj);
    } else if (aj < -zero_tol) {
      out.v_minus = std::max(out.v_minus, observed + resid / aj);
    } else {
      out.v_zero = std::min(out.v_zero, resid);
    }
  }
  return out;
}

double side_pvalue(double pivot, Side side) {
  switch (side) {
    case Side::lower:
      return pivot;
    case Side::upper:
      return 1.0 - pivot;
    case Side::two_sided:
      return std::min(1.0, 2.0 * std::min(pivot, 1.0 - pivot));
  }
  return 1.0;
}

}  // namespace

TruncationResult truncation_interval(const SelectionEvent& event,
                                     const Contrast& eta,
                                     const NoiseModel& noise, const Vector& y) {
  if (event.is_blackbox())
    throw InvalidInput(
        "truncation_interval: blackbox events go through approx_pvalue");
  if (!contains(event, y))
    throw NumericalError(
        "truncation_interval: y does not satisfy the selection event");

  const double scale = eta.scale;
  const Vector dir = noise.apply(eta.eta) / scale;  // Sigma eta / (eta'S eta)
  const double dir_norm = dir.norm();
  const double observed = eta.eta.dot(y);

  TruncationResult res;
  res.observed = observed;

  auto check = [&](const SliceBounds& sb, bool holds) {
    if (!holds) return;
    if (sb.v_plus < sb.v_minus - 1e-7)
      throw NumericalError("truncation_interval: V+ < V- (" +
                           std::to_string(sb.v_plus) + " < " +
                           std::to_string(sb.v_minus) +
                           "); event encoding and solver disagree");
    if (sb.v_zero < -1e-7)
      throw NumericalError(
          "truncation_interval: V0 < 0 at the observed response");
  };

  if (event.is_single()) {
    const SliceBounds sb = slice_bounds(event.poly(), dir, dir_norm, y, observed);
    check(sb, true);
    res.v_minus = sb.v_minus;
    res.v_plus = sb.v_plus;
    res.v_zero = sb.v_zero;
    res.alpha_vec = sb.alpha_vec;
    res.region = TruncationRegion::interval(sb.v_minus, sb.v_plus);
    return res;
  }

  // Union event: each member whose slice is non-empty (and whose constant
  // rows hold) contributes [V-, V+]; merge into disjoint intervals.
  std::vector<std::pair<double, double>> pieces;
  bool found_observed = false;
  for (const auto& member : event.members()) {
    const SliceBounds sb = slice_bounds(member, dir, dir_norm, y, observed);
    if (sb.v_zero < -kFeasTol || !(sb.v_minus < sb.v_plus)) continue;
    pieces.emplace_back(sb.v_minus, sb.v_plus);
    if (contains(member, y)) {
      check(sb, true);
      found_observed = true;
      res.v_minus = sb.v_minus;
      res.v_plus = sb.v_plus;
      res.v_zero = sb.v_zero;
      res.alpha_vec = sb.alpha_vec;
    }
  }
  if (!found_observed)
    throw NumericalError(
        "truncation_interval: no union member contains the observed y");
  res.region = TruncationRegion::from_intervals(std::move(pieces));
  return res;
}

PivotResult selective_pvalue(const SelectionEvent& event, const Contrast& eta,
                             const NoiseModel& noise, const Vector& y,
                             double null_value, Side side) {
  const TruncationResult tr = truncation_interval(event, eta, noise, y);
  PivotResult res;
  res.pivot = tn_cdf(tr.observed, null_value, eta.scale, tr.region);
  res.p_value = side_pvalue(res.pivot, side);
  res.side = side;
  res.null_value = null_value;
  res.eta = eta;
  res.observed = tr.observed;
  res.region = tr.region;
  return res;
}

Contrast coef_contrast(const Matrix& X, const std::vector<int>& M, int j,
                       const NoiseModel& noise,
                       const std::vector<std::string>& names) {
  const auto pos_it = std::find(M.begin(), M.end(), j);
  if (pos_it == M.end())
    throw InvalidInput("coef_contrast: j is not in the active set");
  const Eigen::Index pos = pos_it - M.begin();

  const Eigen::Index m = static_cast<Eigen::Index>(M.size());
  Matrix XM(X.rows(), m);
  for (std::size_t i = 0; i < M.size(); ++i) XM.col(i) = X.col(M[i]);
  Eigen::ColPivHouseholderQR<Matrix> rank_check(XM);
  if (rank_check.rank() < m)
    throw NumericalError("coef_contrast: X_M is rank deficient");
  // eta = (X_M')^dagger e_pos = Q R^{-T} e_pos from the thin QR of X_M.
  Eigen::HouseholderQR<Matrix> qr(XM);
  const Matrix R = qr.matrixQR().topRows(m).triangularView<Eigen::Upper>();
  const Matrix Q = qr.householderQ() * Matrix::Identity(X.rows(), m);
  Vector eta = Q * R.transpose().triangularView<Eigen::Lower>().solve(
                       Vector::Unit(m, pos));

  std::string label = names.empty() ? "coef " + std::to_string(j + 1)
                                    : "coef '" + names[j] + "'";
  return Contrast::make(std::move(eta), noise, std::move(label));
}

SelectiveInterval selective_ci(const SelectionEvent& event, const Contrast& eta,
                               const NoiseModel& noise, const Vector& y,
                               double alpha) {
  if (!(alpha > 0.0 && alpha < 0.5))
    throw InvalidInput("selective_ci: alpha must lie in (0, 0.5)");
  const TruncationResult tr = truncation_interval(event, eta, noise, y);
  SelectiveInterval ci;
  ci.level = 1.0 - alpha;
  ci.label = eta.label;
  try {
    ci.lower = invert_mu(tr.observed, eta.scale, tr.region, 1.0 - alpha / 2);
  } catch (const NumericalError& e) {
    ci.lower = -kInf;
    ci.warning = std::string("lower endpoint unbounded: ") + e.what();
  }
  try {
    ci.upper = invert_mu(tr.observed, eta.scale, tr.region, alpha / 2);
  } catch (const NumericalError& e) {
    ci.upper = kInf;
    if (!ci.warning.empty()) ci.warning += "; ";
    ci.warning += std::string("upper endpoint unbounded: ") + e.what();
  }
  return ci;
}

std::vector<SelectiveInterval> fcr_batch(const SelectionEvent& event,
                                         const Matrix& X, const Vector& y,
                                         const NoiseModel& noise, double alpha,
                                         const std::vector<std::string>& names) {
  const EventMeta& meta =
      event.is_single() ? event.poly().meta : event.members().front().meta;
  if (meta.active.empty())
    throw InvalidInput("fcr_batch: event carries no active set");
  std::vector<SelectiveInterval> out;
  out.reserve(meta.active.size());
  for (int j : meta.active) {
    const Contrast eta = coef_contrast(X, meta.active, j, noise, names);
    SelectiveInterval ci = selective_ci(event, eta, noise, y, alpha);
    ci.conditioning = meta.method;
    out.push_back(std::move(ci));
  }
  return out;
}

PivotResult gof_test(const Matrix& X, const Vector& y,
                     const std::vector<int>& M, const std::vector<int>& z,
                     double lambda, const NoiseModel& noise) {
  auto [poly, sm, eta_raw] = gof_event(X, M, z, lambda, y);
  const Contrast eta = Contrast::make(std::move(eta_raw), noise, "gof max");
  return selective_pvalue(SelectionEvent::single(std::move(poly)), eta, noise,
                          y, 0.0, Side::upper);
}

PivotResult composite_test(const SelectionEvent& event, const Contrast& eta,
                           const NoiseModel& noise, const Vector& y,
                           double delta0) {
  if (delta0 < 0.0)
    throw InvalidInput("composite_test: delta0 must be >= 0");
  return selective_pvalue(event, eta, noise, y, delta0, Side::upper);
}

PathState path_fwer(const RegressionData& data,
                    const std::vector<double>& lambdas, double alpha) {
  if (lambdas.empty()) throw InvalidInput("path: empty lambda sequence");
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    if (!(lambdas[i] > 0.0))
      throw InvalidInput("path: lambdas must be positive");
    if (i > 0 && !(lambdas[i] < lambdas[i - 1]))
      throw InvalidInput("path: lambdas must be strictly decreasing");
  }
  const NoiseModel& noise = data.require_noise();
  const Matrix& X = data.X;
  const int p = data.p();

  PathState st;
  std::vector<Polytope> events;
  for (double lambda : lambdas) {
    st.lambdas.push_back(lambda);
    LassoFit fit = fit_lasso(data, lambda);

    if (fit.active.empty()) {
      // {M_hat = empty} is itself affine: |x_j'y| <= lambda for every j.
      Matrix A(2 * p, data.n());
      A.topRows(p) = X.transpose() / lambda;
      A.bottomRows(p) = -X.transpose() / lambda;
      EventMeta meta;
      meta.method = "lasso";
      meta.lambda = lambda;
      meta.note = "empty active set";
      events.push_back(
          Polytope::make(std::move(A), Vector::Ones(2 * p), std::move(meta)));
      st.fits.push_back(std::move(fit));
      st.gof_pvalues.emplace_back(std::nullopt);
      st.skip_reasons.push_back("empty active set");
      continue;
    }

    if (static_cast<int>(fit.active.size()) >= p) {
      events.push_back(lasso_event(X, fit.active, fit.signs, lambda));
      st.fits.push_back(std::move(fit));
      st.gof_pvalues.emplace_back(std::nullopt);
      st.skip_reasons.push_back("no inactive variables");
      continue;
    }

    auto [gof_poly, sm, eta_raw] =
        gof_event(X, fit.active, fit.signs, lambda, data.y);
    std::vector<Polytope> pieces = events;  // events from earlier lambdas
    pieces.push_back(gof_poly);
    const Contrast eta = Contrast::make(std::move(eta_raw), noise, "gof max");
    PivotResult pr =
        selective_pvalue(SelectionEvent::single(intersect(pieces)), eta, noise,
                         data.y, 0.0, Side::upper);
    const bool reject = pr.pivot > 1.0 - alpha;

    // The stacked conditioning keeps only the per-lambda selection event;
    // the argmax block belongs to this test alone.
    events.push_back(lasso_event(X, fit.active, fit.signs, lambda));
    st.fits.push_back(std::move(fit));
    st.gof_pvalues.emplace_back(std::move(pr));
    st.skip_reasons.push_back("");

    if (!reject) {
      st.stop_index = static_cast<int>(st.lambdas.size()) - 1;
      break;
    }
  }
  if (st.stop_index < 0) st.stop_index = static_cast<int>(st.lambdas.size());
  st.cumulative = intersect(events);
  return st;
}

FdrResult full_model_fdr(const RegressionData& data, double lambda,
                         double alpha) {
  const int n = data.n(), p = data.p();
  if (n < p)
    throw InvalidInput(
        "full-model inference requires n >= p; the debiased estimator for "
        "n < p is not supported");
  {
    Eigen::ColPivHouseholderQR<Matrix> qr(data.X);
    if (qr.rank() < p)
      throw InvalidInput("full-model inference requires X of full column rank");
  }
  const NoiseModel& noise = data.require_noise();

  const LassoFit fit = fit_lasso(data, lambda);
  FdrResult res;
  res.active = fit.active;
  res.p_values.resize(static_cast<Eigen::Index>(fit.active.size()));
  if (fit.active.empty()) return res;

  const SelectionEvent event = SelectionEvent::single(
      lasso_event(data.X, fit.active, fit.signs, lambda));
  for (std::size_t i = 0; i < fit.active.size(); ++i) {
    const Contrast eta =
        coef_contrast(data.X, fit.active, fit.active[i], noise, data.names);
    res.p_values(i) =
        selective_pvalue(event, eta, noise, data.y, 0.0, Side::two_sided)
            .p_value;
  }

  // Benjamini-Yekutieli step-up over the |M| selected hypotheses.
  const int m = static_cast<int>(fit.active.size());
  double harmonic = 0.0;
  for (int i = 1; i <= m; ++i) harmonic += 1.0 / i;
  std::vector<int> order(m);
  for (int i = 0; i < m; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return res.p_values(a) < res.p_values(b); });
  int k = 0;
  for (int i = 1; i <= m; ++i)
    if (res.p_values(order[i - 1]) <= i * alpha / (m * harmonic)) k = i;
  for (int i = 0; i < k; ++i) res.rejected.push_back(fit.active[order[i]]);
  std::sort(res.rejected.begin(), res.rejected.end());
  return res;
}

}  // namespace selinf
