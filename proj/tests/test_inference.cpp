#include <doctest.h>

#include <Eigen/QR>
#include <cmath>

#include "selinf/harness.hpp"
#include "selinf/inference.hpp"
#include "selinf/rng.hpp"

using namespace selinf;

namespace {

Matrix random_design(Rng& rng, int n, int p) {
  Matrix X(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) X(i, j) = rng.normal();
  for (int j = 0; j < p; ++j) X.col(j) /= X.col(j).norm();
  return X;
}

Vector random_response(Rng& rng, int n, double scale = 1.5) {
  Vector y(n);
  for (int i = 0; i < n; ++i) y(i) = scale * rng.normal();
  return y;
}

constexpr double kZ95 = 1.6448536269514722;   // Phi^{-1}(0.95)
constexpr double kZ975 = 1.9599639845400545;  // Phi^{-1}(0.975)

}  // namespace

TEST_CASE("truncation bounds on the unit box") {
  Matrix A(2, 1);
  A << 1, -1;
  Vector b(2);
  b << 1, 1;
  // Embed in 2-D with eta = e1.
  Matrix A2(2, 2);
  A2 << 1, 0, -1, 0;
  const auto event = SelectionEvent::single(Polytope::make(A2, b));
  const NoiseModel noise = NoiseModel::isotropic(1.0);
  const Contrast eta = Contrast::make(Vector::Unit(2, 0), noise, "e1");
  const TruncationResult tr =
      truncation_interval(event, eta, noise, Vector::Zero(2));
  CHECK(tr.v_minus == doctest::Approx(-1.0));
  CHECK(tr.v_plus == doctest::Approx(1.0));
  CHECK(tr.alpha_vec(0) == doctest::Approx(1.0));
  CHECK(tr.alpha_vec(1) == doctest::Approx(-1.0));
}

TEST_CASE("truncation bounds on the worked lasso example") {
  const Matrix X = Matrix::Identity(2, 2);
  const auto event = SelectionEvent::single(lasso_event(X, {0}, {1}, 1.0));
  const NoiseModel noise = NoiseModel::isotropic(1.0);
  const Contrast eta = Contrast::make(Vector::Unit(2, 0), noise, "e1");
  Vector y(2);
  y << 3.0, 0.5;
  const TruncationResult tr = truncation_interval(event, eta, noise, y);
  CHECK(tr.v_minus == doctest::Approx(1.0));
  CHECK(tr.v_plus == kInf);
  CHECK(tr.v_zero == doctest::Approx(0.5));
  CHECK(tr.observed == doctest::Approx(3.0));
}

TEST_CASE("truncation bounds are invariant along the contrast direction") {
  Rng rng(88);
  const Matrix X = random_design(rng, 12, 5);
  const NoiseModel noise = NoiseModel::isotropic(1.3);
  int done = 0;
  while (done < 100) {
    const Vector y = random_response(rng, 12);
    const LassoFit fit = fit_lasso(RegressionData::make(X, y), 0.4);
    if (fit.active.empty()) continue;
    const auto event =
        SelectionEvent::single(lasso_event(X, fit.active, fit.signs, 0.4));
    const Contrast eta = coef_contrast(X, fit.active, fit.active[0], noise);
    const TruncationResult base = truncation_interval(event, eta, noise, y);
    const Vector dir = noise.apply(eta.eta) / eta.scale;
    const double c = rng.uniform(-0.2, 0.2);
    const Vector y2 = y + c * dir;
    if (!contains(event, y2)) continue;
    const TruncationResult moved = truncation_interval(event, eta, noise, y2);
    const auto same = [](double a, double b) {
      if (std::isinf(a) || std::isinf(b)) return a == b;
      return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(b));
    };
    CHECK(same(moved.v_minus, base.v_minus));
    CHECK(same(moved.v_plus, base.v_plus));
    ++done;
  }
}

TEST_CASE("truncation_interval rejects a response outside the event") {
  const Matrix X = Matrix::Identity(2, 2);
  const auto event = SelectionEvent::single(lasso_event(X, {0}, {1}, 1.0));
  const NoiseModel noise = NoiseModel::isotropic(1.0);
  const Contrast eta = Contrast::make(Vector::Unit(2, 0), noise, "e1");
  CHECK_THROWS_AS(truncation_interval(event, eta, noise, Vector::Zero(2)),
                  NumericalError);
}

TEST_CASE("selective p-value reduces to the classical z-test untruncated") {
  Matrix A(0, 2);
  const auto event = SelectionEvent::single(Polytope::make(A, Vector(0)));
  const NoiseModel noise = NoiseModel::isotropic(1.0);
  const Contrast eta = Contrast::make(Vector::Unit(2, 0), noise, "e1");
  Vector y(2);
  y << kZ975, 0.0;
  const PivotResult pr =
      selective_pvalue(event, eta, noise, y, 0.0, Side::two_sided);
  CHECK(pr.p_value == doctest::Approx(0.05).epsilon(1e-6));
}

TEST_CASE("selective p-value on the worked lasso example") {
  const Matrix X = Matrix::Identity(2, 2);
  const auto event = SelectionEvent::single(lasso_event(X, {0}, {1}, 1.0));
  const NoiseModel noise = NoiseModel::isotropic(1.0);
  const Contrast eta = Contrast::make(Vector::Unit(2, 0), noise, "e1");
  Vector y(2);
  y << 3.0, 0.5;
  const PivotResult pr =
      selective_pvalue(event, eta, noise, y, 0.0, Side::upper);
  CHECK(pr.pivot == doctest::Approx(0.99149).epsilon(2e-4));
  CHECK(pr.p_value == doctest::Approx(0.00851).epsilon(2e-2));
}

TEST_CASE("coef_contrast reproduces OLS coefficients") {
  const NoiseModel noise = NoiseModel::isotropic(1.0);
  {
    const Matrix X = Matrix::Identity(2, 2);
    const Contrast eta = coef_contrast(X, {0}, 0, noise);
    CHECK((eta.eta - Vector::Unit(2, 0)).lpNorm<Eigen::Infinity>() < 1e-12);
  }
  Rng rng(5150);
  for (int it = 0; it < 200; ++it) {
    const int n = 14, p = 6;
    const Matrix X = random_design(rng, n, p);
    const Vector y = random_response(rng, n);
    std::vector<int> M = {0, 2, 4};
    Matrix XM(n, 3);
    for (int i = 0; i < 3; ++i) XM.col(i) = X.col(M[i]);
    const Vector ols = XM.colPivHouseholderQr().solve(y);
    for (int i = 0; i < 3; ++i) {
      const Contrast eta = coef_contrast(X, M, M[i], noise);
      CHECK(eta.eta.dot(y) == doctest::Approx(ols(i)).epsilon(1e-9));
    }
  }
  CHECK_THROWS_AS(coef_contrast(Matrix::Identity(3, 3), {0, 1}, 2, noise),
                  InvalidInput);
}

TEST_CASE("selective CI reduces to the classical z-interval untruncated") {
  Matrix A(0, 2);
  const auto event = SelectionEvent::single(Polytope::make(A, Vector(0)));
  const NoiseModel noise = NoiseModel::isotropic(1.0);
  const Contrast eta = Contrast::make(Vector::Unit(2, 0), noise, "e1");
  Vector y(2);
  y << 2.0, 0.0;
  const SelectiveInterval ci = selective_ci(event, eta, noise, y, 0.10);
  CHECK(ci.lower == doctest::Approx(2.0 - kZ95).epsilon(1e-6));
  CHECK(ci.upper == doctest::Approx(2.0 + kZ95).epsilon(1e-6));
  CHECK(ci.level == doctest::Approx(0.90));
}

TEST_CASE("CI endpoints and two-sided p-values are dual") {
  Rng rng(404);
  const Matrix X = random_design(rng, 12, 4);
  const NoiseModel noise = NoiseModel::isotropic(1.0);
  int done = 0;
  while (done < 20) {
    const Vector y = random_response(rng, 12);
    const LassoFit fit = fit_lasso(RegressionData::make(X, y), 0.4);
    if (fit.active.empty()) continue;
    const auto event =
        SelectionEvent::single(lasso_event(X, fit.active, fit.signs, 0.4));
    const Contrast eta = coef_contrast(X, fit.active, fit.active[0], noise);
    const double alpha = 0.1;
    const SelectiveInterval ci = selective_ci(event, eta, noise, y, alpha);
    if (!std::isfinite(ci.lower) || !std::isfinite(ci.upper)) continue;
    const auto p_at = [&](double null_value) {
      return selective_pvalue(event, eta, noise, y, null_value,
                              Side::two_sided)
          .p_value;
    };
    CHECK(p_at(ci.lower) == doctest::Approx(alpha).epsilon(1e-4));
    CHECK(p_at(ci.upper) == doctest::Approx(alpha).epsilon(1e-4));
    CHECK(p_at(0.5 * (ci.lower + ci.upper)) > alpha);
    ++done;
  }
}

TEST_CASE("fcr_batch with one active variable equals selective_ci") {
  const Matrix X = Matrix::Identity(2, 2);
  const NoiseModel noise = NoiseModel::isotropic(1.0);
  Vector y(2);
  y << 3.0, 0.5;
  const auto event = SelectionEvent::single(lasso_event(X, {0}, {1}, 1.0));
  const auto batch = fcr_batch(event, X, y, noise, 0.1);
  REQUIRE(batch.size() == 1);
  const Contrast eta = coef_contrast(X, {0}, 0, noise);
  const SelectiveInterval single = selective_ci(event, eta, noise, y, 0.1);
  CHECK(batch[0].lower == doctest::Approx(single.lower).epsilon(1e-9));
  CHECK(batch[0].upper == doctest::Approx(single.upper).epsilon(1e-9));
}

TEST_CASE("gof test on the single-inactive orthogonal case has a closed form") {
  const Matrix X = Matrix::Identity(2, 2);
  Vector y(2);
  y << 3.0, 0.5;
  const NoiseModel noise = NoiseModel::isotropic(1.0);
  const PivotResult pr = gof_test(X, y, {0}, {1}, 1.0, noise);
  // eta = e2; the subgradient rows give |y2| < 1 and conditioning on the
  // observed argmax sign adds y2 > 0, so the region is [0, 1].
  const auto phi = [](double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); };
  const double expect = (phi(0.5) - phi(0.0)) / (phi(1.0) - phi(0.0));
  CHECK(pr.pivot == doctest::Approx(expect).epsilon(1e-9));
  CHECK(pr.p_value == doctest::Approx(1.0 - expect).epsilon(1e-9));
}

TEST_CASE("composite test reduces to the simple test at delta zero") {
  Rng rng(808);
  const Matrix X = random_design(rng, 10, 4);
  const NoiseModel noise = NoiseModel::isotropic(1.0);
  for (int it = 0; it < 10; ++it) {
    const Vector y = random_response(rng, 10);
    const LassoFit fit = fit_lasso(RegressionData::make(X, y), 0.4);
    if (fit.active.empty()) continue;
    const auto event =
        SelectionEvent::single(lasso_event(X, fit.active, fit.signs, 0.4));
    const Contrast eta = coef_contrast(X, fit.active, fit.active[0], noise);
    const PivotResult simple =
        selective_pvalue(event, eta, noise, y, 0.0, Side::upper);
    const PivotResult comp = composite_test(event, eta, noise, y, 0.0);
    CHECK(comp.pivot == doctest::Approx(simple.pivot).epsilon(1e-12));
    // A huge composite bound never rejects.
    const PivotResult wide = composite_test(event, eta, noise, y, 1e6);
    CHECK(wide.p_value == doctest::Approx(1.0).epsilon(1e-9));
    CHECK_THROWS_AS(composite_test(event, eta, noise, y, -1.0), InvalidInput);
    break;
  }
}

TEST_CASE("path procedure with a single lambda matches gof_test") {
  Rng rng(711);
  const Matrix X = random_design(rng, 14, 5);
  const NoiseModel noise = NoiseModel::isotropic(1.0);
  for (int it = 0; it < 20; ++it) {
    Vector y = random_response(rng, 14);
    RegressionData d = RegressionData::make(X, y, noise);
    const LassoFit fit = fit_lasso(d, 0.45);
    if (fit.active.empty() || fit.active.size() >= 5) continue;
    const PathState st = path_fwer(d, {0.45}, 0.1);
    REQUIRE(st.gof_pvalues.size() == 1);
    REQUIRE(st.gof_pvalues[0].has_value());
    const PivotResult direct =
        gof_test(X, y, fit.active, fit.signs, 0.45, noise);
    CHECK(st.gof_pvalues[0]->pivot == doctest::Approx(direct.pivot).epsilon(1e-10));
    break;
  }
}

TEST_CASE("path procedure stops at the first acceptance and stacks events") {
  Rng rng(914);
  const Matrix X = random_design(rng, 16, 5);
  const NoiseModel noise = NoiseModel::isotropic(1.0);
  const Vector y = random_response(rng, 16);
  RegressionData d = RegressionData::make(X, y, noise);
  const PathState st = path_fwer(d, {0.8, 0.5, 0.3}, 0.1);
  CHECK(st.lambdas.size() == st.gof_pvalues.size());
  CHECK(st.lambdas.size() == st.skip_reasons.size());
  CHECK(st.stop_index >= 0);
  // Everything after the stop index was never visited.
  CHECK(st.lambdas.size() <= 3);
  if (st.stop_index < static_cast<int>(st.lambdas.size())) {
    REQUIRE(st.gof_pvalues[st.stop_index].has_value());
    CHECK(st.gof_pvalues[st.stop_index]->pivot <= 1.0 - 0.1);
  }
  CHECK(contains(st.cumulative, y, 1e-8));
  CHECK_THROWS_AS(path_fwer(d, {0.5, 0.8}, 0.1), InvalidInput);
}

TEST_CASE("full-model BY-FDR handles the simple cases") {
  const Matrix X = Matrix::Identity(2, 2);
  {
    Vector y(2);
    y << 6.0, 0.1;
    RegressionData d =
        RegressionData::make(X, y, NoiseModel::isotropic(1.0));
    const FdrResult r = full_model_fdr(d, 1.0, 0.2);
    REQUIRE(r.active == std::vector<int>{0});
    // Single hypothesis: BY reduces to p <= alpha.
    CHECK((r.p_values(0) <= 0.2) == (r.rejected.size() == 1));
  }
  {
    // n < p is the unsupported debiased configuration.
    Matrix wide(2, 3);
    wide << 1, 0, 0.5, 0, 1, 0.5;
    RegressionData d = RegressionData::make(
        wide, Vector::Ones(2), NoiseModel::isotropic(1.0));
    CHECK_THROWS_AS(full_model_fdr(d, 0.5, 0.1), InvalidInput);
  }
}

TEST_CASE("union-event truncation merges member intervals and stays uniform") {
  Rng rng(2718);
  const Matrix X = random_design(rng, 10, 3);
  const NoiseModel noise = NoiseModel::isotropic(1.0);
  const Vector mu = Vector::Zero(10);

  // Find an observed outcome, build the sign-union event for its active set.
  Vector y0;
  LassoFit fit;
  do {
    y0 = random_response(rng, 10);
    fit = fit_lasso(RegressionData::make(X, y0), 0.5);
  } while (fit.active.empty());
  const SelectionEvent u = union_over_signs(X, fit.active, 0.5);
  const Contrast eta = coef_contrast(X, fit.active, fit.active[0], noise);

  // The union region contains the observed single-member interval.
  const TruncationResult tu = truncation_interval(u, eta, noise, y0);
  const auto single = SelectionEvent::single(
      lasso_event(X, fit.active, fit.signs, 0.5));
  const TruncationResult ts = truncation_interval(single, eta, noise, y0);
  CHECK(tu.region.contains(ts.observed));
  CHECK(tu.v_minus == doctest::Approx(ts.v_minus).epsilon(1e-9));

  // Conditional pivot uniformity over the union event (condition on M only).
  const auto draws = sample_conditional(u, mu, noise, 400, 99);
  std::vector<double> pivots;
  for (const auto& y : draws) {
    const TruncationResult tr = truncation_interval(u, eta, noise, y);
    pivots.push_back(tn_cdf(tr.observed, eta.eta.dot(mu), eta.scale, tr.region));
  }
  const KsResult ks = ks_uniform(pivots);
  CHECK(ks.p_value > 0.001);
}

TEST_CASE("union (minimal) intervals are no longer than simple ones on average") {
  Rng rng(1618);
  const Matrix X = random_design(rng, 10, 3);
  const NoiseModel noise = NoiseModel::isotropic(1.0);
  double len_minimal = 0.0, len_simple = 0.0;
  int used = 0;
  while (used < 200) {
    const Vector y = random_response(rng, 10);
    const LassoFit fit = fit_lasso(RegressionData::make(X, y), 0.5);
    if (fit.active.empty()) continue;
    const auto single = SelectionEvent::single(
        lasso_event(X, fit.active, fit.signs, 0.5));
    const SelectionEvent u = union_over_signs(X, fit.active, 0.5);
    const Contrast eta = coef_contrast(X, fit.active, fit.active[0], noise);
    const SelectiveInterval a = selective_ci(u, eta, noise, y, 0.1);
    const SelectiveInterval b = selective_ci(single, eta, noise, y, 0.1);
    if (!std::isfinite(a.upper - a.lower) || !std::isfinite(b.upper - b.lower))
      continue;
    len_minimal += a.upper - a.lower;
    len_simple += b.upper - b.lower;
    ++used;
  }
  CHECK(len_minimal / used <= len_simple / used + 1e-7);
}
