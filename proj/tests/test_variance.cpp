#include <doctest.h>

#include <cmath>

#include "selinf/events.hpp"
#include "selinf/rng.hpp"
#include "selinf/solvers.hpp"
#include "selinf/variance.hpp"

using namespace selinf;

TEST_CASE("gibbs sampling the first orthant matches the half-normal mean") {
  Matrix A(2, 2);
  A << -1, 0, 0, -1;  // y >= 0 componentwise
  const Polytope orthant = Polytope::make(A, Vector::Zero(2));
  const Matrix s = gibbs_tmvn(orthant, Vector::Zero(2), 1.0, 50000, 500, 42);
  REQUIRE(s.rows() == 50000);
  const double expect = std::sqrt(2.0 / M_PI);  // 0.7979
  const double se = std::sqrt(1.0 - 2.0 / M_PI) / std::sqrt(50000.0);
  for (int j = 0; j < 2; ++j) {
    CHECK(s.col(j).minCoeff() >= -1e-9);
    CHECK(std::abs(s.col(j).mean() - expect) <= 3.0 * se);
  }
}

TEST_CASE("gibbs on an unconstrained polytope is plain Gaussian sampling") {
  const Polytope whole = Polytope::make(Matrix(0, 3), Vector(0));
  Vector mean(3);
  mean << 1.0, -2.0, 0.5;
  const Matrix s = gibbs_tmvn(whole, mean, 2.0, 30000, 100, 7);
  for (int j = 0; j < 3; ++j) {
    CHECK(std::abs(s.col(j).mean() - mean(j)) <= 4.0 * std::sqrt(2.0 / 30000.0));
    const double var =
        (s.col(j).array() - s.col(j).mean()).square().sum() / (s.rows() - 1);
    CHECK(var == doctest::Approx(2.0).epsilon(0.05));
  }
}

TEST_CASE("gibbs box sampling is symmetric and respects the constraints") {
  Matrix A(4, 2);
  A << 1, 0, -1, 0, 0, 1, 0, -1;
  const Polytope box = Polytope::make(A, Vector::Ones(4));
  const Matrix s = gibbs_tmvn(box, Vector::Zero(2), 1.0, 20000, 200, 3);
  for (int i = 0; i < s.rows(); ++i)
    CHECK(contains(box, s.row(i).transpose(), 1e-9));
  const double se = 0.54 / std::sqrt(20000.0);
  CHECK(std::abs(s.col(0).mean()) <= 3.0 * se);
  CHECK(std::abs(s.col(1).mean()) <= 3.0 * se);
}

TEST_CASE("gibbs refuses an infeasible polytope") {
  Matrix A(2, 1);
  A << 1, -1;
  Vector b(2);
  b << -1, -1;
  CHECK_THROWS_AS(
      gibbs_tmvn(Polytope::make(A, b), Vector::Zero(1), 1.0, 10, 10, 1),
      NumericalError);
}

TEST_CASE("estimate_sigma closed form on an unconstrained event") {
  // ||y||^2 = 50 with n = 25 and an empty model: sigma2_hat = 2 exactly.
  const int n = 25;
  Matrix X(n, 1);
  X.setZero();
  X(0, 0) = 1.0;
  Vector y = Vector::Ones(n) * std::sqrt(2.0);
  RegressionData d = RegressionData::make(X, y);
  const Polytope whole = Polytope::make(Matrix(0, n), Vector(0));
  const VarianceEstimate est = estimate_sigma(whole, d, {});
  CHECK(est.sigma2_hat == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(est.score_residual == 0.0);
  CHECK_FALSE(est.assumption_note.empty());
}

TEST_CASE("the Monte Carlo score is monotone in sigma2 under common randoms") {
  Matrix A(2, 2);
  A << -1, 0, 0, -1;
  const Polytope orthant = Polytope::make(A, Vector::Zero(2));
  double prev = 0.0;
  for (double s2 : {0.5, 1.0, 2.0, 4.0}) {
    const Matrix s = gibbs_tmvn(orthant, Vector::Zero(2), s2, 4000, 200, 321);
    const double score = s.rowwise().squaredNorm().mean();
    CHECK(score > prev);
    prev = score;
  }
}

TEST_CASE("estimate_sigma recovers the truth under mild truncation") {
  Rng rng(2026);
  const int n = 20, p = 4;
  Matrix X(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) X(i, j) = rng.normal();
  for (int j = 0; j < p; ++j) X.col(j) /= X.col(j).norm();
  double acc = 0.0;
  int used = 0;
  for (int rep = 0; rep < 10; ++rep) {
    Vector y(n);
    for (int i = 0; i < n; ++i) y(i) = rng.normal();  // true sigma2 = 1
    y += X.col(0) * 6.0 + X.col(1) * 5.0;
    RegressionData d = RegressionData::make(X, y);
    const LassoFit fit = fit_lasso(d, 1.0);
    if (fit.active.empty()) continue;
    const Polytope ev = lasso_event(X, fit.active, fit.signs, 1.0);
    SigmaConfig cfg;
    cfg.n_samples = 2000;
    cfg.burn_in = 300;
    cfg.seed = 100 + rep;
    acc += estimate_sigma(ev, d, fit.active, cfg).sigma2_hat;
    ++used;
  }
  REQUIRE(used >= 8);
  CHECK(std::abs(acc / used - 1.0) <= 0.35);  // loose: 10 reps only
}
