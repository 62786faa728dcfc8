#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>

#include "selinf/rng.hpp"
#include "selinf/solvers.hpp"

using namespace selinf;

namespace {

RegressionData identity2(double y1, double y2) {
  Matrix X = Matrix::Identity(2, 2);
  Vector y(2);
  y << y1, y2;
  return RegressionData::make(X, y);
}

Matrix random_design(Rng& rng, int n, int p) {
  Matrix X(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) X(i, j) = rng.normal();
  for (int j = 0; j < p; ++j) X.col(j) /= X.col(j).norm();
  return X;
}

double lasso_objective(const RegressionData& d, const Vector& beta,
                       double lambda, double gamma = 0.0) {
  return 0.5 * (d.y - d.X * beta).squaredNorm() +
         lambda * beta.lpNorm<1>() + 0.5 * gamma * beta.squaredNorm();
}

// Independent slow reference: FISTA with a Lipschitz step.
Vector fista_reference(const RegressionData& d, double lambda, int iters) {
  const int p = d.p();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(d.X.transpose() * d.X);
  const double L = eig.eigenvalues().maxCoeff();
  Vector beta = Vector::Zero(p), zeta = beta;
  double t = 1.0;
  for (int it = 0; it < iters; ++it) {
    Vector grad = d.X.transpose() * (d.X * zeta - d.y);
    Vector next = zeta - grad / L;
    for (int j = 0; j < p; ++j) {
      const double th = lambda / L;
      next(j) = next(j) > th ? next(j) - th : (next(j) < -th ? next(j) + th : 0.0);
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    zeta = next + ((t - 1.0) / t_next) * (next - beta);
    beta = next;
    t = t_next;
  }
  return beta;
}

double full_kkt_residual(const RegressionData& d, const LassoFit& fit) {
  Vector z(d.p());
  int a = 0, w = 0;
  for (int j = 0; j < d.p(); ++j) {
    if (a < static_cast<int>(fit.active.size()) && fit.active[a] == j)
      z(j) = fit.signs[a++];
    else
      z(j) = fit.W(w++);
  }
  return (d.X.transpose() * (d.X * fit.beta_hat - d.y) +
          fit.gamma * fit.beta_hat + fit.lambda * z)
      .lpNorm<Eigen::Infinity>();
}

}  // namespace

TEST_CASE("lasso on the orthogonal fixture soft-thresholds") {
  const RegressionData d = identity2(3.0, 0.5);
  const LassoFit fit = fit_lasso(d, 1.0);
  CHECK(fit.beta_hat(0) == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(fit.beta_hat(1) == 0.0);
  CHECK(fit.active == std::vector<int>{0});
  CHECK(fit.signs == std::vector<int>{1});
  CHECK(fit.U(0) == doctest::Approx(2.0));
  CHECK(fit.W.size() == 1);
  CHECK(std::abs(fit.W(0)) == doctest::Approx(0.5));
}

TEST_CASE("lasso at lambda above the max correlation returns zero") {
  const RegressionData d = identity2(3.0, 0.5);
  const LassoFit fit = fit_lasso(d, 3.0 + 1e-9);
  CHECK(fit.active.empty());
  CHECK(fit.beta_hat.lpNorm<Eigen::Infinity>() == 0.0);
  const LassoFit at = fit_lasso(d, 5.0);
  CHECK(at.active.empty());
}

TEST_CASE("lasso matches coordinatewise soft-thresholding on orthogonal designs") {
  Rng rng(11);
  Matrix X = Matrix::Identity(6, 6);
  Vector y(6);
  for (int i = 0; i < 6; ++i) y(i) = rng.uniform(-4.0, 4.0);
  const double lambda = 1.3;
  const LassoFit fit = fit_lasso(RegressionData::make(X, y), lambda);
  for (int j = 0; j < 6; ++j) {
    const double st =
        y(j) > lambda ? y(j) - lambda : (y(j) < -lambda ? y(j) + lambda : 0.0);
    CHECK(fit.beta_hat(j) == doctest::Approx(st).epsilon(1e-10));
  }
}

TEST_CASE("lasso objective matches an independent reference minimizer") {
  Rng rng(42);
  for (int inst = 0; inst < 5; ++inst) {
    const Matrix X = random_design(rng, 20, 8);
    Vector y(20);
    for (int i = 0; i < 20; ++i) y(i) = rng.normal();
    const RegressionData d = RegressionData::make(X, y);
    const double lambda = 0.15;
    const LassoFit fit = fit_lasso(d, lambda);
    const Vector ref = fista_reference(d, lambda, 20000);
    const double obj_cd = lasso_objective(d, fit.beta_hat, lambda);
    const double obj_ref = lasso_objective(d, ref, lambda);
    CHECK(obj_cd <= obj_ref + 1e-8);
    CHECK(std::abs(obj_cd - obj_ref) <= 1e-8);
  }
}

TEST_CASE("lasso objective is a local minimum under random perturbations") {
  Rng rng(77);
  const Matrix X = random_design(rng, 15, 6);
  Vector y(15);
  for (int i = 0; i < 15; ++i) y(i) = rng.normal();
  const RegressionData d = RegressionData::make(X, y);
  const LassoFit fit = fit_lasso(d, 0.2);
  const double base = lasso_objective(d, fit.beta_hat, 0.2);
  for (int it = 0; it < 100; ++it) {
    Vector delta(6);
    for (int j = 0; j < 6; ++j) delta(j) = rng.normal();
    delta *= 1e-3 / delta.norm();
    CHECK(base <= lasso_objective(d, fit.beta_hat + delta, 0.2) + 1e-12);
  }
}

TEST_CASE("every fit passes its own KKT conditions at tolerance") {
  Rng rng(1234);
  for (int inst = 0; inst < 20; ++inst) {
    const int n = 12 + static_cast<int>(rng.below(10));
    const int p = 3 + static_cast<int>(rng.below(6));
    const Matrix X = random_design(rng, n, p);
    Vector y(n);
    for (int i = 0; i < n; ++i) y(i) = rng.normal() * 2.0;
    const RegressionData d = RegressionData::make(X, y);
    const double lambda = rng.uniform(0.05, 0.8);
    const LassoFit fit = fit_lasso(d, lambda);
    CHECK(full_kkt_residual(d, fit) <= 1e-8);
    const double gamma = rng.uniform(0.0, 0.5);
    const LassoFit efit = fit_elastic_net(d, lambda, gamma);
    CHECK(full_kkt_residual(d, efit) <= 1e-8);
    for (std::size_t i = 0; i < efit.active.size(); ++i)
      CHECK(efit.U(i) * efit.signs[i] > 0.0);
    if (efit.W.size() > 0)
      CHECK(efit.W.lpNorm<Eigen::Infinity>() < 1.0 + 1e-8);
  }
}

TEST_CASE("elastic net with gamma zero reduces to the lasso") {
  Rng rng(5);
  const Matrix X = random_design(rng, 18, 7);
  Vector y(18);
  for (int i = 0; i < 18; ++i) y(i) = rng.normal();
  const RegressionData d = RegressionData::make(X, y);
  const LassoFit a = fit_lasso(d, 0.25);
  const LassoFit b = fit_elastic_net(d, 0.25, 0.0);
  CHECK((a.beta_hat - b.beta_hat).lpNorm<Eigen::Infinity>() < 1e-10);
  CHECK(a.active == b.active);
}

TEST_CASE("elastic net damped scalar solution on the orthogonal fixture") {
  const RegressionData d = identity2(3.0, 0.5);
  const LassoFit fit = fit_elastic_net(d, 1.0, 1.0);
  CHECK(fit.beta_hat(0) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(fit.beta_hat(1) == 0.0);
}

TEST_CASE("elastic net splits duplicated columns evenly") {
  Matrix X(6, 2);
  X << 1, 1, 2, 2, -1, -1, 0.5, 0.5, 1.5, 1.5, -0.5, -0.5;
  Vector y(6);
  y << 3, 5, -2, 1, 4, -1;
  const RegressionData d = RegressionData::make(X, y);
  const LassoFit fit = fit_elastic_net(d, 0.3, 0.5);
  REQUIRE(fit.active.size() == 2);
  CHECK(fit.beta_hat(0) == doctest::Approx(fit.beta_hat(1)).epsilon(1e-8));
}

TEST_CASE("marginal screening selects by absolute correlation with signs") {
  {
    const auto r = marginal_screen(identity2(3.0, 1.0), 1);
    CHECK(r.active == std::vector<int>{0});
    CHECK(r.signs == std::vector<int>{1});
  }
  {
    const auto r = marginal_screen(identity2(-3.0, 1.0), 1);
    CHECK(r.active == std::vector<int>{0});
    CHECK(r.signs == std::vector<int>{-1});
  }
  {
    const auto r = marginal_screen(identity2(-3.0, 1.0), 2);
    CHECK(r.active.size() == 2);
  }
  CHECK_THROWS_AS(marginal_screen(identity2(1.0, -1.0), 1), TieError);
  CHECK_THROWS_AS(marginal_screen(identity2(1.0, 2.0), 3), InvalidInput);
}

TEST_CASE("omp picks greedily and reprojects the residual") {
  {
    const auto path = omp(identity2(3.0, 1.0), 2);
    REQUIRE(path.steps.size() == 2);
    CHECK(path.steps[0] == std::pair{0, 1});
    CHECK(path.steps[1] == std::pair{1, 1});
    CHECK(path.residuals.back().lpNorm<Eigen::Infinity>() < 1e-10);
  }
  {
    const auto path = omp(identity2(0.0, -2.0), 1);
    REQUIRE(path.steps.size() == 1);
    CHECK(path.steps[0] == std::pair{1, -1});
  }
}

TEST_CASE("omp residuals stay orthogonal to the selected columns") {
  Rng rng(909);
  const Matrix X = random_design(rng, 14, 6);
  Vector y(14);
  for (int i = 0; i < 14; ++i) y(i) = rng.normal();
  const RegressionData d = RegressionData::make(X, y);
  const auto path = omp(d, 4);
  std::vector<int> sel;
  for (int s = 0; s < 4; ++s) {
    sel.push_back(path.steps[s].first);
    for (int j : sel)
      CHECK(std::abs(X.col(j).dot(path.residuals[s + 1])) < 1e-10);
  }
}

TEST_CASE("nnls clamps on orthogonal designs and certifies duals") {
  const auto r = nnls(identity2(2.0, -1.0));
  CHECK(r.beta(0) == doctest::Approx(2.0));
  CHECK(r.beta(1) == 0.0);
  CHECK(r.active == std::vector<int>{0});
  CHECK(r.dual(0) == doctest::Approx(0.0).epsilon(1e-10));
  CHECK(r.dual(1) == doctest::Approx(1.0));

  const auto zero = nnls(identity2(-2.0, -1.0));
  CHECK(zero.beta.lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(zero.active.empty());
}

TEST_CASE("nnls matches a brute-force subset-enumeration oracle") {
  Rng rng(2024);
  for (int inst = 0; inst < 8; ++inst) {
    const int n = 15, p = 5;
    const Matrix X = random_design(rng, n, p);
    Vector y(n);
    for (int i = 0; i < n; ++i) y(i) = rng.normal();
    const RegressionData d = RegressionData::make(X, y);
    const auto fit = nnls(d);
    const double obj = 0.5 * (y - X * fit.beta).squaredNorm();

    // Oracle: smallest objective over all subsets with a nonnegative LS
    // solution (the optimum's support is such a subset).
    double best = 0.5 * y.squaredNorm();
    for (int mask = 1; mask < (1 << p); ++mask) {
      std::vector<int> idx;
      for (int j = 0; j < p; ++j)
        if (mask & (1 << j)) idx.push_back(j);
      Matrix XS(n, static_cast<Eigen::Index>(idx.size()));
      for (std::size_t k = 0; k < idx.size(); ++k) XS.col(k) = X.col(idx[k]);
      const Vector s = XS.colPivHouseholderQr().solve(y);
      if (s.minCoeff() >= -1e-12)
        best = std::min(best, 0.5 * (y - XS * s).squaredNorm());
    }
    CHECK(obj == doctest::Approx(best).epsilon(1e-8));
    // KKT: dual feasibility and complementary slackness.
    CHECK(fit.dual.minCoeff() >= -1e-8);
    for (int j = 0; j < p; ++j) CHECK(fit.beta(j) * fit.dual(j) < 1e-8);
  }
}
