#include <doctest.h>

#include <cmath>

#include "selinf/events.hpp"
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

}  // namespace

TEST_CASE("lasso event rows reproduce the worked orthogonal example") {
  const Matrix X = Matrix::Identity(2, 2);
  const Polytope ev = lasso_event(X, {0}, {1}, 1.0);
  REQUIRE(ev.rows() == 3);
  // Inactive block (+/-) then the active sign block.
  CHECK(ev.A(0, 0) == doctest::Approx(0.0));
  CHECK(ev.A(0, 1) == doctest::Approx(1.0));
  CHECK(ev.b(0) == doctest::Approx(1.0));
  CHECK(ev.A(1, 1) == doctest::Approx(-1.0));
  CHECK(ev.b(1) == doctest::Approx(1.0));
  CHECK(ev.A(2, 0) == doctest::Approx(-1.0));
  CHECK(ev.A(2, 1) == doctest::Approx(0.0));
  CHECK(ev.b(2) == doctest::Approx(-1.0));

  Vector inside(2);
  inside << 3.0, 0.5;
  CHECK(contains(ev, inside));
  Vector outside(2);
  outside << 0.5, 0.5;  // beta would be zero here
  CHECK_FALSE(contains(ev, outside));
}

TEST_CASE("lasso event with a full active set has only sign rows") {
  const Matrix X = Matrix::Identity(3, 3);
  const Polytope ev = lasso_event(X, {0, 1, 2}, {1, -1, 1}, 0.5);
  CHECK(ev.rows() == 3);
}

TEST_CASE("lasso event membership agrees with the solver oracle") {
  Rng rng(31);
  int checked = 0, negatives = 0;
  for (int inst = 0; inst < 500; ++inst) {
    const int n = 10 + static_cast<int>(rng.below(8));
    const int p = 3 + static_cast<int>(rng.below(5));
    const Matrix X = random_design(rng, n, p);
    const Vector y = random_response(rng, n);
    const double lambda = rng.uniform(0.2, 1.2);
    const RegressionData d = RegressionData::make(X, y);
    const LassoFit fit = fit_lasso(d, lambda);
    if (fit.active.empty()) continue;
    const Polytope ev = lasso_event(X, fit.active, fit.signs, lambda);
    CHECK(contains(ev, y));
    ++checked;

    if (negatives < 100) {
      const Vector y2 = random_response(rng, n);
      const LassoFit fit2 = fit_lasso(RegressionData::make(X, y2), lambda);
      if (fit2.active != fit.active || fit2.signs != fit.signs) {
        CHECK_FALSE(contains(ev, y2));
        ++negatives;
      }
    }
  }
  CHECK(checked > 300);
  CHECK(negatives >= 50);
}

TEST_CASE("elastic net event reduces to the lasso event at gamma zero") {
  Rng rng(77);
  const Matrix X = random_design(rng, 12, 5);
  const Polytope a = lasso_event(X, {1, 3}, {1, -1}, 0.7);
  const Polytope b = enet_event(X, {1, 3}, {1, -1}, 0.7, 0.0);
  CHECK((a.A - b.A).lpNorm<Eigen::Infinity>() < 1e-12);
  CHECK((a.b - b.b).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("elastic net event damps the active block") {
  const Matrix X = Matrix::Identity(2, 2);
  const Polytope ev = enet_event(X, {0}, {1}, 1.0, 1.0);
  // Active row: -y1/2 <= -1/2, i.e. y1 >= 1.
  REQUIRE(ev.rows() == 3);
  CHECK(ev.A(2, 0) == doctest::Approx(-0.5));
  CHECK(ev.b(2) == doctest::Approx(-0.5));
}

TEST_CASE("elastic net event membership agrees with the solver oracle") {
  Rng rng(99);
  int checked = 0;
  for (int inst = 0; inst < 200; ++inst) {
    const int n = 12, p = 5;
    const Matrix X = random_design(rng, n, p);
    const Vector y = random_response(rng, n);
    const double lambda = rng.uniform(0.2, 0.9);
    const double gamma = rng.uniform(0.1, 1.0);
    const LassoFit fit =
        fit_elastic_net(RegressionData::make(X, y), lambda, gamma);
    if (fit.active.empty()) continue;
    const Polytope ev = enet_event(X, fit.active, fit.signs, lambda, gamma);
    CHECK(contains(ev, y));
    ++checked;
  }
  CHECK(checked > 120);
}

TEST_CASE("marginal screening event encodes the worked example") {
  const Matrix X = Matrix::Identity(2, 2);
  const Polytope ev = ms_event(X, {0}, {1});
  // {y1 >= y2, y1 >= -y2, y1 >= 0}
  CHECK(ev.rows() == 3);
  Vector in(2);
  in << 3.0, 1.0;
  CHECK(contains(ev, in));
  Vector out(2);
  out << 1.0, 2.0;
  CHECK_FALSE(contains(ev, out));
  // k = p keeps only the sign constraints.
  CHECK(ms_event(X, {0, 1}, {1, -1}).rows() == 2);
}

TEST_CASE("screening event membership agrees with the selector oracle") {
  Rng rng(12);
  for (int inst = 0; inst < 500; ++inst) {
    const int n = 10, p = 4 + static_cast<int>(rng.below(4));
    const Matrix X = random_design(rng, n, p);
    const Vector y = random_response(rng, n);
    const int k = 1 + static_cast<int>(rng.below(p));
    const auto sel = marginal_screen(RegressionData::make(X, y), k);
    const Polytope ev = ms_event(X, sel.active, sel.signs);
    CHECK(contains(ev, y));
  }
}

TEST_CASE("omp event is order aware and matches the worked example") {
  const Matrix X = Matrix::Identity(2, 2);
  StepwisePath path;
  path.steps = {{0, 1}, {1, 1}};
  const Polytope ev = omp_event(X, path);
  // Step 1 contributes 3 rows, step 2 only the positivity row.
  CHECK(ev.rows() == 4);
  Vector in(2);
  in << 3.0, 1.0;
  CHECK(contains(ev, in));
  Vector wrong_order(2);
  wrong_order << 1.0, 3.0;
  CHECK_FALSE(contains(ev, wrong_order));
}

TEST_CASE("omp event with one step equals the screening event set") {
  Rng rng(55);
  const Matrix X = random_design(rng, 8, 3);
  StepwisePath path;
  path.steps = {{2, -1}};
  const Polytope a = omp_event(X, path);
  const Polytope b = ms_event(X, {2}, {-1});
  for (int it = 0; it < 200; ++it) {
    const Vector y = random_response(rng, 8);
    CHECK(contains(a, y) == contains(b, y));
  }
}

TEST_CASE("omp event membership agrees with the selector oracle") {
  Rng rng(13);
  for (int inst = 0; inst < 500; ++inst) {
    const int n = 12, p = 5;
    const Matrix X = random_design(rng, n, p);
    const Vector y = random_response(rng, n);
    const int k = 1 + static_cast<int>(rng.below(3));
    const auto path = omp(RegressionData::make(X, y), k);
    const Polytope ev = omp_event(X, path);
    CHECK(contains(ev, y, 1e-8));
  }
}

TEST_CASE("nnls event keeps the vacuous active rows and matches the oracle") {
  const Matrix X = Matrix::Identity(2, 2);
  const Polytope ev = nnls_event(X, {0});
  REQUIRE(ev.rows() == 4);
  CHECK(ev.A.topRows(2).lpNorm<Eigen::Infinity>() < 1e-12);
  // Inactive variable 2 has a strictly positive dual: y2 <= 0.
  CHECK(ev.A(2, 1) == doctest::Approx(1.0));
  // Primal nonnegativity of the active coefficient: y1 >= 0.
  CHECK(ev.A(3, 0) == doctest::Approx(-1.0));
  Vector y(2);
  y << 2.0, -1.0;  // the orthogonal fixture that selects variable 1
  CHECK(contains(ev, y));
  // Full active set leaves no inactive block.
  CHECK(nnls_event(X, {0, 1}).rows() == 6);
}

TEST_CASE("nnls event membership agrees with the solver oracle") {
  Rng rng(14);
  int checked = 0;
  for (int inst = 0; inst < 200; ++inst) {
    const int n = 12, p = 5;
    const Matrix X = random_design(rng, n, p);
    const Vector y = random_response(rng, n);
    const auto fit = nnls(RegressionData::make(X, y));
    if (fit.active.empty()) continue;
    const Polytope ev = nnls_event(X, fit.active);
    CHECK(contains(ev, y, 1e-7));
    ++checked;
  }
  CHECK(checked > 100);
}

TEST_CASE("gof event counts difference/sum rows and holds at the observed y") {
  Rng rng(21);
  const Matrix X = random_design(rng, 12, 5);
  const Vector y = random_response(rng, 12);
  const LassoFit fit = fit_lasso(RegressionData::make(X, y), 0.3);
  if (fit.active.empty() || fit.active.size() >= 4) return;
  const auto [poly, sm, eta] =
      gof_event(X, fit.active, fit.signs, 0.3, y);
  const int q = 5 - static_cast<int>(fit.active.size());
  CHECK(sm.A2.rows() == 2 * (q - 1));
  CHECK(contains(poly, y, 1e-9));
  CHECK(eta.size() == 12);
  // eta'y is the signed max partial correlation, hence positive.
  CHECK(eta.dot(y) > 0.0);
}

TEST_CASE("gof event pins the outcome and the argmax on every member point") {
  Rng rng(771);
  const Matrix X = random_design(rng, 10, 4);
  int done = 0;
  while (done < 30) {
    const Vector y = random_response(rng, 10);
    const LassoFit fit = fit_lasso(RegressionData::make(X, y), 0.5);
    if (fit.active.empty() || fit.active.size() >= 4) continue;
    const auto [poly, sm, eta] = gof_event(X, fit.active, fit.signs, 0.5, y);
    // Sample other points of the polytope by sliding along eta from y.
    for (double c : {-0.3, 0.2, 0.6}) {
      const Vector y2 = y + c * eta / eta.norm();
      if (!contains(poly, y2, 0.0)) continue;
      const LassoFit f2 = fit_lasso(RegressionData::make(X, y2), 0.5);
      CHECK(f2.active == fit.active);
      CHECK(f2.signs == fit.signs);
      const auto [p2, sm2, e2] = gof_event(X, f2.active, f2.signs, 0.5, y2);
      CHECK(sm2.j_star == sm.j_star);
      CHECK(sm2.s_star == sm.s_star);
      ++done;
    }
  }
}

TEST_CASE("gof event with a single inactive column has no comparison rows") {
  const Matrix X = Matrix::Identity(3, 3);
  Vector y(3);
  y << 4.0, 2.0, 0.5;
  const auto [poly, sm, eta] = gof_event(X, {0, 1}, {1, 1}, 1.0, y);
  CHECK(sm.A2.rows() == 0);
  CHECK(eta.dot(y) == doctest::Approx(0.5));
}

TEST_CASE("intersect stacks rows and checks dimensions") {
  const Matrix X = Matrix::Identity(2, 2);
  const Polytope p1 = lasso_event(X, {0}, {1}, 1.0);
  const Polytope same = intersect({p1});
  CHECK(same.rows() == p1.rows());
  CHECK((same.A - p1.A).lpNorm<Eigen::Infinity>() == 0.0);

  Matrix h1(1, 1), h2(1, 1);
  h1 << 1.0;
  h2 << 1.0;
  Vector b1(1), b2(1);
  b1 << 1.0;
  b2 << 0.0;
  const Polytope both =
      intersect({Polytope::make(h1, b1), Polytope::make(h2, b2)});
  CHECK(both.rows() == 2);
  Vector below(1), mid(1);
  below << -0.5;
  mid << 0.5;
  CHECK(contains(both, below));
  CHECK_FALSE(contains(both, mid));  // y1 < 0 binds

  const Polytope wrong = Polytope::make(Matrix::Ones(1, 3), Vector::Ones(1));
  CHECK_THROWS_AS(intersect({p1, wrong}), InvalidInput);
}

TEST_CASE("union over signs enumerates and the observed member is unique") {
  Rng rng(61);
  const Matrix X = random_design(rng, 14, 4);
  {
    const SelectionEvent u = union_over_signs(X, {1}, 0.5);
    CHECK(u.members().size() <= 2);
    CHECK(u.members().size() >= 1);
  }
  {
    const SelectionEvent u = union_over_signs(X, {0, 2, 3}, 0.5);
    CHECK(u.members().size() <= 8);
  }
  std::vector<int> big(kSignUnionCap + 1);
  CHECK_THROWS_AS(union_over_signs(random_design(rng, 40, 16), big, 0.5),
                  InvalidInput);

  int hits = 0;
  for (int it = 0; it < 200; ++it) {
    const Vector y = random_response(rng, 14);
    const LassoFit fit = fit_lasso(RegressionData::make(X, y), 0.5);
    if (fit.active.empty()) continue;
    const SelectionEvent u = union_over_signs(X, fit.active, 0.5);
    int inside = 0;
    for (const auto& member : u.members())
      if (contains(member, y)) ++inside;
    CHECK(inside == 1);
    ++hits;
  }
  CHECK(hits > 80);
}

TEST_CASE("contains honors the tolerance contract") {
  const Polytope whole = Polytope::make(Matrix(0, 2), Vector(0));
  CHECK(contains(whole, Vector::Zero(2)));
  Matrix A(1, 1);
  A << 1.0;
  Vector b(1);
  b << 1.0;
  const Polytope half = Polytope::make(A, b);
  Vector on(1);
  on << 1.0 + 5e-10;  // within feas_tol of the boundary
  CHECK(contains(half, on));
  Vector off(1);
  off << 1.0 + 1e-6;
  CHECK_FALSE(contains(half, off));
  CHECK_THROWS_AS(contains(half, Vector::Zero(2)), InvalidInput);
}

TEST_CASE("find_interior_point certifies feasibility") {
  Matrix A(2, 2);
  A << 1, 0, 0, 1;
  Vector b(2);
  b << 1, 1;
  const auto pt = find_interior_point(Polytope::make(A, b));
  REQUIRE(pt.has_value());
  CHECK(((A * *pt - b).array() < 0).all());

  Matrix Abad(2, 1);
  Abad << 1, -1;
  Vector bbad(2);
  bbad << -1, -1;  // y <= -1 and y >= 1: empty
  CHECK_FALSE(find_interior_point(Polytope::make(Abad, bbad)).has_value());
}
