#include "selinf/solvers.hpp"

#include "selinf/truncnorm.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <numeric>

namespace selinf {

namespace {

double soft_threshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

Matrix submatrix(const Matrix& X, const std::vector<int>& cols) {
  Matrix out(X.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.col(j) = X.col(cols[j]);
  return out;
}

// Solves (X_M' X_M + gamma I) u = rhs.
Vector damped_normal_solve(const Matrix& XM, double gamma, const Vector& rhs) {
  Matrix G = XM.transpose() * XM;
  G.diagonal().array() += gamma;
  Eigen::LDLT<Matrix> ldlt(G);
  if (ldlt.info() != Eigen::Success)
    throw NumericalError("active-block system is not positive definite");
  Vector u = ldlt.solve(rhs);
  if ((G * u - rhs).lpNorm<Eigen::Infinity>() >
      1e-7 * std::max(1.0, rhs.lpNorm<Eigen::Infinity>()))
    throw NumericalError("active-block solve failed (rank-deficient X_M?)");
  return u;
}

LassoFit fit_l1(const RegressionData& data, double lambda, double gamma) {
  if (!(lambda > 0.0)) throw InvalidInput("lasso: lambda must be positive");
  if (gamma < 0.0) throw InvalidInput("elastic net: gamma must be >= 0");
  const Matrix& X = data.X;
  const int p = data.p();

  Vector col_sq(p);
  for (int j = 0; j < p; ++j) col_sq(j) = X.col(j).squaredNorm();

  // Cyclic coordinate descent on the penalized objective.
  Vector beta = Vector::Zero(p);
  Vector r = data.y;  // residual y - X beta
  const int max_sweeps = 100000;
  double delta = kInf;
  for (int sweep = 0; sweep < max_sweeps && delta >= 1e-10; ++sweep) {
    delta = 0.0;
    for (int j = 0; j < p; ++j) {
      const double old = beta(j);
      const double rho = X.col(j).dot(r) + col_sq(j) * old;
      const double next = soft_threshold(rho, lambda) / (col_sq(j) + gamma);
      if (next != old) {
        r += X.col(j) * (old - next);
        beta(j) = next;
        delta = std::max(delta, std::abs(next - old));
      }
    }
  }
  if (delta >= 1e-10) {
    const Vector grad = X.transpose() * (X * beta - data.y) + gamma * beta;
    throw NumericalError(
        "lasso: coordinate descent did not converge; gradient norm " +
        std::to_string(grad.lpNorm<Eigen::Infinity>()));
  }

  std::vector<int> active;
  std::vector<int> signs;
  for (int j = 0; j < p; ++j)
    if (beta(j) != 0.0) {
      active.push_back(j);
      signs.push_back(beta(j) > 0 ? 1 : -1);
    }

  // Refit exactly on the candidate support. The active-set cleanup loop
  // removes sign violations and pulls in inactive variables whose subgradient
  // escapes [-1, 1]; it is rarely entered after a converged CD pass.
  Vector U, W;
  const int max_cleanup = 4 * p + 8;
  int iter = 0;
  for (;; ++iter) {
    if (iter > max_cleanup)
      throw NumericalError("lasso: active-set cleanup did not converge");
    const int m = static_cast<int>(active.size());
    Vector z(m);
    for (int i = 0; i < m; ++i) z(i) = signs[i];

    if (m == 0) {
      U.resize(0);
      W = X.transpose() * data.y / lambda;
    } else {
      const Matrix XM = submatrix(X, active);
      U = damped_normal_solve(XM, gamma, XM.transpose() * data.y - lambda * z);
      const Vector fit_res = data.y - XM * U;
      std::vector<int> inactive;
      for (int j = 0, a = 0; j < p; ++j) {
        if (a < m && active[a] == j)
          ++a;
        else
          inactive.push_back(j);
      }
      W.resize(static_cast<Eigen::Index>(inactive.size()));
      for (std::size_t i = 0; i < inactive.size(); ++i)
        W(i) = X.col(inactive[i]).dot(fit_res) / lambda;
    }

    // Sign violation: drop the worst offender from the support.
    int drop = -1;
    double worst = 0.0;
    for (int i = 0; i < m; ++i)
      if (U(i) * signs[i] < 0.0 && std::abs(U(i)) > worst) {
        worst = std::abs(U(i));
        drop = i;
      }
    if (drop >= 0) {
      active.erase(active.begin() + drop);
      signs.erase(signs.begin() + drop);
      continue;
    }

    // Subgradient violation: activate the worst offender.
    std::vector<int> inactive;
    for (int j = 0, a = 0; j < p; ++j) {
      if (a < m && active[a] == j)
        ++a;
      else
        inactive.push_back(j);
    }
    int add = -1;
    double wmax = 1.0 + 1e-10;
    for (std::size_t i = 0; i < inactive.size(); ++i)
      if (std::abs(W(i)) > wmax) {
        wmax = std::abs(W(i));
        add = inactive[i];
      }
    if (add >= 0) {
      const auto pos = std::lower_bound(active.begin(), active.end(), add);
      signs.insert(signs.begin() + (pos - active.begin()),
                   W(std::find(inactive.begin(), inactive.end(), add) -
                     inactive.begin()) > 0
                       ? 1
                       : -1);
      active.insert(pos, add);
      continue;
    }
    break;
  }

  LassoFit fit;
  fit.lambda = lambda;
  fit.gamma = gamma;
  fit.active = active;
  fit.signs = signs;
  fit.U = U;
  fit.W = W;
  fit.beta_hat = Vector::Zero(p);
  for (std::size_t i = 0; i < active.size(); ++i)
    fit.beta_hat(active[i]) = U(static_cast<Eigen::Index>(i));

  // Full-subgradient KKT residual.
  Vector zfull(p);
  {
    int a = 0, w = 0;
    for (int j = 0; j < p; ++j) {
      if (a < static_cast<int>(active.size()) && active[a] == j)
        zfull(j) = signs[a++];
      else
        zfull(j) = W(w++);
    }
  }
  const Vector grad = X.transpose() * (X * fit.beta_hat - data.y) +
                      gamma * fit.beta_hat + lambda * zfull;
  fit.kkt_residual = grad.lpNorm<Eigen::Infinity>();
  if (fit.kkt_residual > kKktTol * std::max(1.0, lambda))
    throw NumericalError("lasso: KKT residual " +
                         std::to_string(fit.kkt_residual) +
                         " exceeds tolerance");
  return fit;
}

}  // namespace

LassoFit fit_lasso(const RegressionData& data, double lambda) {
  return fit_l1(data, lambda, 0.0);
}

LassoFit fit_elastic_net(const RegressionData& data, double lambda,
                         double gamma) {
  return fit_l1(data, lambda, gamma);
}

ScreenResult marginal_screen(const RegressionData& data, int k) {
  const int p = data.p();
  if (k < 1 || k > p)
    throw InvalidInput("screen: k must lie in [1, p], got " +
                       std::to_string(k));
  const Vector c = data.X.transpose() * data.y;
  std::vector<int> order(p);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return std::abs(c(a)) > std::abs(c(b));
  });
  if (k < p && std::abs(c(order[k - 1])) == std::abs(c(order[k])))
    throw TieError("screen: exact tie in |x_j'y| at rank " + std::to_string(k));
  ScreenResult res;
  for (int i = 0; i < k; ++i) {
    res.active.push_back(order[i]);
    res.signs.push_back(c(order[i]) >= 0 ? 1 : -1);
  }
  return res;
}

StepwisePath omp(const RegressionData& data, int k) {
  const int n = data.n(), p = data.p();
  if (k < 1 || k > std::min(n, p))
    throw InvalidInput("omp: k must lie in [1, min(n, p)]");
  StepwisePath path;
  path.residuals.push_back(data.y);
  std::vector<int> selected;
  Vector r = data.y;
  for (int step = 0; step < k; ++step) {
    const Vector c = data.X.transpose() * r;
    int best = -1;
    double best_abs = -1.0;
    bool tie = false;
    for (int j = 0; j < p; ++j) {
      if (std::find(selected.begin(), selected.end(), j) != selected.end())
        continue;
      const double a = std::abs(c(j));
      if (a > best_abs) {
        best_abs = a;
        best = j;
        tie = false;
      } else if (a == best_abs) {
        tie = true;
      }
    }
    if (tie || best < 0)
      throw TieError("omp: tie in argmax |r'x_j| at step " +
                     std::to_string(step + 1));
    path.steps.emplace_back(best, c(best) >= 0 ? 1 : -1);
    selected.push_back(best);

    const Matrix XS = submatrix(data.X, selected);
    Eigen::ColPivHouseholderQR<Matrix> qr(XS);
    if (qr.rank() < static_cast<Eigen::Index>(selected.size()))
      throw NumericalError("omp: selected columns are rank deficient at step " +
                           std::to_string(step + 1));
    r = data.y - XS * qr.solve(data.y);
    path.residuals.push_back(r);
  }
  return path;
}

NnlsResult nnls(const RegressionData& data) {
  const int p = data.p();
  const Matrix& X = data.X;
  const Vector& y = data.y;
  const double tol = 1e-10 * std::max(1.0, (X.transpose() * y).lpNorm<Eigen::Infinity>());

  std::vector<int> pos;  // positive set
  Vector beta = Vector::Zero(p);
  const int max_iter = 10 * p;
  for (int iter = 0;; ++iter) {
    if (iter > max_iter)
      throw NumericalError("nnls: active-set iteration limit exceeded");
    const Vector w = X.transpose() * (y - X * beta);
    int best = -1;
    double wmax = tol;
    for (int j = 0; j < p; ++j) {
      if (std::find(pos.begin(), pos.end(), j) != pos.end()) continue;
      if (w(j) > wmax) {
        wmax = w(j);
        best = j;
      }
    }
    if (best < 0) break;
    pos.push_back(best);

    // Inner loop: restrict to the positive set, backtrack while any
    // coefficient would go nonpositive.
    for (;;) {
      const Matrix XP = submatrix(X, pos);
      Eigen::ColPivHouseholderQR<Matrix> qr(XP);
      if (qr.rank() < static_cast<Eigen::Index>(pos.size()))
        throw NumericalError("nnls: rank-deficient positive set");
      const Vector s = qr.solve(y);
      if (s.minCoeff() > 0.0) {
        beta.setZero();
        for (std::size_t i = 0; i < pos.size(); ++i) beta(pos[i]) = s(i);
        break;
      }
      double alpha = kInf;
      for (std::size_t i = 0; i < pos.size(); ++i)
        if (s(i) <= 0.0) {
          const double bi = beta(pos[i]);
          alpha = std::min(alpha, bi / (bi - s(i)));
        }
      for (std::size_t i = 0; i < pos.size(); ++i)
        beta(pos[i]) += alpha * (s(i) - beta(pos[i]));
      std::erase_if(pos, [&](int j) {
        if (beta(j) <= 1e-12) {
          beta(j) = 0.0;
          return true;
        }
        return false;
      });
      if (pos.empty()) break;
    }
  }

  NnlsResult res;
  res.beta = beta;
  res.dual = -(X.transpose() * (y - X * beta));
  for (int j = 0; j < p; ++j)
    if (std::abs(res.dual(j)) <= std::max(tol, 1e-8)) res.active.push_back(j);
  return res;
}

}  // namespace selinf
