#include "selinf/variance.hpp"

#include <Eigen/QR>
#include <cmath>

#include "selinf/rng.hpp"
#include "selinf/truncnorm.hpp"

namespace selinf {

Matrix gibbs_tmvn(const Polytope& poly, const Vector& mean, double sigma2,
                  int n_samples, int burn_in, std::uint64_t seed,
                  const std::optional<Vector>& start) {
  if (!(sigma2 > 0.0)) throw InvalidInput("gibbs: sigma2 must be positive");
  if (n_samples < 1) throw InvalidInput("gibbs: n_samples must be >= 1");
  const int n = poly.dim() > 0 ? poly.dim() : static_cast<int>(mean.size());
  if (mean.size() != n) throw InvalidInput("gibbs: mean dimension mismatch");

  Vector x;
  if (poly.rows() == 0) {
    x = start.value_or(mean);
  } else {
    std::optional<Vector> hint = start;
    if (hint && !contains(poly, *hint)) hint.reset();
    auto feasible = find_interior_point(poly, 1e-7, 5000, hint ? hint : mean);
    if (!feasible)
      throw NumericalError("gibbs: no strictly feasible starting point found");
    x = *feasible;
  }

  Rng rng(seed, 0x6e1b5);
  Vector Ax = poly.rows() > 0 ? Vector(poly.A * x) : Vector();
  Matrix samples(n_samples, n);
  const int sweeps = burn_in + n_samples;
  for (int s = 0; s < sweeps; ++s) {
    for (int i = 0; i < n; ++i) {
      double lo = -kInf, hi = kInf;
      for (Eigen::Index j = 0; j < poly.rows(); ++j) {
        const double aji = poly.A(j, i);
        const double slack = poly.b(j) - Ax(j) + aji * x(i);
        if (aji > 1e-13) {
          hi = std::min(hi, slack / aji);
        } else if (aji < -1e-13) {
          lo = std::max(lo, slack / aji);
        }
      }
      if (!(lo < hi))
        throw NumericalError("gibbs: empty conditional interval");
      const double u = rng.uniform();
      const double t = std::clamp(tn_quantile(u, mean(i), sigma2, lo, hi),
                                  lo == -kInf ? -1e300 : lo,
                                  hi == kInf ? 1e300 : hi);
      if (poly.rows() > 0 && t != x(i)) Ax += poly.A.col(i) * (t - x(i));
      x(i) = t;
    }
    if (s >= burn_in) samples.row(s - burn_in) = x.transpose();
  }
  return samples;
}

VarianceEstimate estimate_sigma(const Polytope& event,
                                const RegressionData& data,
                                const std::vector<int>& M,
                                const SigmaConfig& config) {
  const int n = data.n();
  const int m = static_cast<int>(M.size());
  Vector resid = data.y;
  Matrix QM;  // orthonormal basis of span(X_M)
  if (!M.empty()) {
    Matrix XM(n, static_cast<Eigen::Index>(M.size()));
    for (std::size_t i = 0; i < M.size(); ++i) XM.col(i) = data.X.col(M[i]);
    Eigen::ColPivHouseholderQR<Matrix> qr(XM);
    if (qr.rank() < static_cast<Eigen::Index>(M.size()))
      throw NumericalError("estimate_sigma: X_M is rank deficient");
    QM = Eigen::HouseholderQR<Matrix>(XM).householderQ() *
         Matrix::Identity(n, m);
    resid = data.y - QM * (QM.transpose() * data.y);
  }
  const double target = resid.squaredNorm();

  VarianceEstimate est;
  est.n_samples = config.n_samples;
  est.burn_in = config.burn_in;
  est.seed = config.seed;
  est.assumption_note =
      "conditions on the selection event and assumes the active set covers "
      "the true support";

  if (event.rows() == 0) {
    // The residual carries n - |M| degrees of freedom.
    est.sigma2_hat = target / (n - m);
    est.score_residual = 0.0;
    return est;
  }

  // Score matches the residualized second moment so the span(X_M) component
  // of the event (which carries the selected signal) does not bias the
  // estimate. Common random numbers: the same seed (hence the same uniform
  // stream mapped through the truncated-normal inverse CDF) at every
  // candidate, so the Monte Carlo score is monotone in sigma2 and bisection
  // is safe.
  const Vector zero = Vector::Zero(n);
  double se_last = 0.0;
  auto score = [&](double sigma2) {
    const Matrix samples = gibbs_tmvn(event, zero, sigma2, config.n_samples,
                                      config.burn_in, config.seed);
    Vector sq(samples.rows());
    for (Eigen::Index i = 0; i < samples.rows(); ++i) {
      Vector z = samples.row(i).transpose();
      if (m > 0) z -= QM * (QM.transpose() * z);
      sq(i) = z.squaredNorm();
    }
    const double mean = sq.mean();
    const double var = (sq.array() - mean).square().sum() /
                       std::max(1, config.n_samples - 1);
    se_last = std::sqrt(var / config.n_samples);
    return mean;
  };

  double lo = target / (n - m), hi = lo;
  double f_lo = score(lo), f_hi = f_lo;
  int expand = 0;
  for (; expand < 60 && f_lo > target; ++expand) {
    lo /= 2.0;
    f_lo = score(lo);
  }
  for (expand = 0; expand < 60 && f_hi < target; ++expand) {
    hi *= 2.0;
    f_hi = score(hi);
  }
  if (f_lo > target || f_hi < target)
    throw NumericalError("estimate_sigma: score equation failed to bracket");

  double mid = 0.5 * (lo + hi), f_mid = 0.0;
  for (int it = 0; it < 80; ++it) {
    mid = 0.5 * (lo + hi);
    f_mid = score(mid);
    if (std::abs(f_mid - target) <= 2.0 * se_last) break;
    if (f_mid < target)
      lo = mid;
    else
      hi = mid;
    if ((hi - lo) < 1e-12 * hi) break;
  }
  est.sigma2_hat = mid;
  est.score_residual = std::abs(f_mid - target);
  return est;
}

}  // namespace selinf
