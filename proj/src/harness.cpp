#include "selinf/harness.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <fstream>

#include "selinf/blackbox.hpp"
#include "selinf/inference.hpp"
#include "selinf/knockoff.hpp"
#include "selinf/parallel.hpp"
#include "selinf/rng.hpp"
#include "selinf/variance.hpp"

namespace selinf {

Matrix gen_design(int n, int p, double rho, std::uint64_t seed) {
  if (n < 1 || p < 1) throw InvalidInput("gen_design: need n, p >= 1");
  if (!(rho >= 0.0 && rho < 1.0))
    throw InvalidInput("gen_design: rho must lie in [0, 1)");
  Rng rng(seed, 0xDE51);
  Matrix X(n, p);
  for (int i = 0; i < n; ++i) {
    const double common = rho > 0.0 ? rng.normal() : 0.0;
    for (int j = 0; j < p; ++j)
      X(i, j) = std::sqrt(1.0 - rho) * rng.normal() +
                std::sqrt(rho) * common;
  }
  for (int j = 0; j < p; ++j) X.col(j) /= X.col(j).norm();
  return X;
}

std::vector<Vector> sample_conditional(const SelectionEvent& event,
                                       const Vector& mu,
                                       const NoiseModel& noise, int n_draws,
                                       std::uint64_t seed) {
  if (n_draws < 1) throw InvalidInput("sample_conditional: n_draws >= 1");
  const int n = static_cast<int>(mu.size());

  std::vector<Vector> accepted;
  accepted.reserve(n_draws);
  long proposed = 0;
  const int batch = std::max(1024, 4 * n_draws);
  while (static_cast<int>(accepted.size()) < n_draws) {
    std::vector<Vector> draws(batch);
    std::vector<char> ok(batch, 0);
    parallel::for_each_index(batch, [&](long i) {
      Rng rng(seed, 0xACC, static_cast<std::uint64_t>(proposed + i));
      Vector eps(n);
      for (int k = 0; k < n; ++k) eps(k) = rng.normal();
      Vector y = mu + noise.half_apply(eps);
      if (contains(event, y)) {
        draws[i] = std::move(y);
        ok[i] = 1;
      }
    });
    for (int i = 0; i < batch && static_cast<int>(accepted.size()) < n_draws;
         ++i)
      if (ok[i]) accepted.push_back(std::move(draws[i]));
    proposed += batch;

    const double rate =
        static_cast<double>(accepted.size()) / static_cast<double>(proposed);
    if (proposed >= 20000 && rate < 1e-3) {
      // Rejection is hopeless; Gibbs over the polytope instead.
      if (!event.is_single())
        throw NumericalError(
            "sample_conditional: acceptance below 1e-3 and Gibbs fallback "
            "supports single-polytope events only");
      if (!noise.is_isotropic())
        throw NumericalError(
            "sample_conditional: Gibbs fallback requires isotropic noise");
      const int thin = 5;
      const Matrix chain =
          gibbs_tmvn(event.poly(), mu, noise.sigma2(), n_draws * thin, 2000,
                     seed ^ 0x9e3779b9ULL);
      accepted.clear();
      for (int i = 0; i < n_draws; ++i)
        accepted.push_back(chain.row(thin * i + thin - 1).transpose());
      return accepted;
    }
  }
  return accepted;
}

KsResult ks_uniform(std::vector<double> values) {
  if (values.size() < 20)
    throw InvalidInput("ks_uniform: need at least 20 values");
  for (double v : values)
    if (!(v >= 0.0 && v <= 1.0))
      throw InvalidInput("ks_uniform: values must lie in [0,1]");
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  double d = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double hi = (i + 1) / n - values[i];
    const double lo = values[i] - i / n;
    d = std::max({d, hi, lo});
  }
  // Asymptotic Kolmogorov distribution with the small-sample correction.
  const double lam = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d;
  double p = 0.0;
  for (int k = 1; k <= 100; ++k)
    p += 2.0 * (k % 2 == 1 ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lam * lam);
  return {d, std::clamp(p, 0.0, 1.0)};
}

double lambda_suggest(const Matrix& X, double sigma2, std::uint64_t seed,
                      int draws) {
  Rng rng(seed, 0x1A3BDA);
  const int n = static_cast<int>(X.rows());
  double acc = 0.0;
  const double s = std::sqrt(sigma2);
  Vector eps(n);
  for (int d = 0; d < draws; ++d) {
    for (int i = 0; i < n; ++i) eps(i) = s * rng.normal();
    acc += (X.transpose() * eps).lpNorm<Eigen::Infinity>();
  }
  return 2.0 * acc / draws;
}

const std::vector<Scenario>& scenario_registry() {
  static const std::vector<Scenario> reg = [] {
    std::vector<Scenario> v;
    auto add = [&](Scenario sc) { v.push_back(std::move(sc)); };

    add({.name = "pivot-uniformity", .kind = "pivot-uniformity",
         .n = 25, .p = 10, .rho = 0.0, .n_signals = 3, .amplitude = 6.0,
         .sigma2 = 1.0, .alpha = 0.1});
    add({.name = "ci-coverage", .kind = "ci-coverage",
         .n = 100, .p = 50, .rho = 0.0, .n_signals = 5, .amplitude = 5.0,
         .sigma2 = 0.25, .alpha = 0.1,
         .note = "five signals at 5.0, noise variance 0.25"});
    add({.name = "fcr", .kind = "ci-coverage",
         .n = 100, .p = 50, .rho = 0.0, .n_signals = 5, .amplitude = 5.0,
         .sigma2 = 0.25, .alpha = 0.1});
    add({.name = "gof-null", .kind = "gof-null",
         .n = 100, .p = 50, .rho = 0.0, .n_signals = 3, .amplitude = 10.0,
         .sigma2 = 2.0, .alpha = 0.1, .lambda_scale = 1.0,
         .note = "signals at 1.0 on a raw Gaussian design; amplitude carries "
                 "the sqrt(n) column-norm conversion"});
    add({.name = "gof-null-corr", .kind = "gof-null",
         .n = 100, .p = 50, .rho = 0.7, .n_signals = 3, .amplitude = 10.0,
         .sigma2 = 2.0, .alpha = 0.1, .lambda_scale = 1.0});
    add({.name = "gof-power", .kind = "gof-power",
         .n = 100, .p = 50, .rho = 0.0, .n_signals = 3, .amplitude = 10.0,
         .sigma2 = 2.0, .alpha = 0.1, .lambda_scale = 0.75,
         .note = "lambda_scale is the fraction of the observed lambda_max"});
    add({.name = "gof-power-corr", .kind = "gof-power",
         .n = 100, .p = 50, .rho = 0.7, .n_signals = 3, .amplitude = 10.0,
         .sigma2 = 2.0, .alpha = 0.1, .lambda_scale = 0.75});
    add({.name = "path-fwer-null", .kind = "path-fwer",
         .n = 100, .p = 20, .rho = 0.0, .n_signals = 0, .amplitude = 0.0,
         .sigma2 = 1.0, .alpha = 0.1, .n_lambdas = 5});
    add({.name = "path-fwer-power", .kind = "path-fwer",
         .n = 100, .p = 20, .rho = 0.0, .n_signals = 3, .amplitude = 8.0,
         .sigma2 = 1.0, .alpha = 0.1, .n_lambdas = 8});
    add({.name = "fdr-by", .kind = "fdr-by",
         .n = 100, .p = 20, .rho = 0.0, .n_signals = 3, .amplitude = 5.0,
         .sigma2 = 1.0, .alpha = 0.2});
    add({.name = "fdr-knockoff", .kind = "fdr-knockoff",
         .n = 100, .p = 20, .rho = 0.0, .n_signals = 0, .amplitude = 0.0,
         .sigma2 = 1.0, .alpha = 0.2, .n_lambdas = 12, .plus = true});
    add({.name = "knockoff-power", .kind = "fdr-knockoff",
         .n = 200, .p = 20, .rho = 0.0, .n_signals = 3, .amplitude = 3.5,
         .sigma2 = 1.0, .alpha = 0.4, .n_lambdas = 40, .plus = false,
         .note = "power check for the modified-FDR rule on a dense path"});
    add({.name = "sigma-estimate", .kind = "sigma-estimate",
         .n = 25, .p = 5, .rho = 0.0, .n_signals = 2, .amplitude = 6.0,
         .sigma2 = 1.0, .alpha = 0.1});
    add({.name = "composite-level", .kind = "composite-level",
         .n = 25, .p = 10, .rho = 0.0, .n_signals = 3, .amplitude = 6.0,
         .sigma2 = 1.0, .alpha = 0.1});
    add({.name = "knockoff-ci-coverage", .kind = "knockoff-ci",
         .n = 50, .p = 4, .rho = 0.0, .n_signals = 2, .amplitude = 5.0,
         .sigma2 = 1.0, .alpha = 0.1, .n_lambdas = 5, .plus = false});
    return v;
  }();
  return reg;
}

const Scenario& find_scenario(const std::string& name) {
  for (const auto& sc : scenario_registry())
    if (sc.name == name) return sc;
  throw InvalidInput("unknown scenario '" + name + "'");
}

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

Vector make_mu(const Matrix& X, int n_signals, double amplitude) {
  Vector beta = Vector::Zero(X.cols());
  for (int j = 0; j < n_signals; ++j) beta(j) = amplitude;
  return X * beta;
}

Vector draw_y(const Vector& mu, double sigma2, Rng& rng) {
  Vector y(mu.size());
  const double s = std::sqrt(sigma2);
  for (Eigen::Index i = 0; i < mu.size(); ++i) y(i) = mu(i) + s * rng.normal();
  return y;
}

bool covers_support(const std::vector<int>& active, int n_signals) {
  for (int j = 0; j < n_signals; ++j)
    if (std::find(active.begin(), active.end(), j) == active.end())
      return false;
  return true;
}

Vector submodel_target(const Matrix& X, const std::vector<int>& M,
                       const Vector& mu) {
  Matrix XM(X.rows(), static_cast<Eigen::Index>(M.size()));
  for (std::size_t i = 0; i < M.size(); ++i) XM.col(i) = X.col(M[i]);
  return Eigen::ColPivHouseholderQR<Matrix>(XM).solve(mu);
}

std::vector<double> geom_grid(double hi, double lo, int count) {
  std::vector<double> out(count);
  for (int i = 0; i < count; ++i)
    out[i] = hi * std::pow(lo / hi, count == 1 ? 0.0 : double(i) / (count - 1));
  return out;
}

struct Context {
  const Scenario& sc;
  std::uint64_t seed;
  std::uint64_t sid;
  Matrix X;
  Vector mu;
  NoiseModel noise;
};

SimResult run_pivot_uniformity(const Context& cx, int reps, bool serial) {
  const double lambda =
      cx.sc.lambda > 0 ? cx.sc.lambda
                       : cx.sc.lambda_scale *
                             lambda_suggest(cx.X, cx.sc.sigma2, cx.sid);
  // Master draw defines the conditioning event; retry until non-empty.
  LassoFit fit;
  for (std::uint64_t attempt = 0;; ++attempt) {
    if (attempt > 50)
      throw NumericalError("pivot scenario: no non-empty selection found");
    Rng rng(cx.seed, cx.sid, 1000000 + attempt);
    const Vector y0 = draw_y(cx.mu, cx.sc.sigma2, rng);
    RegressionData d = RegressionData::make(cx.X, y0);
    fit = fit_lasso(d, lambda);
    if (!fit.active.empty()) break;
  }
  const SelectionEvent event =
      SelectionEvent::single(lasso_event(cx.X, fit.active, fit.signs, lambda));
  const Contrast eta = coef_contrast(cx.X, fit.active, fit.active[0], cx.noise);
  const double null_value = eta.eta.dot(cx.mu);

  const std::vector<Vector> draws =
      sample_conditional(event, cx.mu, cx.noise, reps, cx.seed ^ cx.sid);
  std::vector<double> pivots(draws.size());
  parallel::for_each_index(static_cast<long>(draws.size()), [&](long i) {
    const TruncationResult tr =
        truncation_interval(event, eta, cx.noise, draws[i]);
    pivots[i] = tn_cdf(tr.observed, null_value, eta.scale, tr.region);
  }, serial);

  SimResult res;
  res.columns = {"draw", "pivot"};
  for (std::size_t i = 0; i < pivots.size(); ++i)
    res.rows.push_back({static_cast<double>(i), pivots[i]});
  const KsResult ks = ks_uniform(pivots);
  res.summary["ks_statistic"] = ks.statistic;
  res.summary["ks_pvalue"] = ks.p_value;
  res.summary["n_active"] = static_cast<double>(fit.active.size());
  return res;
}

SimResult run_ci_coverage(const Context& cx, int reps, bool serial) {
  const double lambda =
      cx.sc.lambda > 0 ? cx.sc.lambda
                       : cx.sc.lambda_scale *
                             lambda_suggest(cx.X, cx.sc.sigma2, cx.sid);
  struct Rep {
    std::vector<double> covered;
    std::vector<double> lengths;
  };
  std::vector<Rep> out(reps);
  parallel::for_each_index(reps, [&](long r) {
    Rng rng(cx.seed, cx.sid, r + 1);
    const Vector y = draw_y(cx.mu, cx.sc.sigma2, rng);
    RegressionData d = RegressionData::make(cx.X, y, cx.noise);
    const LassoFit fit = fit_lasso(d, lambda);
    if (fit.active.empty()) return;
    const SelectionEvent event = SelectionEvent::single(
        lasso_event(cx.X, fit.active, fit.signs, lambda));
    const Vector target = submodel_target(cx.X, fit.active, cx.mu);
    const auto cis = fcr_batch(event, cx.X, y, cx.noise, cx.sc.alpha);
    for (std::size_t i = 0; i < cis.size(); ++i) {
      const bool cov =
          cis[i].lower <= target(i) && target(i) <= cis[i].upper;
      out[r].covered.push_back(cov ? 1.0 : 0.0);
      out[r].lengths.push_back(cis[i].upper - cis[i].lower);
    }
  }, serial);

  SimResult res;
  res.columns = {"rep", "interval", "covered", "length"};
  double cov_sum = 0.0, n_int = 0.0, fcr_sum = 0.0, len_sum = 0.0,
         len_n = 0.0;
  int reps_with = 0;
  for (int r = 0; r < reps; ++r) {
    double miss = 0.0;
    for (std::size_t i = 0; i < out[r].covered.size(); ++i) {
      res.rows.push_back({static_cast<double>(r), static_cast<double>(i),
                          out[r].covered[i], out[r].lengths[i]});
      cov_sum += out[r].covered[i];
      miss += 1.0 - out[r].covered[i];
      n_int += 1.0;
      if (std::isfinite(out[r].lengths[i])) {
        len_sum += out[r].lengths[i];
        len_n += 1.0;
      }
    }
    if (!out[r].covered.empty()) {
      ++reps_with;
      fcr_sum += miss / static_cast<double>(out[r].covered.size());
    }
  }
  res.summary["coverage"] = n_int > 0 ? cov_sum / n_int : 1.0;
  res.summary["fcr"] = reps > 0 ? fcr_sum / reps : 0.0;
  res.summary["n_intervals"] = n_int;
  res.summary["mean_length"] = len_n > 0 ? len_sum / len_n : 0.0;
  res.summary["reps_with_selection"] = reps_with;
  return res;
}

SimResult run_gof(const Context& cx, int reps, bool serial, bool null_kind) {
  // Null scenarios test pivot uniformity at a fixed noise-scaled lambda.
  // Power scenarios sit high on the per-dataset path (a fraction of the
  // observed lambda_max), where the fit genuinely omits signal.
  const double fixed_lambda =
      cx.sc.lambda > 0 ? cx.sc.lambda
                       : cx.sc.lambda_scale *
                             lambda_suggest(cx.X, cx.sc.sigma2, cx.sid);
  struct Rep {
    int status = -1;  // -1 skip, 0 alternative, 1 null
    double p = 0.0;
  };
  std::vector<Rep> out(reps);
  parallel::for_each_index(reps, [&](long r) {
    Rng rng(cx.seed, cx.sid, r + 1);
    const Vector y = draw_y(cx.mu, cx.sc.sigma2, rng);
    RegressionData d = RegressionData::make(cx.X, y, cx.noise);
    const double lambda =
        null_kind ? fixed_lambda
                  : cx.sc.lambda_scale *
                        (cx.X.transpose() * y).lpNorm<Eigen::Infinity>();
    const LassoFit fit = fit_lasso(d, lambda);
    if (fit.active.empty() ||
        static_cast<int>(fit.active.size()) >= cx.sc.p)
      return;
    const PivotResult pr =
        gof_test(cx.X, y, fit.active, fit.signs, lambda, cx.noise);
    out[r].status = covers_support(fit.active, cx.sc.n_signals) ? 1 : 0;
    out[r].p = pr.p_value;
  }, serial);

  SimResult res;
  res.columns = {"rep", "null_holds", "p_value"};
  std::vector<double> null_p, alt_p;
  for (int r = 0; r < reps; ++r) {
    if (out[r].status < 0) continue;
    res.rows.push_back(
        {static_cast<double>(r), static_cast<double>(out[r].status), out[r].p});
    (out[r].status == 1 ? null_p : alt_p).push_back(out[r].p);
  }
  res.summary["n_null"] = static_cast<double>(null_p.size());
  res.summary["n_alt"] = static_cast<double>(alt_p.size());
  if (null_kind && null_p.size() >= 20) {
    const KsResult ks = ks_uniform(null_p);
    res.summary["ks_statistic"] = ks.statistic;
    res.summary["ks_pvalue"] = ks.p_value;
  }
  if (!alt_p.empty()) {
    std::sort(alt_p.begin(), alt_p.end());
    res.summary["median_alt_p"] = alt_p[alt_p.size() / 2];
  }
  return res;
}

SimResult run_path_fwer(const Context& cx, int reps, bool serial) {
  const double L = lambda_suggest(cx.X, cx.sc.sigma2, cx.sid) / 2.0;
  const std::vector<double> lambdas =
      cx.sc.n_signals > 0 ? geom_grid(2.4 * L, 0.4 * L, cx.sc.n_lambdas)
                          : geom_grid(1.2 * L, 0.5 * L, cx.sc.n_lambdas);
  struct Rep {
    int any_reject = 0;
    int stop = 0;
    int has_all = 0;
  };
  std::vector<Rep> out(reps);
  parallel::for_each_index(reps, [&](long r) {
    Rng rng(cx.seed, cx.sid, r + 1);
    const Vector y = draw_y(cx.mu, cx.sc.sigma2, rng);
    RegressionData d = RegressionData::make(cx.X, y, cx.noise);
    const PathState st = path_fwer(d, lambdas, cx.sc.alpha);
    for (const auto& pv : st.gof_pvalues)
      if (pv && pv->pivot > 1.0 - cx.sc.alpha) out[r].any_reject = 1;
    out[r].stop = st.stop_index;
    if (st.stop_index < static_cast<int>(st.fits.size()) &&
        covers_support(st.fits[st.stop_index].active, cx.sc.n_signals))
      out[r].has_all = 1;
    else if (st.stop_index >= static_cast<int>(st.fits.size()) &&
             !st.fits.empty() &&
             covers_support(st.fits.back().active, cx.sc.n_signals))
      out[r].has_all = 1;
  }, serial);

  SimResult res;
  res.columns = {"rep", "any_reject", "stop_index", "stop_covers_support"};
  double rej = 0.0, all = 0.0;
  for (int r = 0; r < reps; ++r) {
    res.rows.push_back({static_cast<double>(r),
                        static_cast<double>(out[r].any_reject),
                        static_cast<double>(out[r].stop),
                        static_cast<double>(out[r].has_all)});
    rej += out[r].any_reject;
    all += out[r].has_all;
  }
  res.summary["fwer"] = rej / reps;
  res.summary["prob_stop_covers_support"] = all / reps;
  return res;
}

SimResult run_fdr_by(const Context& cx, int reps, bool serial) {
  const double lambda =
      cx.sc.lambda > 0 ? cx.sc.lambda
                       : cx.sc.lambda_scale *
                             lambda_suggest(cx.X, cx.sc.sigma2, cx.sid);
  struct Rep {
    int R = 0, V = 0, TP = 0;
  };
  std::vector<Rep> out(reps);
  parallel::for_each_index(reps, [&](long r) {
    Rng rng(cx.seed, cx.sid, r + 1);
    const Vector y = draw_y(cx.mu, cx.sc.sigma2, rng);
    RegressionData d = RegressionData::make(cx.X, y, cx.noise);
    const FdrResult f = full_model_fdr(d, lambda, cx.sc.alpha);
    out[r].R = static_cast<int>(f.rejected.size());
    for (int j : f.rejected)
      (j < cx.sc.n_signals ? out[r].TP : out[r].V)++;
  }, serial);

  SimResult res;
  res.columns = {"rep", "rejections", "false_rejections"};
  double fdp = 0.0, tp = 0.0;
  for (int r = 0; r < reps; ++r) {
    res.rows.push_back({static_cast<double>(r), static_cast<double>(out[r].R),
                        static_cast<double>(out[r].V)});
    fdp += static_cast<double>(out[r].V) / std::max(out[r].R, 1);
    tp += out[r].TP;
  }
  res.summary["fdr"] = fdp / reps;
  res.summary["power"] = cx.sc.n_signals > 0
                             ? tp / (reps * cx.sc.n_signals)
                             : 0.0;
  return res;
}

SimResult run_fdr_knockoff(const Context& cx, int reps, bool serial) {
  struct Rep {
    int R = 0, V = 0, TP = 0;
  };
  std::vector<Rep> out(reps);
  parallel::for_each_index(reps, [&](long r) {
    Rng rng(cx.seed, cx.sid, r + 1);
    const Vector y = draw_y(cx.mu, cx.sc.sigma2, rng);
    RegressionData d = RegressionData::make(cx.X, y, cx.noise);
    Matrix aug(cx.sc.n, 2 * cx.sc.p);
    aug << cx.X, equi_knockoffs(cx.X);
    const double lmax = (aug.transpose() * y).lpNorm<Eigen::Infinity>();
    // Power runs use a higher, denser path so late-entering knockoffs cannot
    // contaminate the prefix carrying the last signal.
    const std::vector<double> lambdas =
        cx.sc.n_signals > 0
            ? geom_grid(0.99 * lmax, 0.35 * lmax, cx.sc.n_lambdas)
            : geom_grid(0.95 * lmax, 0.15 * lmax, cx.sc.n_lambdas);
    const KnockoffState st =
        knockoff_select(d, lambdas, cx.sc.alpha, cx.sc.plus);
    out[r].R = static_cast<int>(st.selected.size());
    for (int j : st.selected)
      (j < cx.sc.n_signals ? out[r].TP : out[r].V)++;
  }, serial);

  SimResult res;
  res.columns = {"rep", "selected", "false_selected"};
  double fdp = 0.0, tp = 0.0, all = 0.0;
  for (int r = 0; r < reps; ++r) {
    res.rows.push_back({static_cast<double>(r), static_cast<double>(out[r].R),
                        static_cast<double>(out[r].V)});
    fdp += static_cast<double>(out[r].V) / std::max(out[r].R, 1);
    tp += out[r].TP;
    if (cx.sc.n_signals > 0 && out[r].TP == cx.sc.n_signals) all += 1.0;
  }
  res.summary["fdr"] = fdp / reps;
  res.summary["power"] =
      cx.sc.n_signals > 0 ? tp / (reps * cx.sc.n_signals) : 0.0;
  res.summary["prob_all_signals"] = cx.sc.n_signals > 0 ? all / reps : 0.0;
  return res;
}

SimResult run_sigma_estimate(const Context& cx, int reps, bool serial) {
  const double lambda =
      cx.sc.lambda > 0 ? cx.sc.lambda
                       : cx.sc.lambda_scale *
                             lambda_suggest(cx.X, cx.sc.sigma2, cx.sid);
  std::vector<double> est(reps, -1.0);
  parallel::for_each_index(reps, [&](long r) {
    Rng rng(cx.seed, cx.sid, r + 1);
    const Vector y = draw_y(cx.mu, cx.sc.sigma2, rng);
    RegressionData d = RegressionData::make(cx.X, y);
    const LassoFit fit = fit_lasso(d, lambda);
    if (fit.active.empty()) return;
    const Polytope event =
        lasso_event(cx.X, fit.active, fit.signs, lambda);
    SigmaConfig cfg;
    cfg.n_samples = 3000;
    cfg.burn_in = 500;
    cfg.seed = cx.seed ^ (0x51 + static_cast<std::uint64_t>(r));
    est[r] = estimate_sigma(event, d, fit.active, cfg).sigma2_hat;
  }, serial);

  SimResult res;
  res.columns = {"rep", "sigma2_hat"};
  double sum = 0.0;
  int count = 0;
  for (int r = 0; r < reps; ++r) {
    if (est[r] < 0) continue;
    res.rows.push_back({static_cast<double>(r), est[r]});
    sum += est[r];
    ++count;
  }
  res.summary["mean_sigma2"] = count > 0 ? sum / count : 0.0;
  res.summary["relative_error"] =
      count > 0 ? std::abs(sum / count - cx.sc.sigma2) / cx.sc.sigma2 : 1.0;
  res.summary["n_used"] = count;
  return res;
}

SimResult run_composite_level(const Context& cx, int reps, bool serial) {
  const double lambda = cx.sc.lambda_scale *
                        lambda_suggest(cx.X, cx.sc.sigma2, cx.sid);
  LassoFit fit;
  Vector y0;
  for (std::uint64_t attempt = 0;; ++attempt) {
    if (attempt > 50)
      throw NumericalError("composite scenario: no non-empty selection");
    Rng rng(cx.seed, cx.sid, 3000000 + attempt);
    y0 = draw_y(cx.mu, cx.sc.sigma2, rng);
    fit = fit_lasso(RegressionData::make(cx.X, y0), lambda);
    if (!fit.active.empty()) break;
  }
  const SelectionEvent event =
      SelectionEvent::single(lasso_event(cx.X, fit.active, fit.signs, lambda));
  const Contrast eta = coef_contrast(cx.X, fit.active, fit.active[0], cx.noise);
  const double delta0 = 0.5;
  // Put the mean exactly on the composite boundary eta'mu = delta0.
  const Vector dir = cx.noise.apply(eta.eta) / eta.scale;
  const Vector mu_b = cx.mu + (delta0 - eta.eta.dot(cx.mu)) * dir;

  const std::vector<Vector> draws =
      sample_conditional(event, mu_b, cx.noise, reps, cx.seed ^ cx.sid ^ 0xC);
  std::vector<double> reject(draws.size(), 0.0);
  parallel::for_each_index(static_cast<long>(draws.size()), [&](long i) {
    const PivotResult pr =
        composite_test(event, eta, cx.noise, draws[i], delta0);
    reject[i] = pr.pivot > 1.0 - cx.sc.alpha ? 1.0 : 0.0;
  }, serial);

  SimResult res;
  res.columns = {"draw", "reject"};
  double sum = 0.0;
  for (std::size_t i = 0; i < reject.size(); ++i) {
    res.rows.push_back({static_cast<double>(i), reject[i]});
    sum += reject[i];
  }
  res.summary["rejection_rate"] = sum / static_cast<double>(reject.size());
  res.summary["alpha"] = cx.sc.alpha;
  return res;
}

SimResult run_knockoff_ci(const Context& cx, int reps, bool serial) {
  struct Rep {
    std::vector<double> covered;
  };
  std::vector<Rep> out(reps);
  parallel::for_each_index(reps, [&](long r) {
    Rng rng(cx.seed, cx.sid, r + 1);
    const Vector y = draw_y(cx.mu, cx.sc.sigma2, rng);
    RegressionData d = RegressionData::make(cx.X, y, cx.noise);
    Matrix aug(cx.sc.n, 2 * cx.sc.p);
    aug << cx.X, equi_knockoffs(cx.X);
    const double lmax = (aug.transpose() * y).lpNorm<Eigen::Infinity>();
    const std::vector<double> lambdas =
        geom_grid(0.9 * lmax, 0.3 * lmax, cx.sc.n_lambdas);
    const KnockoffState st =
        knockoff_select(d, lambdas, cx.sc.alpha, cx.sc.plus);
    if (st.selected.empty()) return;
    const auto cis = knockoff_ci(d, lambdas, st, cx.sc.alpha);
    const Vector target = submodel_target(cx.X, st.selected, cx.mu);
    for (std::size_t i = 0; i < cis.size(); ++i)
      out[r].covered.push_back(cis[i].lower <= target(i) &&
                                       target(i) <= cis[i].upper
                                   ? 1.0
                                   : 0.0);
  }, serial);

  SimResult res;
  res.columns = {"rep", "interval", "covered"};
  double cov = 0.0, n = 0.0;
  for (int r = 0; r < reps; ++r)
    for (std::size_t i = 0; i < out[r].covered.size(); ++i) {
      res.rows.push_back(
          {static_cast<double>(r), static_cast<double>(i), out[r].covered[i]});
      cov += out[r].covered[i];
      n += 1.0;
    }
  res.summary["coverage"] = n > 0 ? cov / n : 1.0;
  res.summary["n_intervals"] = n;
  return res;
}

}  // namespace

SimResult run_scenario(const Scenario& sc, int reps, std::uint64_t seed,
                       bool force_serial) {
  if (reps < 1) throw InvalidInput("run_scenario: reps must be >= 1");
  const std::uint64_t sid = fnv1a(sc.name);
  Context cx{sc, seed, sid, gen_design(sc.n, sc.p, sc.rho, seed ^ sid),
             Vector(), NoiseModel::isotropic(sc.sigma2)};
  cx.mu = make_mu(cx.X, sc.n_signals, sc.amplitude);

  SimResult res;
  if (sc.kind == "pivot-uniformity")
    res = run_pivot_uniformity(cx, reps, force_serial);
  else if (sc.kind == "ci-coverage")
    res = run_ci_coverage(cx, reps, force_serial);
  else if (sc.kind == "gof-null")
    res = run_gof(cx, reps, force_serial, true);
  else if (sc.kind == "gof-power")
    res = run_gof(cx, reps, force_serial, false);
  else if (sc.kind == "path-fwer")
    res = run_path_fwer(cx, reps, force_serial);
  else if (sc.kind == "fdr-by")
    res = run_fdr_by(cx, reps, force_serial);
  else if (sc.kind == "fdr-knockoff")
    res = run_fdr_knockoff(cx, reps, force_serial);
  else if (sc.kind == "sigma-estimate")
    res = run_sigma_estimate(cx, reps, force_serial);
  else if (sc.kind == "composite-level")
    res = run_composite_level(cx, reps, force_serial);
  else if (sc.kind == "knockoff-ci")
    res = run_knockoff_ci(cx, reps, force_serial);
  else
    throw InvalidInput("run_scenario: unknown kind '" + sc.kind + "'");
  return res;
}

void write_csv(const SimResult& result, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot open '" + path + "' for writing");
  for (std::size_t c = 0; c < result.columns.size(); ++c)
    out << (c ? "," : "") << result.columns[c];
  out << "\n";
  out.precision(17);
  for (const auto& row : result.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << row[c];
    out << "\n";
  }
}

}  // namespace selinf
