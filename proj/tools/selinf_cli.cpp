// selinf: selective inference for lasso-style variable selection.
//
// Subcommands: select, infer, path-fwer, fdr, knockoff, simulate, blackbox-p.
// Results go to stdout as JSON (simulate also writes CSV); errors are a
// single JSON line on stderr. Exit codes: 0 ok, 1 data/numeric error,
// 2 usage error.
#include <CLI11.hpp>
#include <Eigen/QR>
#include <iostream>
#include <optional>
#include <string>

#include "selinf/blackbox.hpp"
#include "selinf/harness.hpp"
#include "selinf/inference.hpp"
#include "selinf/json_io.hpp"
#include "selinf/knockoff.hpp"
#include "selinf/solvers.hpp"
#include "selinf/variance.hpp"

using namespace selinf;

namespace {

struct DataOptions {
  std::string path;
  std::string response = "y";
  bool do_standardize = false;
  double sigma2 = 0.0;  // 0 = unset
  bool estimate = false;
};

void add_data_options(CLI::App* cmd, DataOptions& opt, bool need_noise) {
  cmd->add_option("--data", opt.path, "CSV file with a header row")
      ->required();
  cmd->add_option("--response", opt.response, "response column name");
  cmd->add_flag("--standardize", opt.do_standardize,
                "center/scale predictors and center the response");
  if (need_noise) {
    cmd->add_option("--sigma", opt.sigma2, "noise variance sigma^2 of y");
    cmd->add_flag("--estimate-sigma", opt.estimate,
                  "estimate sigma^2 on the selection event when --sigma is "
                  "absent");
  }
}

RegressionData load_data(const DataOptions& opt) {
  RegressionData d = load_csv(opt.path, opt.response);
  if (opt.do_standardize) d = standardize(d);
  if (opt.sigma2 > 0.0) d.noise = NoiseModel::isotropic(opt.sigma2);
  return d;
}

struct MethodOptions {
  std::string method = "lasso";
  double lambda = 0.0;
  double gamma = 0.0;
  int k = 1;
};

void add_method_options(CLI::App* cmd, MethodOptions& opt) {
  cmd->add_option("--method", opt.method,
                  "lasso|enet|screen|omp|nnls|screen+lasso")
      ->check(CLI::IsMember(
          {"lasso", "enet", "screen", "omp", "nnls", "screen+lasso"}));
  cmd->add_option("--lambda", opt.lambda, "l1 penalty level");
  cmd->add_option("--gamma", opt.gamma, "l2 penalty level (enet)");
  cmd->add_option("--k", opt.k, "model size (screen/omp/screen+lasso)");
}

struct Selection {
  std::vector<int> active;       // indices into the original design
  std::vector<int> signs;        // empty for nnls
  Vector coefs;                  // aligned with active
  SelectionEvent event = SelectionEvent::single(Polytope::make(
      Matrix(0, 0), Vector(0)));  // replaced by run_selection
  Polytope event_poly;            // single-polytope version for sigma/gibbs
};

Selection run_selection(const RegressionData& d, const MethodOptions& m,
                        bool minimal) {
  Selection out;
  const Matrix& X = d.X;
  if (m.method == "lasso" || m.method == "enet") {
    if (!(m.lambda > 0)) throw InvalidInput("--lambda must be positive");
    const LassoFit fit = m.method == "lasso"
                             ? fit_lasso(d, m.lambda)
                             : fit_elastic_net(d, m.lambda, m.gamma);
    if (fit.active.empty())
      throw InvalidInput("empty active set at this lambda; nothing to infer");
    out.active = fit.active;
    out.signs = fit.signs;
    out.coefs = fit.U;
    out.event_poly =
        m.method == "lasso"
            ? lasso_event(X, fit.active, fit.signs, m.lambda)
            : enet_event(X, fit.active, fit.signs, m.lambda, m.gamma);
    out.event = minimal && m.method == "lasso"
                    ? union_over_signs(X, fit.active, m.lambda)
                    : SelectionEvent::single(out.event_poly);
    return out;
  }
  if (m.method == "screen") {
    const auto sel = marginal_screen(d, m.k);
    out.active = sel.active;
    out.signs = sel.signs;
    out.event_poly = ms_event(X, sel.active, sel.signs);
  } else if (m.method == "omp") {
    const auto path = omp(d, m.k);
    for (const auto& [j, s] : path.steps) {
      out.active.push_back(j);
      out.signs.push_back(s);
    }
    out.event_poly = omp_event(X, path);
  } else if (m.method == "nnls") {
    const auto fit = nnls(d);
    if (fit.active.empty())
      throw InvalidInput("nnls selected nothing; nothing to infer");
    out.active = fit.active;
    out.event_poly = nnls_event(X, fit.active);
    out.coefs.resize(static_cast<Eigen::Index>(fit.active.size()));
    for (std::size_t i = 0; i < fit.active.size(); ++i)
      out.coefs(i) = fit.beta(fit.active[i]);
  } else {  // screen+lasso
    if (!(m.lambda > 0)) throw InvalidInput("--lambda must be positive");
    const auto sel = marginal_screen(d, m.k);
    std::vector<int> screened = sel.active;
    std::sort(screened.begin(), screened.end());
    Matrix Xs(d.n(), static_cast<Eigen::Index>(screened.size()));
    for (std::size_t i = 0; i < screened.size(); ++i)
      Xs.col(i) = X.col(screened[i]);
    const LassoFit fit =
        fit_lasso(RegressionData::make(Xs, d.y), m.lambda);
    if (fit.active.empty())
      throw InvalidInput("empty active set after screening");
    for (std::size_t i = 0; i < fit.active.size(); ++i)
      out.active.push_back(screened[fit.active[i]]);
    out.signs = fit.signs;
    out.coefs = fit.U;
    out.event_poly = intersect(
        {ms_event(X, sel.active, sel.signs),
         lasso_event(Xs, fit.active, fit.signs, m.lambda)});
  }
  if (out.coefs.size() == 0 && !out.active.empty()) {
    // OLS refit coefficients on the selected set.
    Matrix XM(d.n(), static_cast<Eigen::Index>(out.active.size()));
    for (std::size_t i = 0; i < out.active.size(); ++i)
      XM.col(i) = X.col(out.active[i]);
    out.coefs = XM.colPivHouseholderQr().solve(d.y);
  }
  out.event = SelectionEvent::single(out.event_poly);
  return out;
}

NoiseModel resolve_noise(RegressionData& d, const DataOptions& opt,
                         const Selection& sel) {
  if (d.noise) return *d.noise;
  if (!opt.estimate)
    throw InvalidInput(
        "noise level not set: pass --sigma or use --estimate-sigma");
  const VarianceEstimate est =
      estimate_sigma(sel.event_poly, d, sel.active);
  d.noise = NoiseModel::isotropic(est.sigma2_hat);
  return *d.noise;
}

std::string name_of(const RegressionData& d, int j) {
  return d.names.empty() ? "x" + std::to_string(j + 1) : d.names[j];
}

std::vector<double> parse_lambdas(const std::string& csv) {
  std::vector<double> out;
  std::size_t at = 0;
  while (at < csv.size()) {
    const std::size_t comma = csv.find(',', at);
    const std::string tok = csv.substr(at, comma - at);
    try {
      out.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw InvalidInput("bad lambda value '" + tok + "'");
    }
    if (comma == std::string::npos) break;
    at = comma + 1;
  }
  if (out.empty()) throw InvalidInput("--lambdas is empty");
  return out;
}

int protected_main(int argc, char** argv) {
  CLI::App app{"selective inference for linear-model variable selection"};
  app.require_subcommand(1);

  DataOptions data_opt;
  MethodOptions method_opt;
  bool dump_event = false;
  double alpha = 0.1;

  // select
  auto* sel_cmd = app.add_subcommand("select", "fit a selector, report "
                                               "active set and signs");
  DataOptions sel_data;
  MethodOptions sel_method;
  bool sel_dump = false;
  add_data_options(sel_cmd, sel_data, false);
  add_method_options(sel_cmd, sel_method);
  sel_cmd->add_flag("--dump-event", sel_dump,
                    "include the selection polytope in the output");

  // infer
  auto* inf_cmd =
      app.add_subcommand("infer", "selective p-values and intervals");
  bool want_ci = false, want_gof = false, minimal = false;
  double composite_delta = -1.0;
  add_data_options(inf_cmd, data_opt, true);
  add_method_options(inf_cmd, method_opt);
  inf_cmd->add_flag("--ci", want_ci, "confidence interval per coefficient");
  inf_cmd->add_flag("--gof", want_gof, "goodness-of-fit test (lasso only)");
  inf_cmd->add_option("--alpha", alpha, "level (default 0.1)");
  inf_cmd->add_flag("--minimal", minimal,
                    "condition on the active set only (union over signs)");
  inf_cmd->add_option("--composite", composite_delta,
                      "composite null half-width delta0 for the GOF "
                      "direction");
  inf_cmd->add_flag("--dump-event", dump_event,
                    "include the conditioning polytope in the output");

  // path-fwer
  auto* path_cmd =
      app.add_subcommand("path-fwer", "sequential GOF tests along a path");
  DataOptions path_data;
  std::string path_lambdas;
  double path_alpha = 0.1;
  bool path_dump = false;
  add_data_options(path_cmd, path_data, true);
  path_cmd->add_option("--lambdas", path_lambdas,
                       "comma-separated, strictly decreasing")
      ->required();
  path_cmd->add_option("--alpha", path_alpha, "level (default 0.1)");
  path_cmd->add_flag("--dump-event", path_dump,
                     "include the cumulative polytope in the output");

  // fdr
  auto* fdr_cmd = app.add_subcommand(
      "fdr", "full-model selective p-values with BY control");
  DataOptions fdr_data;
  double fdr_lambda = 0.0, fdr_alpha = 0.1;
  bool fdr_dump = false;
  add_data_options(fdr_cmd, fdr_data, true);
  fdr_cmd->add_option("--lambda", fdr_lambda, "l1 penalty level")->required();
  fdr_cmd->add_option("--alpha", fdr_alpha, "FDR level (default 0.1)");
  fdr_cmd->add_flag("--dump-event", fdr_dump, "include the selection polytope");

  // knockoff
  auto* ko_cmd =
      app.add_subcommand("knockoff", "knockoff filter with FDP stopping");
  DataOptions ko_data;
  std::string ko_lambdas;
  double ko_alpha = 0.1;
  bool ko_plus = false, ko_ci = false, ko_blackbox = false, ko_dump = false;
  add_data_options(ko_cmd, ko_data, true);
  ko_cmd->add_option("--lambdas", ko_lambdas,
                     "comma-separated, strictly decreasing")
      ->required();
  ko_cmd->add_option("--alpha", ko_alpha, "FDP threshold (default 0.1)");
  ko_cmd->add_flag("--plus", ko_plus, "use the FDR-controlling variant");
  ko_cmd->add_flag("--ci", ko_ci, "selective CIs for the selected variables");
  ko_cmd->add_flag("--blackbox", ko_blackbox,
                   "CI via the grid search on the knockoff membership event");
  ko_cmd->add_flag("--dump-event", ko_dump, "include the path events");

  // simulate
  auto* sim_cmd = app.add_subcommand("simulate", "run a named scenario");
  std::string sim_name, sim_out;
  int sim_reps = 100;
  std::uint64_t sim_seed = 1;
  bool sim_list = false, sim_serial = false;
  sim_cmd->add_option("--scenario", sim_name, "scenario name");
  sim_cmd->add_option("--reps", sim_reps, "replications / draws");
  sim_cmd->add_option("--seed", sim_seed, "master seed");
  sim_cmd->add_option("--out", sim_out, "write long-format rows as CSV");
  sim_cmd->add_flag("--list", sim_list, "list scenarios and exit");
  sim_cmd->add_flag("--serial", sim_serial,
                    "force the serial reference path");
  bool sim_dump = false;
  sim_cmd->add_flag("--dump-event", sim_dump,
                    "include the scenario configuration in the output");

  // blackbox-p
  auto* bb_cmd = app.add_subcommand(
      "blackbox-p", "approximate selective p-value by grid search");
  DataOptions bb_data;
  MethodOptions bb_method;
  int bb_grid = 2000;
  double bb_null = 0.0;
  int bb_coef = -1;
  add_data_options(bb_cmd, bb_data, true);
  add_method_options(bb_cmd, bb_method);
  bb_cmd->add_option("--grid-points", bb_grid, "grid size (default 2000)");
  bb_cmd->add_option("--null", bb_null, "null value of eta'mu");
  bb_cmd->add_option("--coef", bb_coef,
                     "1-based selected-coefficient position (default first)");
  bool bb_dump = false;
  bb_cmd->add_flag("--dump-event", bb_dump,
                   "include the analytic selection polytope for reference");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << Json{{"error", e.what()}, {"type", "usage"}}.dump() << "\n";
    return 2;
  }

  if (sel_cmd->parsed()) {
    RegressionData d = load_data(sel_data);
    const Selection s = run_selection(d, sel_method, false);
    std::vector<ActiveEntry> entries;
    for (std::size_t i = 0; i < s.active.size(); ++i) {
      ActiveEntry e;
      e.index = s.active[i] + 1;
      e.name = name_of(d, s.active[i]);
      e.coef = s.coefs(i);
      entries.push_back(e);
    }
    Json out = result_json(sel_method.method, sel_method.lambda, entries);
    if (!s.signs.empty()) out["signs"] = s.signs;
    if (sel_dump) out["event"] = event_to_json(s.event);
    std::cout << out.dump() << "\n";
    return 0;
  }

  if (inf_cmd->parsed()) {
    RegressionData d = load_data(data_opt);
    const Selection s = run_selection(d, method_opt, minimal);
    const NoiseModel noise = resolve_noise(d, data_opt, s);

    std::vector<ActiveEntry> entries;
    double vminus = -kInf, vplus = kInf;
    int n_constraints = 0;
    for (std::size_t i = 0; i < s.active.size(); ++i) {
      const int j = s.active[i];
      const Contrast eta = coef_contrast(d.X, s.active, j, noise, d.names);
      const PivotResult pr =
          selective_pvalue(s.event, eta, noise, d.y, 0.0, Side::two_sided);
      ActiveEntry e;
      e.index = j + 1;
      e.name = name_of(d, j);
      e.coef = s.coefs(i);
      e.p_value = pr.p_value;
      if (want_ci) {
        const SelectiveInterval ci =
            selective_ci(s.event, eta, noise, d.y, alpha);
        e.ci_lower = ci.lower;
        e.ci_upper = ci.upper;
        e.has_ci = true;
      }
      if (i == 0) {
        const TruncationResult tr =
            truncation_interval(s.event, eta, noise, d.y);
        vminus = tr.v_minus;
        vplus = tr.v_plus;
        n_constraints = s.event.is_single() ? s.event.poly().rows()
                                            : s.event_poly.rows();
      }
      entries.push_back(e);
    }

    Json gof;
    if ((want_gof || composite_delta >= 0.0) &&
        (method_opt.method == "lasso")) {
      if (static_cast<int>(s.active.size()) >= d.p())
        throw InvalidInput("gof: no inactive variables left to test");
      auto [poly, sm, eta_raw] =
          gof_event(d.X, s.active, s.signs, method_opt.lambda, d.y);
      const Contrast eta = Contrast::make(eta_raw, noise, "gof max");
      const auto ev = SelectionEvent::single(std::move(poly));
      const double delta0 = composite_delta >= 0.0 ? composite_delta : 0.0;
      const PivotResult pr = composite_test(ev, eta, noise, d.y, delta0);
      gof["j_star"] = sm.column + 1;
      gof["name"] = name_of(d, sm.column);
      gof["p_value"] = pr.p_value;
      gof["pivot"] = pr.pivot;
      gof["delta0"] = delta0;
      gof["reject"] = pr.pivot > 1.0 - alpha;
    } else if (want_gof) {
      throw InvalidInput("--gof requires --method lasso");
    }

    Json out = result_json(method_opt.method, method_opt.lambda, entries, gof,
                           conditioning_json(n_constraints, vminus, vplus));
    out["alpha"] = alpha;
    if (dump_event) out["event"] = event_to_json(s.event);
    std::cout << out.dump() << "\n";
    return 0;
  }

  if (path_cmd->parsed()) {
    RegressionData d = load_data(path_data);
    if (!d.noise)
      throw InvalidInput("path-fwer requires --sigma");
    const PathState st =
        path_fwer(d, parse_lambdas(path_lambdas), path_alpha);
    Json out;
    out["method"] = "path-fwer";
    out["alpha"] = path_alpha;
    out["stop_index"] = st.stop_index + 1;  // 1-based; m+1 = never stopped
    Json steps = Json::array();
    for (std::size_t i = 0; i < st.lambdas.size(); ++i) {
      Json s;
      s["lambda"] = st.lambdas[i];
      Json active = Json::array();
      for (int j : st.fits[i].active) active.push_back(j + 1);
      s["active"] = active;
      if (st.gof_pvalues[i]) {
        s["p_value"] = st.gof_pvalues[i]->p_value;
        s["reject"] = st.gof_pvalues[i]->pivot > 1.0 - path_alpha;
      } else {
        s["skipped"] = st.skip_reasons[i];
      }
      steps.push_back(s);
    }
    out["steps"] = steps;
    if (path_dump) out["event"] = polytope_to_json(st.cumulative);
    std::cout << out.dump() << "\n";
    return 0;
  }

  if (fdr_cmd->parsed()) {
    RegressionData d = load_data(fdr_data);
    if (!d.noise) throw InvalidInput("fdr requires --sigma");
    const FdrResult r = full_model_fdr(d, fdr_lambda, fdr_alpha);
    Vector coefs(static_cast<Eigen::Index>(r.active.size()));
    if (!r.active.empty()) {
      Matrix XM(d.n(), static_cast<Eigen::Index>(r.active.size()));
      for (std::size_t i = 0; i < r.active.size(); ++i)
        XM.col(i) = d.X.col(r.active[i]);
      coefs = XM.colPivHouseholderQr().solve(d.y);
    }
    std::vector<ActiveEntry> entries;
    for (std::size_t i = 0; i < r.active.size(); ++i) {
      ActiveEntry e;
      e.index = r.active[i] + 1;
      e.name = name_of(d, r.active[i]);
      e.coef = coefs(i);
      e.p_value = r.p_values(i);
      entries.push_back(e);
    }
    Json out = result_json("fdr-by", fdr_lambda, entries);
    Json rej = Json::array();
    for (int j : r.rejected) rej.push_back(j + 1);
    out["rejected"] = rej;
    out["alpha"] = fdr_alpha;
    if (fdr_dump && !r.active.empty()) {
      const LassoFit fit = fit_lasso(d, fdr_lambda);
      out["event"] =
          polytope_to_json(lasso_event(d.X, fit.active, fit.signs, fdr_lambda));
    }
    std::cout << out.dump() << "\n";
    return 0;
  }

  if (ko_cmd->parsed()) {
    RegressionData d = load_data(ko_data);
    const auto lambdas = parse_lambdas(ko_lambdas);
    const KnockoffState st = knockoff_select(d, lambdas, ko_alpha, ko_plus);
    Json out;
    out["method"] = "knockoff";
    out["alpha"] = ko_alpha;
    out["plus"] = ko_plus;
    out["T"] = ko_plus ? st.T_plus : st.T;
    Json selected = Json::array();
    for (int j : st.selected) selected.push_back(j + 1);
    out["selected"] = selected;
    out["fdp_curve"] = st.fdp_curve;
    out["fdp_plus_curve"] = st.fdp_plus_curve;
    out["W"] = st.W;
    if (ko_ci && !st.selected.empty()) {
      if (!d.noise) throw InvalidInput("knockoff --ci requires --sigma");
      const auto cis =
          knockoff_ci(d, lambdas, st, ko_alpha, ko_blackbox);
      Json arr = Json::array();
      for (std::size_t i = 0; i < cis.size(); ++i) {
        Json c;
        c["index"] = st.selected[i] + 1;
        c["name"] = name_of(d, st.selected[i]);
        c["ci"] = Json::array(
            {json_number(cis[i].lower), json_number(cis[i].upper)});
        if (!cis[i].warning.empty()) c["warning"] = cis[i].warning;
        arr.push_back(c);
      }
      out["ci"] = arr;
    }
    if (ko_dump) {
      Matrix aug(d.n(), 2 * d.p());
      aug << d.X, st.X_tilde;
      Json events = Json::array();
      for (std::size_t l = 0; l < st.lasso_active.size(); ++l) {
        if (st.lasso_active[l].empty()) continue;
        events.push_back(polytope_to_json(lasso_event(
            aug, st.lasso_active[l], st.lasso_signs[l], lambdas[l])));
      }
      out["event"] = events;
    }
    std::cout << out.dump() << "\n";
    return 0;
  }

  if (sim_cmd->parsed()) {
    if (sim_list) {
      Json out = Json::array();
      for (const auto& sc : scenario_registry()) {
        Json s;
        s["name"] = sc.name;
        s["kind"] = sc.kind;
        s["n"] = sc.n;
        s["p"] = sc.p;
        s["rho"] = sc.rho;
        s["signals"] = sc.n_signals;
        s["amplitude"] = sc.amplitude;
        s["sigma2"] = sc.sigma2;
        s["alpha"] = sc.alpha;
        if (!sc.note.empty()) s["note"] = sc.note;
        out.push_back(s);
      }
      std::cout << out.dump() << "\n";
      return 0;
    }
    if (sim_name.empty()) throw InvalidInput("--scenario is required");
    const SimResult r =
        run_scenario(find_scenario(sim_name), sim_reps, sim_seed, sim_serial);
    if (!sim_out.empty()) write_csv(r, sim_out);
    Json out;
    out["scenario"] = sim_name;
    out["reps"] = sim_reps;
    out["seed"] = sim_seed;
    for (const auto& [k, v] : r.summary) out["summary"][k] = json_number(v);
    if (!sim_out.empty()) out["csv"] = sim_out;
    if (sim_dump) {
      const Scenario& sc = find_scenario(sim_name);
      out["scenario_config"] = {{"n", sc.n},
                                {"p", sc.p},
                                {"rho", sc.rho},
                                {"signals", sc.n_signals},
                                {"amplitude", sc.amplitude},
                                {"sigma2", sc.sigma2},
                                {"alpha", sc.alpha}};
    }
    std::cout << out.dump() << "\n";
    return 0;
  }

  if (bb_cmd->parsed()) {
    RegressionData d = load_data(bb_data);
    const Selection s = run_selection(d, bb_method, false);
    const NoiseModel noise = resolve_noise(d, bb_data, s);
    const int pos = bb_coef > 0 ? bb_coef - 1 : 0;
    if (pos < 0 || pos >= static_cast<int>(s.active.size()))
      throw InvalidInput("--coef out of range of the selected set");
    const Contrast eta =
        coef_contrast(d.X, s.active, s.active[pos], noise, d.names);

    const MethodOptions m = bb_method;
    const Matrix X = d.X;
    auto same = [&, m, X](const Vector& yy) {
      const RegressionData dd = RegressionData::make(X, yy);
      try {
        const Selection s2 = run_selection(dd, m, false);
        return s2.active == s.active && s2.signs == s.signs;
      } catch (const Error&) {
        return false;
      }
    };
    GridSpec grid;
    grid.points = bb_grid;
    const PivotResult pr =
        approx_pvalue(same, d.y, eta, noise, bb_null, grid, Side::two_sided);
    Json out;
    out["method"] = "blackbox-p";
    out["selector"] = m.method;
    out["grid_points"] = bb_grid;
    out["null"] = bb_null;
    out["pivot"] = pr.pivot;
    out["p_value"] = pr.p_value;
    out["coef_index"] = s.active[pos] + 1;
    if (bb_dump) out["event"] = event_to_json(s.event);
    std::cout << out.dump() << "\n";
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return protected_main(argc, argv);
  } catch (const InvalidInput& e) {
    std::cerr << Json{{"error", e.what()}, {"type", "invalid_input"}}.dump()
              << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << Json{{"error", e.what()}, {"type", "numerical"}}.dump()
              << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << Json{{"error", e.what()}, {"type", "internal"}}.dump()
              << "\n";
    return 1;
  }
}
