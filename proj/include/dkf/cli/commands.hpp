#pragma once

// Subcommands. Each writes its tables and a metadata.json into the output
// directory and returns the process exit code:
//   0 success, 1 parse or I/O error, 2 hypothesis or assumption violation.

#include <chrono>
#include <iostream>

#include "dkf/cli/output.hpp"

namespace dkf::cli {

enum ExitCode : int { exit_ok = 0, exit_parse = 1, exit_hypothesis = 2 };

struct CommandOptions {
  std::filesystem::path out_dir = "out";
  bool simulate = false;  // sweep: add Monte Carlo columns
};

namespace detail {

inline std::filesystem::path prepare(const CommandOptions& opt) {
  std::filesystem::create_directories(opt.out_dir);
  return opt.out_dir;
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline std::vector<double> gamma_grid(const Scenario& sc, double gamma_bar) {
  if (sc.gamma.relative && !std::isfinite(gamma_bar)) {
    throw HypothesisError("relative gamma grid needs a finite threshold");
  }
  return sc.gamma.resolve(gamma_bar);
}

inline double threshold_or_nan(const Scenario& sc) {
  try {
    return gamma_threshold(sc.nominal, sc.topology, sc.analysis.lambda_override);
  } catch (const std::exception&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

inline FilterRealization filter_at(const Scenario& sc, double gamma) {
  return build_filter(sc.nominal, sc.truth, sc.topology, gamma,
                      sc.analysis.filter_options());
}

inline std::vector<double> record_times(const TimeGrid& g) {
  std::vector<double> t{0.0};
  const long steps = g.steps();
  for (long k = 1; k <= steps; ++k)
    if (k % g.record_stride == 0 || k == steps) t.push_back(k * g.dt);
  return t;
}

/// Sigma_u(t) and the joint (Sigma_e, S; S^T, X)(t) by exact steps.
struct AnalyticTraces {
  std::vector<double> times;
  std::vector<Matrix> Sigma_u;
  std::vector<Matrix> joint;
  Matrix Sigma_e(std::size_t k, Eigen::Index dim) const {
    return joint[k].topLeftCorner(dim, dim);
  }
};

inline AnalyticTraces analytic_traces(const FilterRealization& fr,
                                      const InitialCovariances& init,
                                      const TimeGrid& grid) {
  AnalyticTraces out;
  out.times = record_times(grid);
  out.Sigma_u = nominal_flow_exact(fr, init.Sigma_u, grid);
  out.joint = propagate_augmented_exact(build_augmented(fr), joint_initial(init), grid);
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------

inline int cmd_validate(const Scenario& sc, std::ostream& os) {
  Matrix f_du;
  std::string care_failure;
  try {
    f_du = detail::filter_at(sc, 1.0).F_du;
  } catch (const std::exception& ex) {
    care_failure = ex.what();
  }
  if (!care_failure.empty()) {
    os << "riccati: FAIL (" << care_failure << ")\n";
    return exit_hypothesis;
  }
  const auto rep = validate_assumptions(sc.truth, sc.nominal, sc.topology, f_du);
  auto verdict = [](bool b) { return b ? "pass" : "FAIL"; };
  os << "assumption1 connected graph: " << verdict(rep.assumption1) << '\n'
     << "assumption2 observability: " << verdict(rep.observable) << '\n'
     << "assumption2 controllability: " << verdict(rep.controllable) << '\n'
     << "assumption3 (F_du = 0 or A Hurwitz): " << verdict(rep.assumption3)
     << (rep.F_du_zero ? " [F_du = 0]" : "") << (rep.A_hurwitz ? " [A Hurwitz]" : "")
     << '\n';
  for (const auto& f : rep.failures) os << "failure: " << f << '\n';
  os << "overall: " << verdict(rep.overall) << '\n';
  return rep.overall ? exit_ok : exit_hypothesis;
}

// ---------------------------------------------------------------------------

struct SweepRow {
  double gamma = 0.0;
  std::string status;  // ok | below_threshold | not_hurwitz | error
  double gamma_u0_bar = 0.0;
  double tr_sigma_u = NAN, tr_sigma_e = NAN, rho = NAN;
  double upper1 = NAN, upper2 = NAN, lower = NAN, lower_trace = NAN;
  double mse = NAN, mse_se = NAN;
  std::string note;
};

struct SweepResult {
  double gamma_bar = NAN;
  std::vector<SweepRow> rows;
  std::optional<AsymptoticFit> fit;
  std::string fit_error;
  std::vector<long> overflowed_trials;
};

inline SweepResult run_sweep(const Scenario& sc, bool simulate) {
  SweepResult res;
  res.gamma_bar = gamma_threshold(sc.nominal, sc.topology, sc.analysis.lambda_override);
  const auto gammas = detail::gamma_grid(sc, res.gamma_bar);
  const auto dev = deviations(sc.truth, sc.nominal);

  try {
    std::vector<double> grid;
    const auto& a = sc.analysis;
    for (int i = 0; i < a.fit_points; ++i) {
      const double u = a.fit_points == 1 ? 0.0 : i / double(a.fit_points - 1);
      grid.push_back(a.fit_from * res.gamma_bar * std::pow(a.fit_to / a.fit_from, u));
    }
    res.fit = asymptotic_fit(sc.nominal, sc.topology, grid);
  } catch (const std::exception& ex) {
    res.fit_error = ex.what();
  }

  std::vector<FilterRealization> sim_filters;
  std::vector<std::size_t> sim_rows;
  for (double g : gammas) {
    SweepRow row;
    row.gamma = g;
    try {
      const auto fr = detail::filter_at(sc, g);
      row.gamma_u0_bar = fr.gamma_u0_bar;
      if (!is_hurwitz(fr.A_script_u)) {
        row.status = "not_hurwitz";
        res.rows.push_back(row);
        continue;
      }
      const auto ss = steady_state(fr);
      row.tr_sigma_u = ss.Sigma_u_bar.trace();
      row.tr_sigma_e = ss.Sigma_e_bar.trace();
      if (g < fr.gamma_u0 * (1.0 - 1e-12)) {
        row.status = "below_threshold";
      } else {
        const auto b = trace_bounds(fr, ss, dev, sc.analysis.s_variant);
        row.status = "ok";
        row.rho = b.rho;
        row.upper1 = b.upper;
        row.lower = b.lower;
        row.lower_trace = b.tr_sigma_u_lower;
        if (res.fit) {
          const VecNormFactors f{std::sqrt(std::max(0.0, res.fit->plain_sq_at(g))),
                                 std::sqrt(std::max(0.0, res.fit->weighted_sq_at(g)))};
          row.upper2 = row.tr_sigma_u +
                       rho_from(f, {dev.norm_dR_d, dev.norm_dQ, fr.F_du.norm(),
                                    b.S_bar_norm_bound, double(fr.N)});
        }
      }
      if (simulate) {
        sim_filters.push_back(fr);
        sim_rows.push_back(res.rows.size());
      }
    } catch (const std::exception& ex) {
      row.status = "error";
      row.note = ex.what();
    }
    res.rows.push_back(row);
  }

  if (simulate && !sim_filters.empty()) {
    const auto mse = monte_carlo_mse(sc.truth, sim_filters, sc.sim);
    for (std::size_t i = 0; i < sim_rows.size(); ++i) {
      res.rows[sim_rows[i]].mse = mse[i].steady_mse;
      res.rows[sim_rows[i]].mse_se = mse[i].steady_se;
      for (long t : mse[i].overflowed_trials) res.overflowed_trials.push_back(t);
    }
  }
  return res;
}

inline int cmd_sweep(const Scenario& sc, const CommandOptions& opt, std::ostream& os) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto dir = detail::prepare(opt);
  SweepResult res;
  try {
    res = run_sweep(sc, opt.simulate);
  } catch (const HypothesisError& ex) {
    os << "sweep: " << ex.what() << '\n';
    return exit_hypothesis;
  }
  CsvWriter csv(dir / "sweep.csv",
                {"gamma", "gamma_u0_bar", "status", "tr_sigma_u", "tr_sigma_e", "rho",
                 "upper1", "upper2", "lower", "lower_trace", "mse", "mse_se"});
  for (const auto& r : res.rows) {
    csv.row({r.gamma, r.gamma_u0_bar, r.status, r.tr_sigma_u, r.tr_sigma_e, r.rho,
             r.upper1, r.upper2, r.lower, r.lower_trace, r.mse, r.mse_se});
  }

  auto meta = run_metadata(sc, "sweep");
  meta["gamma_bar"] = res.gamma_bar;
  meta["simulated"] = opt.simulate;
  if (res.fit) {
    const auto& f = *res.fit;
    meta["fit"] = {{"a1", f.a1}, {"b1", f.b1}, {"c1", f.c1}, {"one_minus_r2", f.fit_residual},
                   {"a2", f.a2}, {"b2", f.b2}, {"c2", f.c2}, {"one_minus_r2_weighted", f.fit_residual2}};
  } else {
    meta["fit_error"] = res.fit_error;
  }
  Json notes = Json::array();
  for (const auto& r : res.rows)
    if (!r.note.empty()) notes.push_back({{"gamma", r.gamma}, {"note", r.note}});
  meta["row_notes"] = notes;
  meta["overflowed_trials"] = res.overflowed_trials;
  meta["files"] = {"sweep.csv"};
  meta["seconds"] = detail::seconds_since(t0);
  write_json(dir / "metadata.json", meta);

  std::size_t ok = 0;
  for (const auto& r : res.rows) ok += r.status == "ok";
  os << "sweep: " << res.rows.size() << " rows (" << ok << " ok), gamma_bar = "
     << CsvWriter::num(res.gamma_bar) << ", wrote " << (dir / "sweep.csv").string() << '\n';
  return exit_ok;
}

// ---------------------------------------------------------------------------

inline int cmd_divergence(const Scenario& sc, const CommandOptions& opt, std::ostream& os) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto dir = detail::prepare(opt);
  const auto gammas = detail::gamma_grid(sc, detail::threshold_or_nan(sc));
  const auto init = default_initial(sc.truth, sc.sim.init);
  const auto dim = sc.truth.state_dim() * sc.truth.sensor_count();

  CsvWriter csv(dir / "divergence.csv",
                {"gamma", "certificate", "t", "proj_sigma_e", "proj_sigma_u"});
  Json reports = Json::array();
  for (double g : gammas) {
    const auto rep = divergence_test(sc.nominal, sc.truth, sc.topology, g);
    Json certs = Json::array();
    if (!rep.certificates.empty()) {
      const auto fr = detail::filter_at(sc, g);
      const auto tr = detail::analytic_traces(fr, init, sc.analysis.grid);
      for (std::size_t c = 0; c < rep.certificates.size(); ++c) {
        const auto& cert = rep.certificates[c];
        std::vector<double> re, im;
        for (Eigen::Index i = 0; i < cert.e.size(); ++i) {
          re.push_back(detail::canonical_number(cert.e(i).real()));
          im.push_back(detail::canonical_number(cert.e(i).imag()));
        }
        certs.push_back({{"r", cert.r}, {"e_real", re}, {"e_imag", im},
                         {"aug_eig_residual", cert.aug_eig_residual},
                         {"nominal_residual", cert.nominal_residual},
                         {"q_u_residual", cert.q_u_residual},
                         {"will_diverge", cert.will_diverge},
                         {"growth_rate", cert.growth_rate}});
        const ComplexVector v =
            kron(Matrix::Ones(sc.truth.sensor_count(), 1), Matrix::Identity(cert.e.size(), cert.e.size()))
                .cast<std::complex<double>>() * cert.e;
        for (std::size_t k = 0; k < tr.times.size(); ++k) {
          const double pe =
              (v.adjoint() * tr.Sigma_e(k, dim).cast<std::complex<double>>() * v)(0, 0).real();
          const double pu =
              (v.adjoint() * tr.Sigma_u[k].cast<std::complex<double>>() * v)(0, 0).real();
          csv.row({g, c, tr.times[k], pe, pu});
        }
      }
    }
    reports.push_back({{"gamma", g}, {"certificates", certs},
                       {"will_diverge", rep.any_divergent()}});
    os << "divergence: gamma = " << CsvWriter::num(g) << ", " << rep.certificates.size()
       << " certificate(s)" << (rep.any_divergent() ? ", error covariance diverges" : "")
       << '\n';
  }
  auto meta = run_metadata(sc, "divergence");
  meta["reports"] = reports;
  meta["files"] = {"divergence.csv"};
  meta["seconds"] = detail::seconds_since(t0);
  write_json(dir / "metadata.json", meta);
  return exit_ok;
}

// ---------------------------------------------------------------------------

inline int cmd_relations(const Scenario& sc, const CommandOptions& opt, std::ostream& os) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto dir = detail::prepare(opt);
  const auto dev = deviations(sc.truth, sc.nominal);
  if (!dev.dynamics_exact()) {
    os << "relations: requires the nominal A and C_i to equal the true ones\n";
    return exit_hypothesis;
  }
  std::vector<double> gammas;
  try {
    gammas = detail::gamma_grid(sc, detail::threshold_or_nan(sc));
  } catch (const HypothesisError& ex) {
    os << "relations: " << ex.what() << '\n';
    return exit_hypothesis;
  }
  const auto init = default_initial(sc.truth, sc.sim.init);
  const auto dim = sc.truth.state_dim() * sc.truth.sensor_count();

  CsvWriter csv(dir / "relations.csv", {"gamma", "t", "tr_sigma_u", "tr_sigma_e",
                                        "lambda_min_E", "norm_E", "norm_bound"});
  Json reports = Json::array();
  for (double g : gammas) {
    RelationReport rel;
    detail::AnalyticTraces tr;
    try {
      const auto fr = detail::filter_at(sc, g);
      rel = relation_analysis(fr, dev, init.Sigma_u - init.Sigma_e, sc.analysis.grid);
      tr = detail::analytic_traces(fr, init, sc.analysis.grid);
    } catch (const HypothesisError& ex) {
      os << "relations: gamma = " << CsvWriter::num(g) << ": " << ex.what() << '\n';
      return exit_hypothesis;
    } catch (const SingularEquationError& ex) {
      os << "relations: gamma = " << CsvWriter::num(g) << ": " << ex.what() << '\n';
      return exit_hypothesis;
    }
    for (std::size_t k = 0; k < rel.times.size(); ++k) {
      csv.row({g, rel.times[k], tr.Sigma_u[k].trace(), tr.Sigma_e(k, dim).trace(),
               rel.lambda_min[k], rel.norm_E[k], rel.norm_bound_curve[k]});
    }
    double worst = std::numeric_limits<double>::infinity();
    for (double l : rel.lambda_min) worst = std::min(worst, l);
    reports.push_back({{"gamma", g},
                       {"delta_D", to_string(rel.delta_D_definite)},
                       {"E0", to_string(rel.E0_definite)},
                       {"predicted", to_string(rel.predicted)},
                       {"ordering_holds", rel.ordering_verdict},
                       {"bound_holds", rel.bound_holds},
                       {"min_lambda_min_E", worst},
                       {"max_ode_closed_gap", rel.max_ode_closed_gap},
                       {"mu_bar", rel.mu_bar},
                       {"mu_L_gamma", rel.mu_L_gamma}});
    os << "relations: gamma = " << CsvWriter::num(g) << ", Delta D "
       << to_string(rel.delta_D_definite) << ", verdict " << to_string(rel.predicted)
       << (rel.ordering_verdict ? " (holds)" : " (VIOLATED)") << ", bound "
       << (rel.bound_holds ? "holds" : "VIOLATED") << '\n';
  }
  auto meta = run_metadata(sc, "relations");
  meta["reports"] = reports;
  meta["files"] = {"relations.csv"};
  meta["seconds"] = detail::seconds_since(t0);
  write_json(dir / "metadata.json", meta);
  return exit_ok;
}

// ---------------------------------------------------------------------------

inline int cmd_simulate(const Scenario& sc, const CommandOptions& opt, std::ostream& os) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto dir = detail::prepare(opt);
  std::vector<double> gammas;
  try {
    gammas = detail::gamma_grid(sc, detail::threshold_or_nan(sc));
  } catch (const HypothesisError& ex) {
    os << "simulate: " << ex.what() << '\n';
    return exit_hypothesis;
  }
  std::vector<FilterRealization> filters;
  for (double g : gammas) filters.push_back(detail::filter_at(sc, g));
  const auto series = monte_carlo_mse(sc.truth, filters, sc.sim);

  const auto init = default_initial(sc.truth, sc.sim.init);
  const TimeGrid grid{sc.sim.dt, sc.sim.horizon, sc.sim.record_stride};
  const auto dim = sc.truth.state_dim() * sc.truth.sensor_count();
  const double nn = static_cast<double>(sc.truth.sensor_count());

  CsvWriter csv(dir / "simulate.csv",
                {"gamma", "t", "mse", "tr_sigma_e_over_N", "trials_used"});
  Json runs = Json::array();
  for (std::size_t f = 0; f < filters.size(); ++f) {
    const auto joint =
        propagate_augmented_exact(build_augmented(filters[f]), joint_initial(init), grid);
    const auto& s = series[f];
    for (std::size_t k = 0; k < s.times.size(); ++k) {
      csv.row({gammas[f], s.times[k], s.mse[k],
               joint[k].topLeftCorner(dim, dim).trace() / nn, s.trials_used[k]});
    }
    double theory = NAN;
    try {
      theory = steady_state(filters[f]).Sigma_e_bar.trace() / nn;
    } catch (const std::exception&) {
    }
    runs.push_back({{"gamma", gammas[f]},
                    {"steady_mse", finite_or_null(s.steady_mse)},
                    {"steady_se", finite_or_null(s.steady_se)},
                    {"steady_theory", finite_or_null(theory)},
                    {"overflowed_trials", s.overflowed_trials}});
    os << "simulate: gamma = " << CsvWriter::num(gammas[f])
       << ", steady MSE = " << CsvWriter::num(s.steady_mse)
       << " (se " << CsvWriter::num(s.steady_se) << "), theory "
       << CsvWriter::num(theory) << '\n';
  }
  auto meta = run_metadata(sc, "simulate");
  meta["scheme"] = to_string(sc.sim.scheme);
  meta["dt"] = sc.sim.dt;
  meta["runs"] = runs;
  meta["files"] = {"simulate.csv"};
  meta["seconds"] = detail::seconds_since(t0);
  write_json(dir / "metadata.json", meta);
  return exit_ok;
}

}  // namespace dkf::cli
