/*
   Copyright 2026 The levelcross Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

/**
 * @file dispatch.hpp
 * @brief Command-line front end: subcommands, report persistence and the
 * exit-code contract.
 *
 * Exit codes: 0 success, 1 a statistic outside its acceptance bounds,
 * 2 configuration or usage error, 3 numerical failure.
 */

#pragma once

#include "levelcross/app/config.hpp"
#include "levelcross/experiments.hpp"
#include "levelcross/regression.hpp"
#include "levelcross/rice.hpp"
#include "levelcross/simulate.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#ifndef LEVELCROSS_VERSION
#define LEVELCROSS_VERSION "0.0.0"
#endif

namespace levelcross::app {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

enum ExitCode : int { exit_ok = 0, exit_threshold = 1, exit_config = 2, exit_numerical = 3 };

/// Shortest decimal form that parses back to the same double.
inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

inline json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

struct ErrorInfo {
    int code = exit_numerical;
    std::string type;
    std::string message;
    json details = json::object();
};

/// Maps an in-flight exception to its exit code and a structured record.
inline ErrorInfo classify(std::exception_ptr ep) {
    ErrorInfo info;
    try {
        std::rethrow_exception(ep);
    } catch (const InvalidSchemeError& e) {
        info = {exit_config, "invalid_scheme", e.what()};
    } catch (const NoSolutionError& e) {
        info = {exit_config, "no_solution", e.what()};
    } catch (const ConfigurationError& e) {
        info = {exit_config, "configuration", e.what()};
    } catch (const InvalidModelError& e) {
        info = {exit_config, "invalid_model", e.what()};
    } catch (const DomainError& e) {
        info = {exit_config, "domain", e.what()};
    } catch (const NonEmbeddableError& e) {
        info = {exit_numerical, "non_embeddable", e.what()};
        info.details["min_eigenvalue"] = number(e.min_eigenvalue());
    } catch (const QuadratureError& e) {
        info = {exit_numerical, "quadrature", e.what()};
        info.details["partial_value"] = number(e.partial_value());
        info.details["achieved_tolerance"] = number(e.achieved_tolerance());
    } catch (const NearDegenerateError& e) {
        info = {exit_numerical, "near_degenerate", e.what()};
        info.details["det"] = number(e.det());
    } catch (const NumericalError& e) {
        info = {exit_numerical, "numerical", e.what()};
    } catch (const CLI::Error& e) {
        info = {exit_config, "usage", e.what()};
    } catch (const std::exception& e) {
        info = {exit_numerical, "internal", e.what()};
    }
    return info;
}

inline json error_json(const ErrorInfo& e) {
    return json{{"error", e.type}, {"message", e.message}, {"exit_code", e.code}, {"details", e.details}};
}

inline void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw ConfigurationError("cannot write " + p.string());
    out << text;
    if (!out) throw ConfigurationError("write failed for " + p.string());
}

inline std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ConfigurationError("cannot read config file " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigurationError("cannot create output directory " + dir.string() + ": " + ec.message());
}

inline std::string replicas_csv(const ExperimentReport& r) {
    std::string s = "replica_id,N,U";
    for (const auto& c : r.extra_columns) s += "," + c;
    s += "\n";
    for (const auto& rec : r.replicas) {
        s += std::to_string(rec.replica_id) + "," + std::to_string(rec.N) + "," + std::to_string(rec.U);
        for (double v : rec.extra) s += "," + format_number(v);
        s += "\n";
    }
    return s;
}

inline std::string plot_csv(const std::vector<PlotSeries>& plots) {
    std::string s = "series,x,y\n";
    for (const auto& p : plots)
        for (std::size_t i = 0; i < p.x.size(); ++i) s += p.name + "," + format_number(p.x[i]) + "," + format_number(p.y[i]) + "\n";
    return s;
}

inline json named_json(const NamedValues& v) {
    json j = json::object();
    for (const auto& [k, x] : v) j[k] = number(x);
    return j;
}

struct ThresholdOutcome {
    json record = json::object();
    bool passed = true;
};

inline ThresholdOutcome evaluate_thresholds(const ExperimentReport& r, const std::map<std::string, Bound>& bounds) {
    ThresholdOutcome out;
    for (const auto& [name, bd] : bounds) {
        bool found = false;
        double value = 0.0;
        for (const auto& [k, v] : r.statistics)
            if (k == name) {
                found = true;
                value = v;
            }
        if (!found) throw ConfigurationError("threshold names unknown statistic '" + name + "'");
        const bool ok = std::isfinite(value) && bd.contains(value);
        out.passed = out.passed && ok;
        json rec{{"value", number(value)}};
        rec["min"] = bd.min ? json(*bd.min) : json(nullptr);
        rec["max"] = bd.max ? json(*bd.max) : json(nullptr);
        rec["passed"] = ok;
        out.record[name] = rec;
    }
    return out;
}

inline bool wants(const RunConfig& c, const std::string& fmt) {
    return std::find(c.output.formats.begin(), c.output.formats.end(), fmt) != c.output.formats.end();
}

inline json manifest_json(const std::string& command, std::uint64_t seed, const std::string& resolved,
                          const std::vector<std::string>& files) {
    return json{{"program", "levelcross"},
                {"version", LEVELCROSS_VERSION},
                {"command", command},
                {"seed", seed},
                {"resolved_config", resolved},
                {"files", files}};
}

struct ExperimentOptions {
    bool emit_plot_data = false;
    std::string command = "experiment";
};

/// Runs the configured experiment and persists the report. Returns
/// exit_ok or exit_threshold; errors propagate as exceptions.
inline int run_experiment(const RunConfig& cfg, const std::string& raw_text, const ExperimentOptions& opt,
                          std::ostream& log) {
    const CovarianceModel model = cfg.model.build();
    const ExperimentConfig& x = cfg.experiment;
    const SimulationConfig& sim = cfg.simulation;
    ExperimentReport rep;
    json ladder_json;
    switch (x.kind) {
        case ExperimentKind::ratio:
            rep = run_ratio_experiment(model, x.T_list, x.u_list, cfg.quadrature, sim.seed, sim.replicas, sim.dt);
            break;
        case ExperimentKind::clt:
            rep = run_clt_experiment(model, x.T, x.gamma, sim.replicas, sim.dt, sim.seed, cfg.quadrature);
            if (x.ladder) {
                const LadderResult lr = clt_ladder(model, x.ladder_T_low, x.T, x.gamma, x.ladder_repetitions,
                                                   x.ladder_replicas, sim.dt, sim.seed);
                rep.statistics.push_back({"ladder_median_p_low", lr.median_low});
                rep.statistics.push_back({"ladder_median_p_high", lr.median_high});
                rep.statistics.push_back({"ladder_median_gain", lr.median_high - lr.median_low});
                ladder_json = json{{"T_low", x.ladder_T_low}, {"T_high", x.T}, {"p_low", lr.p_low},
                                   {"p_high", lr.p_high}};
            }
            break;
        case ExperimentKind::blocks:
            rep = run_block_experiment(model, x.T, x.gamma, x.b, x.c, x.mu, sim.replicas, sim.dt, sim.seed);
            break;
        case ExperimentKind::poisson:
            rep = run_poisson_experiment(model, x.ell, x.level, sim.replicas, sim.dt, sim.seed);
            break;
    }
    rep.config_echo = raw_text;
    const ThresholdOutcome th = evaluate_thresholds(rep, x.thresholds);
    const std::string resolved = serialize(cfg);

    const fs::path dir(cfg.output.directory);
    ensure_dir(dir);
    std::vector<std::string> files{"resolved_config.yaml", "manifest.json"};
    write_text(dir / "resolved_config.yaml", resolved);
    if (wants(cfg, "csv")) {
        write_text(dir / "replicas.csv", replicas_csv(rep));
        files.push_back("replicas.csv");
    }
    if (opt.emit_plot_data) {
        write_text(dir / "plot_data.csv", plot_csv(rep.plots));
        files.push_back("plot_data.csv");
    }

    json summary{{"kind", to_string(rep.kind)}, {"seed", rep.seed}, {"model", model.name()}};
    summary["statistics"] = named_json(rep.statistics);
    summary["thresholds"] = th.record;
    summary["passed"] = th.passed;
    if (!rep.audit.empty()) summary["audit"] = named_json(rep.audit);
    json table = json::object();
    for (const auto& c : rep.table) {
        json col = json::array();
        for (double v : c.values) col.push_back(number(v));
        table[c.name] = col;
    }
    summary["table"] = table;
    if (!ladder_json.is_null()) summary["ladder"] = ladder_json;
    summary["config"] = rep.config_echo;
    summary["resolved_config"] = resolved;
    if (wants(cfg, "json")) {
        write_text(dir / "summary.json", summary.dump(2) + "\n");
        files.push_back("summary.json");
    }
    write_text(dir / "manifest.json", manifest_json(opt.command, rep.seed, resolved, files).dump(2) + "\n");

    for (const auto& [k, v] : rep.statistics) log << "  " << k << " = " << format_number(v) << "\n";
    log << (th.passed ? "PASS" : "FAIL") << ": " << to_string(rep.kind) << " experiment, report in " << dir.string()
        << "\n";
    return th.passed ? exit_ok : exit_threshold;
}

namespace detail {

struct ModelArgs {
    std::string family = "gaussian";
    std::vector<double> params;
    std::optional<double> d;
    std::optional<double> e;

    void add(CLI::App* sub) {
        sub->add_option("--model", family, "covariance family (gaussian, damped_cosine, cosine)");
        sub->add_option("--param", params, "family parameter (repeatable)");
        sub->add_option("--d", d, "Taylor coefficient d override");
        sub->add_option("--e", e, "Taylor coefficient e override");
    }
    ModelConfig config() const { return ModelConfig{family, params, d, e}; }
};

struct QuadArgs {
    QuadratureConfig q;
    void add(CLI::App* sub) {
        sub->add_option("--nodes-2d", q.hermite_nodes_2d, "quadrature nodes per dimension, pair integrand");
        sub->add_option("--nodes-3d", q.hermite_nodes_3d, "quadrature nodes per dimension, triple integrand");
        sub->add_option("--tau-min", q.tau_min, "analytic small-lag cutoff");
        sub->add_option("--diag-cutoff", q.diag_cutoff, "determinant cutoff for the near-diagonal surrogate");
        sub->add_option("--rel-tol", q.rel_tol, "relative tolerance");
    }
};

inline json moment_json(const MomentReport& r) {
    json j{{"T", r.T}, {"u", r.u}, {"C_u", r.C_u}, {"lambda", r.lambda}, {"second_factorial", r.second_factorial},
           {"variance", r.variance}, {"ratio", r.ratio}};
    j["third_factorial"] = r.third_factorial ? number(*r.third_factorial) : json(nullptr);
    j["quad_error"] = json{{"lambda", r.quad_error.lambda},
                           {"second_factorial", r.quad_error.second_factorial},
                           {"variance", r.quad_error.variance},
                           {"ratio", r.quad_error.ratio},
                           {"third_factorial", r.quad_error.third_factorial}};
    return j;
}

inline std::string moment_csv(const MomentReport& r) {
    std::string s =
        "T,u,C_u,lambda,second_factorial,variance,ratio,third_factorial,err_second_factorial,err_variance,"
        "err_ratio,err_third_factorial\n";
    const std::vector<double> row{r.T,
                                  r.u,
                                  r.C_u,
                                  r.lambda,
                                  r.second_factorial,
                                  r.variance,
                                  r.ratio,
                                  r.third_factorial.value_or(std::nan("")),
                                  r.quad_error.second_factorial,
                                  r.quad_error.variance,
                                  r.quad_error.ratio,
                                  r.quad_error.third_factorial};
    for (std::size_t i = 0; i < row.size(); ++i) s += (i ? "," : "") + format_number(row[i]);
    return s + "\n";
}

inline std::vector<double> log_grid(double lo, double hi, int points) {
    if (!(lo > 0.0 && hi > lo) || points < 2) throw ConfigurationError("grid: needs 0 < lo < hi and points >= 2");
    std::vector<double> g(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) g[static_cast<std::size_t>(i)] = lo * std::pow(hi / lo, double(i) / (points - 1));
    return g;
}

}  // namespace detail

/// Entry point shared by the executable and the CLI tests.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"levelcross: crossing counts of stationary Gaussian processes"};
    app.require_subcommand(1);
    app.fallthrough();
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    bool emit_plot = false;
    app.add_option("--seed", seed, "random seed (overrides the config)");
    app.add_option("--out-dir", out_dir, "output directory (overrides the config)");
    app.add_flag("--emit-plot-data", emit_plot, "write (series, x, y) plot data");
    app.set_version_flag("--version", LEVELCROSS_VERSION);

    // check-cov
    auto* check = app.add_subcommand("check-cov", "Audit a covariance model against the standing hypotheses");
    detail::ModelArgs check_model;
    check_model.add(check);
    double check_delta = 0.5, check_tau_max = 50.0;
    check->add_option("--delta", check_delta, "upper limit of the Geman integral");
    check->add_option("--tau-max", check_tau_max, "integrability range");

    // regression-table
    auto* regt = app.add_subcommand("regression-table", "Regression quantities on a lag grid as CSV");
    detail::ModelArgs reg_model;
    reg_model.add(regt);
    std::string reg_mode = "pair";
    double reg_lo = 1e-3, reg_hi = 5.0, reg_u = 0.0, reg_aspect = 1.0;
    int reg_points = 50;
    regt->add_option("--mode", reg_mode, "pair or triple")->check(CLI::IsMember({"pair", "triple"}));
    regt->add_option("--lag-min", reg_lo, "smallest lag (h for triple)");
    regt->add_option("--lag-max", reg_hi, "largest lag");
    regt->add_option("--points", reg_points, "number of log-spaced lags");
    regt->add_option("--u", reg_u, "level");
    regt->add_option("--aspect", reg_aspect, "k / h for triple mode");

    // rice-moments
    auto* rice = app.add_subcommand("rice-moments", "Factorial moments of the crossing count by quadrature");
    detail::ModelArgs rice_model;
    rice_model.add(rice);
    detail::QuadArgs rice_quad;
    rice_quad.add(rice);
    double rice_T = 10.0, rice_u = 2.0;
    bool rice_third = false;
    std::string rice_format = "json";
    rice->add_option("--T", rice_T, "horizon")->required();
    rice->add_option("--u", rice_u, "level")->required();
    rice->add_flag("--third", rice_third, "also compute the third factorial moment");
    rice->add_option("--format", rice_format, "json or csv")->check(CLI::IsMember({"json", "csv"}));

    // simulate
    auto* simc = app.add_subcommand("simulate", "Monte Carlo crossing counts on exact grid paths");
    detail::ModelArgs sim_model;
    sim_model.add(simc);
    double sim_T = 10.0, sim_u = 2.0, sim_dt = 0.0;
    std::size_t sim_replicas = 1000;
    simc->add_option("--T", sim_T, "horizon")->required();
    simc->add_option("--u", sim_u, "level")->required();
    simc->add_option("--dt", sim_dt, "grid step (0 selects the default for u)");
    simc->add_option("--replicas", sim_replicas, "number of paths (>= 100)");

    // experiment
    auto* expc = app.add_subcommand("experiment", "Run a configured experiment");
    expc->require_subcommand(1);
    std::string exp_config;
    std::string exp_kind;
    for (const char* k : {"ratio", "clt", "blocks", "poisson"}) {
        auto* s = expc->add_subcommand(k, std::string(k) + " experiment");
        s->add_option("--config", exp_config, "YAML config file")->required();
        s->callback([&exp_kind, k] { exp_kind = k; });
    }

    std::string command;
    for (int i = 0; i < argc; ++i) command += (i ? " " : "") + std::string(argv[i]);

    std::optional<fs::path> error_dir;
    try {
        try {
            app.parse(argc, argv);
        } catch (const CLI::CallForHelp& e) {
            return app.exit(e, out, err);
        } catch (const CLI::CallForVersion& e) {
            return app.exit(e, out, err);
        } catch (const CLI::ParseError& e) {
            app.exit(e, out, err);
            return exit_config;
        }

        if (check->parsed()) {
            const CovarianceModel m = check_model.config().build();
            const ConditionReport rep = check_conditions(m, check_delta, check_tau_max);
            const TaylorCoefficients tc = taylor_coefficients(m);
            const bool taylor_ok = 24.0 * m.d() - 1.0 >= -1e-12;
            json j{{"model", m.name()},
                   {"d", m.d()},
                   {"e", m.e()},
                   {"taylor_check", json{{"d", tc.d}, {"e", tc.e}}},
                   {"normalization_ok", rep.normalization_ok},
                   {"geman_integral", number(rep.geman_integral)},
                   {"integrability_value", number(rep.integrability_value)},
                   {"berman_sup_tail", number(rep.berman_sup_tail)},
                   {"tail_converged", rep.tail_converged},
                   {"24d_minus_1_nonnegative", taylor_ok}};
            out << j.dump(2) << "\n";
            return rep.normalization_ok && rep.tail_converged && taylor_ok ? exit_ok : exit_threshold;
        }

        if (regt->parsed()) {
            const CovarianceModel m = reg_model.config().build();
            const auto grid = detail::log_grid(reg_lo, reg_hi, reg_points);
            std::ostringstream csv;
            if (reg_mode == "pair") {
                csv << "tau,r,r_dot,r_ddot,rho,psi_u,var_y\n";
                for (double t : grid) {
                    const CovarianceValues v = m.evaluate(t);
                    const PairQuantities q = pair_quantities(m, t, reg_u);
                    csv << format_number(t) << "," << format_number(v.r) << "," << format_number(v.r_dot) << ","
                        << format_number(v.r_ddot) << "," << format_number(q.rho) << "," << format_number(q.psi_u)
                        << "," << format_number(q.var_y) << "\n";
                }
            } else {
                csv << "h,k,det,alpha1,alpha2,alpha3,var_y1,var_y2,var_y3,exponent,pred_det,pred_alpha1,pred_alpha2,"
                       "pred_alpha3,pred_var_y1,pred_var_y2\n";
                for (double h : grid) {
                    const double k = reg_aspect * h;
                    const TripleQuantities q = triple_quantities(m, h, k, reg_u, 0.0);
                    const AsymptoticPrediction p = small_lag_asymptotics(m.d(), m.e(), h, k);
                    const std::vector<double> row{h,
                                                  k,
                                                  q.det,
                                                  q.alpha[0],
                                                  q.alpha[1],
                                                  q.alpha[2],
                                                  q.var_y[0],
                                                  q.var_y[1],
                                                  q.var_y[2],
                                                  q.exponent,
                                                  p.det,
                                                  p.alpha[0],
                                                  p.alpha[1],
                                                  p.alpha[2],
                                                  p.var_y[0],
                                                  p.var_y[1]};
                    for (std::size_t i = 0; i < row.size(); ++i) csv << (i ? "," : "") << format_number(row[i]);
                    csv << "\n";
                }
            }
            if (out_dir) {
                ensure_dir(*out_dir);
                write_text(fs::path(*out_dir) / "regression.csv", csv.str());
            } else {
                out << csv.str();
            }
            return exit_ok;
        }

        if (rice->parsed()) {
            const CovarianceModel m = rice_model.config().build();
            rice_quad.q.validate();
            const MomentReport r = moment_report(m, rice_T, rice_u, rice_quad.q, rice_third);
            if (rice_format == "json")
                out << detail::moment_json(r).dump(2) << "\n";
            else
                out << detail::moment_csv(r);
            return exit_ok;
        }

        if (simc->parsed()) {
            const fs::path dir(out_dir.value_or("out"));
            error_dir = dir;
            const CovarianceModel m = sim_model.config().build();
            const std::uint64_t s = seed.value_or(1);
            const double dt = sim_dt > 0.0 ? sim_dt : default_dt(sim_u);
            const McMoments mc = mc_moments(m, sim_T, sim_u, dt, sim_replicas, s);
            ensure_dir(dir);
            std::string csv = "replica_id,N,U\n";
            for (std::size_t i = 0; i < mc.counts.size(); ++i)
                csv += std::to_string(i) + "," + std::to_string(mc.counts[i].N) + "," +
                       std::to_string(mc.counts[i].U) + "\n";
            write_text(dir / "replicas.csv", csv);
            auto est = [](const Estimate& e) { return json{{"value", number(e.value)}, {"se", number(e.se)}}; };
            json summary{{"model", m.name()},
                         {"T", sim_T},
                         {"u", sim_u},
                         {"dt", dt},
                         {"replicas", sim_replicas},
                         {"seed", s},
                         {"mean", est(mc.mean)},
                         {"variance", est(mc.variance)},
                         {"second_factorial", est(mc.second_factorial)},
                         {"third_factorial", est(mc.third_factorial)},
                         {"ratio", est(mc.ratio)},
                         {"rice_mean", mean_crossings(m, sim_T, sim_u)},
                         {"max_abs_n_minus_2u", mc.max_abs_n_minus_2u}};
            write_text(dir / "summary.json", summary.dump(2) + "\n");
            write_text(dir / "manifest.json",
                       manifest_json(command, s, "", {"replicas.csv", "summary.json", "manifest.json"}).dump(2) + "\n");
            out << summary.dump(2) << "\n";
            return mc.max_abs_n_minus_2u <= 1 ? exit_ok : exit_numerical;
        }

        // experiment
        const std::string raw = read_text(exp_config);
        RunConfig cfg = parse_config(raw, app::detail::parse_kind(exp_kind));
        if (seed) cfg.simulation.seed = *seed;
        if (out_dir) cfg.output.directory = *out_dir;
        error_dir = fs::path(cfg.output.directory);
        return run_experiment(cfg, raw, ExperimentOptions{emit_plot, command}, err);
    } catch (...) {
        const ErrorInfo info = classify(std::current_exception());
        err << "error (" << info.type << "): " << info.message << "\n";
        if (error_dir) {
            try {
                ensure_dir(*error_dir);
                write_text(*error_dir / "error.json", error_json(info).dump(2) + "\n");
            } catch (...) {
            }
        }
        return info.code;
    }
}

}  // namespace levelcross::app
