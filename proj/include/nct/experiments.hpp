/*
   Copyright 2026 The nctlab Authors

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

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "nct/config.hpp"
#include "nct/csv.hpp"
#include "nct/diffusion_oracle.hpp"
#include "nct/integral_solver.hpp"
#include "nct/mc_transport.hpp"
#include "nct/pathlen.hpp"

namespace nct {

/// Output file could not be written. Maps to exit code 3 in the CLI.
class OutputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ExecutionOptions {
    unsigned workers = 1;
    std::ostream* log = nullptr;  ///< human-readable progress and summary
};

struct ScenarioOutcome {
    bool passed = true;               ///< tolerances met (exit code 0 vs 1)
    std::vector<std::string> files;   ///< paths written
    std::string summary;
};

namespace detail {

inline std::filesystem::path prepare_out_dir(const ScenarioConfig& config) {
    std::filesystem::path dir(config.out);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir))
        throw OutputError("cannot create output directory " + dir.string());
    return dir;
}

/// Writes `body` to dir/name, reporting the path on failure.
inline std::string write_file(const std::filesystem::path& dir, const std::string& name,
                              const std::string& body) {
    const auto path = dir / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw OutputError("cannot open " + path.string() + " for writing");
    out << body;
    out.flush();
    if (!out) throw OutputError("write failed: " + path.string());
    return path.string();
}

inline void say(const ExecutionOptions& exec, const std::string& text) {
    if (exec.log) *exec.log << text << std::flush;
}

}  // namespace detail

/// Builds the path-length law named by the configuration.
inline PathLengthLaw law_from_config(const ScenarioConfig& config) {
    if (config.law == "diffusion_matched") return make_diffusion_matched(config.ms2);
    if (config.law == "classical") return make_classical(config.sigmabar);
    if (config.law == "tabulated") {
        std::ifstream in(config.table);
        if (!in) throw OutputError("cannot open tabulated law file: " + config.table);
        try {
            return parse_tabulated(in);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("table ") + config.table + ": " + e.what());
        }
    }
    throw ConfigError("unknown law '" + config.law + "'");
}

inline double true_mean_free_path(const ScenarioConfig& config) {
    return config.mfp_true > 0.0 ? config.mfp_true : 1.0 / config.sigmabar;
}

inline TransportProblem problem_from_config(const ScenarioConfig& config) {
    TransportProblem p{law_from_config(config), config.c, PointIsotropicSource{config.strength}};
    p.validate();
    return p;
}

inline std::vector<double> shell_edges_from_config(const ScenarioConfig& config,
                                                   const TransportProblem& problem) {
    const double r_max = config.shell_rmax > 0.0
                             ? config.shell_rmax
                             : 12.0 / diffusion_decay_constant(problem.law, problem.c);
    return uniform_shell_edges(config.shells, r_max);
}

inline RadialGrid grid_from_config(const ScenarioConfig& config, const TransportProblem& problem) {
    const double mean = problem.law.moments().first;
    const double r_max = config.grid_rmax > 0.0
                             ? config.grid_rmax
                             : 15.0 / diffusion_decay_constant(problem.law, problem.c);
    const double spacing = config.grid_spacing > 0.0 ? config.grid_spacing : mean / 16.0;
    return RadialGrid::graded(1e-3 * mean, r_max, config.grid_ratio, spacing);
}

inline RunOptions run_options_from_config(const ScenarioConfig& config, unsigned workers) {
    RunOptions opts;
    opts.workers = workers;
    opts.capture = config.capture == "implicit" ? CaptureMode::Implicit : CaptureMode::Analog;
    opts.track_length = config.track_length;
    return opts;
}

/// Sigma_t(s) and p(s) on [0, smax] for the three laws of the pebble-bed
/// figures: exponential with Sigma_t = sigmabar, diffusion-matched with
/// <s^2> = 2 / sigmabar^2, and diffusion-matched with the true <s^2>.
inline ScenarioOutcome run_curves(const ScenarioConfig& config, const ExecutionOptions& exec = {}) {
    validate_config(config);
    const auto dir = detail::prepare_out_dir(config);
    const PathLengthLaw transport = make_classical(config.sigmabar);
    const PathLengthLaw classical_diffusion =
        make_diffusion_matched(2.0 / (config.sigmabar * config.sigmabar));
    const PathLengthLaw nonclassical = make_diffusion_matched(config.ms2);

    std::ostringstream hazard, density;
    const std::string comment = "# " + config_comment(config) + "\n";
    const char* header = "s,classical_transport,classical_diffusion,nonclassical_diffusion\n";
    hazard << comment << header;
    density << comment << header;
    const std::size_t n = config.curves_points;
    for (std::size_t i = 0; i < n; ++i) {
        const double s = config.curves_smax * static_cast<double>(i) / static_cast<double>(n - 1);
        write_row(hazard, s, transport.sigma_t_of_s(s), classical_diffusion.sigma_t_of_s(s),
                  nonclassical.sigma_t_of_s(s));
        write_row(density, s, transport.pdf(s), classical_diffusion.pdf(s), nonclassical.pdf(s));
    }

    ScenarioOutcome outcome;
    outcome.files.push_back(detail::write_file(dir, "sigma_t_curves.csv", hazard.str()));
    outcome.files.push_back(detail::write_file(dir, "pdf_curves.csv", density.str()));
    std::ostringstream s;
    s << "curves: " << n << " points on [0, " << config.curves_smax << "]\n"
      << "  lambda (classical diffusion)    = " << format_double(classical_diffusion.get_if<DiffusionMatched>()->lambda()) << "\n"
      << "  lambda (nonclassical diffusion) = " << format_double(nonclassical.get_if<DiffusionMatched>()->lambda()) << "\n";
    outcome.summary = s.str();
    detail::say(exec, outcome.summary);
    return outcome;
}

/// Quadrature moments of the configured law against its closed forms.
inline ScenarioOutcome run_moments(const ScenarioConfig& config, const ExecutionOptions& exec = {}) {
    validate_config(config);
    const auto dir = detail::prepare_out_dir(config);
    const PathLengthLaw law = law_from_config(config);
    const QuadratureMoments quad = quadrature_moments(law);
    const Moments closed = law.moments();

    std::ostringstream csv, s;
    csv << "# " << config_comment(config) << "\n";
    csv << "quantity,quadrature,closed_form,abs_diff,error_estimate,converged\n";
    ScenarioOutcome outcome;
    auto row = [&](const char* name, const QuadratureResult& q, double exact) {
        const double diff = std::abs(q.value - exact);
        write_row(csv, std::string(name), q.value, exact, diff, q.error,
                  std::string(q.converged ? "true" : "false"));
        s << "  " << std::left << std::setw(14) << name << " quadrature " << format_double(q.value)
          << "  closed form " << format_double(exact) << "  |diff| " << format_double(diff)
          << (q.converged ? "" : "  (NOT CONVERGED)") << "\n";
        if (!q.converged) outcome.passed = false;
    };
    s << "moments of " << law.describe() << "\n";
    row("normalization", quad.zeroth, 1.0);
    row("first", quad.first, closed.first);
    row("second", quad.second, closed.second);
    if (const auto* tab = law.get_if<Tabulated>())
        s << "  input table integrated to " << format_double(tab->normalization())
          << " before renormalization\n";
    outcome.files.push_back(detail::write_file(dir, "moments.csv", csv.str()));
    outcome.summary = s.str();
    detail::say(exec, outcome.summary);
    return outcome;
}

namespace detail {

inline std::string mc_flux_csv(const ScenarioConfig& config, const RadialTally& tally,
                               double surrogate_mfp, double true_mfp) {
    std::ostringstream csv;
    csv << "# " << config_comment(config) << "\n";
    csv << "r_mid,r_lo,r_hi,phi0_surrogate,phi0_true,rel_std_err";
    if (tally.track_length_enabled()) csv << ",phi_track,track_rel_std_err";
    csv << "\n";
    const ShellField surrogate = scalar_flux_estimate(tally, surrogate_mfp);
    const ShellField truth = scalar_flux_estimate(tally, true_mfp);
    for (std::size_t k = 0; k < tally.shells(); ++k) {
        csv << format_double(tally.r_mid(k)) << ',' << format_double(tally.r_lo(k)) << ','
            << format_double(tally.r_hi(k)) << ',' << format_double(surrogate.values[k]) << ','
            << format_double(truth.values[k]) << ',' << format_double(surrogate.rel_err[k]);
        if (tally.track_length_enabled())
            csv << ',' << format_double(tally.track_estimate(k)) << ','
                << format_double(tally.track_rel_std_err(k));
        csv << '\n';
    }
    return csv.str();
}

inline std::string tally_csv(const ScenarioConfig& config, const RadialTally& tally) {
    std::ostringstream csv;
    write_tally_csv(csv, tally, config_comment(config));
    return csv.str();
}

}  // namespace detail

/// Monte Carlo collision-density tally plus both phi0 conversions.
inline ScenarioOutcome run_mc(const ScenarioConfig& config, const ExecutionOptions& exec = {}) {
    validate_config(config);
    const auto dir = detail::prepare_out_dir(config);
    const TransportProblem problem = problem_from_config(config);
    const auto edges = shell_edges_from_config(config, problem);
    const RadialTally tally = run_histories(problem, edges, config.histories, config.seed,
                                            run_options_from_config(config, exec.workers));

    ScenarioOutcome outcome;
    outcome.files.push_back(detail::write_file(dir, "mc_tally.csv", detail::tally_csv(config, tally)));
    outcome.files.push_back(detail::write_file(
        dir, "mc_flux.csv",
        detail::mc_flux_csv(config, tally, problem.law.moments().first, true_mean_free_path(config))));

    std::ostringstream s;
    s << "mc: " << tally.histories() << " histories of " << problem.law.describe()
      << ", c = " << format_double(problem.c) << "\n"
      << "  collisions per history " << format_double(tally.mean_collisions_per_history())
      << " +- " << format_double(tally.mean_collisions_std_err()) << " (expected "
      << format_double(1.0 / (1.0 - problem.c)) << ")\n"
      << "  overflow collisions " << tally.overflow_count() << " of " << tally.total_collisions()
      << "\n";
    outcome.summary = s.str();
    outcome.files.push_back(detail::write_file(dir, "mc_summary.txt", outcome.summary));
    detail::say(exec, outcome.summary);
    return outcome;
}

/// Deterministic solution of the integral equation on the configured grid.
inline ScenarioOutcome run_integral(const ScenarioConfig& config, const ExecutionOptions& exec = {}) {
    validate_config(config);
    const auto dir = detail::prepare_out_dir(config);
    const TransportProblem problem = problem_from_config(config);
    const RadialGrid grid = grid_from_config(config, problem);
    const int max_iters = config.max_iters > 0 ? static_cast<int>(config.max_iters) : -1;

    ScenarioOutcome outcome;
    std::ostringstream s;
    RadialField field(grid, std::vector<double>(grid.size(), 0.0));
    try {
        const SolveResult res = solve_collision_density(problem, grid, config.tol, max_iters);
        field = res.field;
        s << "integral: " << grid.size() << " nodes to r = " << format_double(grid.outer_radius())
          << ", " << res.iterations << " iterations, residual " << format_double(res.residual) << "\n";
    } catch (const ConvergenceError& e) {
        field = e.last_iterate;
        outcome.passed = false;
        s << "integral: " << e.what() << " (last iterate written)\n";
    }
    const double balance =
        (1.0 - problem.c) * (field.volume_integral() + field.tail_integral()) / problem.source.strength;
    s << "  balance (1-c) int f dV / Q = " << format_double(balance) << "\n";

    std::ostringstream csv;
    write_solution_csv(csv, field, problem.law.moments().first, true_mean_free_path(config),
                       config_comment(config));
    outcome.files.push_back(detail::write_file(dir, "integral.csv", csv.str()));
    outcome.summary = s.str();
    outcome.files.push_back(detail::write_file(dir, "integral_summary.txt", outcome.summary));
    detail::say(exec, outcome.summary);
    return outcome;
}

/// Runs Monte Carlo, the integral solver and the diffusion oracle on the
/// same problem and checks the configured tolerances.
inline ScenarioOutcome run_compare(const ScenarioConfig& config, const ExecutionOptions& exec = {}) {
    validate_config(config);
    const auto dir = detail::prepare_out_dir(config);
    const TransportProblem problem = problem_from_config(config);
    const DiffusionParams params(true_mean_free_path(config), config.ms2, config.c);
    const double q = problem.source.strength;

    // deterministic route
    const RadialGrid grid = grid_from_config(config, problem);
    const int max_iters = config.max_iters > 0 ? static_cast<int>(config.max_iters) : -1;
    ScenarioOutcome outcome;
    std::ostringstream s;
    RadialField field(grid, std::vector<double>(grid.size(), 0.0));
    try {
        field = solve_collision_density(problem, grid, config.tol, max_iters).field;
    } catch (const ConvergenceError& e) {
        field = e.last_iterate;
        outcome.passed = false;
        s << "  integral solver: " << e.what() << "\n";
    }

    std::ostringstream nodes_csv;
    nodes_csv << "# " << config_comment(config) << "\n";
    nodes_csv << "r,f_oracle,f_integral,rel_dev\n";
    double max_dev = 0.0, max_dev_r = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double r = grid[i];
        const double oracle = point_source_collision_density(params, q, r);
        const double dev = oracle > 0.0 ? std::abs(field[i] / oracle - 1.0) : 0.0;
        write_row(nodes_csv, r, oracle, field[i], dev);
        if (r >= config.compare_rmin && r <= config.compare_rmax && dev > max_dev) {
            max_dev = dev;
            max_dev_r = r;
        }
    }
    const double balance = (1.0 - problem.c) * (field.volume_integral() + field.tail_integral()) / q;

    // stochastic route
    const auto edges = shell_edges_from_config(config, problem);
    const RadialTally tally = run_histories(problem, edges, config.histories, config.seed,
                                            run_options_from_config(config, exec.workers));

    std::ostringstream shell_csv;
    shell_csv << "# " << config_comment(config) << "\n";
    shell_csv << "r_mid,r_lo,r_hi,f_oracle,f_integral,f_mc,mc_rel_std_err,mc_z,integral_rel_dev,checked\n";
    double max_z = 0.0;
    std::size_t checked = 0, failed = 0;
    for (std::size_t k = 0; k < tally.shells(); ++k) {
        const double a = tally.r_lo(k), b = tally.r_hi(k);
        const double oracle = shell_average_collision_density(params, q, a, b);
        const double integral = field.shell_average(a, b);
        const double mc = tally.estimate(k);
        const double rel = tally.rel_std_err(k);
        const double z = std::isfinite(rel) && mc > 0.0 ? (mc - oracle) / (rel * mc) : 0.0;
        // shells overlapping [mc_rmin, mc_rmax] with enough statistics
        const bool in_range = b > config.mc_rmin && a < config.mc_rmax;
        const bool check = in_range && std::isfinite(rel) && rel < config.mc_max_rel_err;
        if (check) {
            ++checked;
            max_z = std::max(max_z, std::abs(z));
            if (std::abs(z) > config.mc_sigma) ++failed;
        }
        write_row(shell_csv, tally.r_mid(k), a, b, oracle, integral, mc, rel, z,
                  oracle > 0.0 ? std::abs(integral / oracle - 1.0) : 0.0, check ? 1 : 0);
    }

    const bool integral_ok = max_dev < config.compare_tol;
    const bool mc_ok = failed == 0 && checked > 0;
    outcome.passed = outcome.passed && integral_ok && mc_ok;

    s << "compare: " << problem.law.describe() << ", c = " << format_double(problem.c) << "\n"
      << "  integral vs oracle: max rel dev " << format_double(max_dev) << " at r = "
      << format_double(max_dev_r) << " on [" << format_double(config.compare_rmin) << ", "
      << format_double(config.compare_rmax) << "], tolerance " << format_double(config.compare_tol)
      << (integral_ok ? "  ok" : "  FAIL") << "\n"
      << "  integral balance (1-c) int f dV / Q = " << format_double(balance) << "\n"
      << "  mc vs oracle: " << checked << " shells checked, max |z| " << format_double(max_z)
      << ", limit " << format_double(config.mc_sigma) << (mc_ok ? "  ok" : "  FAIL") << "\n"
      << "  mc collisions per history " << format_double(tally.mean_collisions_per_history())
      << " +- " << format_double(tally.mean_collisions_std_err()) << "\n";

    outcome.files.push_back(detail::write_file(dir, "compare.csv", shell_csv.str()));
    outcome.files.push_back(detail::write_file(dir, "compare_nodes.csv", nodes_csv.str()));
    outcome.files.push_back(detail::write_file(dir, "mc_tally.csv", detail::tally_csv(config, tally)));
    outcome.summary = s.str();
    outcome.files.push_back(detail::write_file(dir, "compare_summary.txt", outcome.summary));
    detail::say(exec, outcome.summary);
    return outcome;
}

inline ScenarioOutcome run_scenario(const ScenarioConfig& config, const ExecutionOptions& exec = {}) {
    validate_config(config);
    if (config.scenario == "curves") return run_curves(config, exec);
    if (config.scenario == "moments") return run_moments(config, exec);
    if (config.scenario == "mc") return run_mc(config, exec);
    if (config.scenario == "integral") return run_integral(config, exec);
    return run_compare(config, exec);
}

}  // namespace nct
