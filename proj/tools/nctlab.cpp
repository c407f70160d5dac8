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

// nctlab: scenario runner for nonclassical transport experiments.
//
//   nctlab <scenario> [--config PATH] [--out DIR] [--seed N] [--histories N]
//                     [--ms2 X] [--sigmabar X] [--c X] [--law NAME]
//                     [--set key=value]... [--workers N] [--print-config]
//
// Exit codes: 0 success, 1 tolerance failure, 2 config error, 3 I/O error.

#include <CLI11.hpp>

#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "nct/config.hpp"
#include "nct/experiments.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kToleranceFailure = 1;
constexpr int kConfigError = 2;
constexpr int kIoError = 3;

struct Overrides {
    std::string config_path;
    std::optional<std::string> out, law;
    std::optional<std::uint64_t> seed, histories;
    std::optional<double> ms2, sigmabar, c;
    std::vector<std::string> sets;
};

nct::ScenarioConfig build_config(const std::string& scenario, const Overrides& o) {
    nct::ScenarioConfig config;
    if (!o.config_path.empty()) {
        std::ifstream in(o.config_path);
        if (!in) throw nct::ConfigError("cannot read config file " + o.config_path);
        nct::apply_config_text(config, in);
        // a relative table path in a config file is relative to that file
        const std::filesystem::path table(config.table);
        if (!config.table.empty() && table.is_relative())
            config.table = (std::filesystem::path(o.config_path).parent_path() / table).string();
    }
    // --set first, so the named flags below win over it
    for (const auto& kv : o.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw nct::ConfigError("--set expects key=value, got '" + kv + "'");
        nct::set_config_value(config, kv.substr(0, eq), kv.substr(eq + 1));
    }
    config.scenario = scenario;
    if (o.out) config.out = *o.out;
    if (o.law) config.law = *o.law;
    if (o.seed) config.seed = *o.seed;
    if (o.histories) config.histories = *o.histories;
    if (o.ms2) config.ms2 = *o.ms2;
    if (o.sigmabar) config.sigmabar = *o.sigmabar;
    if (o.c) config.c = *o.c;
    nct::validate_config(config);
    return config;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Nonclassical transport scenarios: curves, moments, mc, integral, compare"};
    app.set_version_flag("--version", "nctlab 1.0.0");

    std::string scenario;
    Overrides o;
    unsigned workers = std::max(1u, std::thread::hardware_concurrency());
    bool print_config = false;
    bool quiet = false;

    app.add_option("scenario", scenario, "curves | moments | mc | integral | compare")
        ->required()
        ->check(CLI::IsMember({"curves", "moments", "mc", "integral", "compare"}));
    app.add_option("--config", o.config_path, "flat key = value file");
    app.add_option("--out", o.out, "output directory");
    app.add_option("--seed", o.seed, "master seed");
    app.add_option("--histories", o.histories, "Monte Carlo histories");
    app.add_option("--ms2", o.ms2, "mean-square free path <s^2>");
    app.add_option("--sigmabar", o.sigmabar, "atomic-mix total cross section");
    app.add_option("--c", o.c, "scattering ratio");
    app.add_option("--law", o.law, "diffusion_matched | classical | tabulated");
    app.add_option("--set", o.sets, "any config key, as key=value (repeatable)");
    app.add_option("--workers", workers, "Monte Carlo threads (results do not depend on it)")
        ->check(CLI::PositiveNumber);
    app.add_flag("--print-config", print_config, "print the resolved config and exit");
    app.add_flag("-q,--quiet", quiet, "no summary on stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfigError;
    }

    nct::ScenarioConfig config;
    try {
        config = build_config(scenario, o);
    } catch (const nct::ConfigError& e) {
        std::cerr << "nctlab: " << e.what() << "\n";
        return kConfigError;
    }
    if (print_config) {
        std::cout << nct::serialize_config(config);
        return kOk;
    }

    nct::ExecutionOptions exec;
    exec.workers = workers;
    exec.log = quiet ? nullptr : &std::cout;
    try {
        const nct::ScenarioOutcome outcome = nct::run_scenario(config, exec);
        if (!quiet)
            for (const auto& f : outcome.files) std::cout << "wrote " << f << "\n";
        if (!outcome.passed) {
            std::cerr << "nctlab: " << config.scenario << ": tolerance check failed\n";
            return kToleranceFailure;
        }
        return kOk;
    } catch (const nct::ConfigError& e) {
        std::cerr << "nctlab: " << e.what() << "\n";
        return kConfigError;
    } catch (const nct::OutputError& e) {
        std::cerr << "nctlab: " << e.what() << "\n";
        return kIoError;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "nctlab: " << e.what() << "\n";
        return kIoError;
    } catch (const std::invalid_argument& e) {
        std::cerr << "nctlab: " << e.what() << "\n";
        return kConfigError;
    } catch (const std::domain_error& e) {
        std::cerr << "nctlab: " << e.what() << "\n";
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "nctlab: " << e.what() << "\n";
        return kToleranceFailure;
    }
}
