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
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <type_traits>
#include <vector>

#include "nct/csv.hpp"

namespace nct {

/// Invalid configuration: unknown key, unparsable value, or a value out of
/// range. Maps to exit code 2 in the CLI.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Everything a scenario run depends on. Defaults reproduce the pebble-bed
/// example: <s^2> = 6.2898, atomic-mix Sigma_t = 0.5934, c = 0.99.
struct ScenarioConfig {
    std::string scenario = "compare";
    std::string law = "diffusion_matched";  // diffusion_matched | classical | tabulated
    double ms2 = 6.2898;
    double sigmabar = 0.5934;
    std::string table;          // path of a tabulated law
    double c = 0.99;
    double strength = 1.0;
    double mfp_true = 0.0;      // true <s> for phi0; 0 means 1 / sigmabar

    std::uint64_t histories = 1000000;
    std::uint64_t seed = 20150501;
    std::uint64_t shells = 60;
    double shell_rmax = 0.0;    // 0 means 12 / kappa
    std::string capture = "analog";  // analog | implicit
    bool track_length = false;

    double grid_ratio = 1.05;
    double grid_spacing = 0.0;  // 0 means <s> / 16
    double grid_rmax = 0.0;     // 0 means 15 / kappa
    double tol = 1e-8;
    std::uint64_t max_iters = 0;  // 0 means ceil(ln tol / ln c) + 50

    double curves_smax = 10.0;
    std::uint64_t curves_points = 500;

    double compare_rmin = 0.5;
    double compare_rmax = 10.0;
    double compare_tol = 0.01;
    double mc_rmin = 1.0;
    double mc_rmax = 8.0;
    double mc_max_rel_err = 0.02;
    double mc_sigma = 3.0;

    std::string out = "out";

    bool operator==(const ScenarioConfig&) const = default;
};

namespace detail {

inline double parse_double(std::string_view key, std::string_view text) {
    double v = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size())
        throw ConfigError("config: '" + std::string(key) + "' expects a number, got '" +
                          std::string(text) + "'");
    return v;
}

inline std::uint64_t parse_count(std::string_view key, std::string_view text) {
    std::uint64_t v = 0;
    // accept 1e6-style counts as long as they are exact integers
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec == std::errc{} && res.ptr == text.data() + text.size()) return v;
    const double d = parse_double(key, text);
    if (!(d >= 0.0) || d != static_cast<double>(static_cast<std::uint64_t>(d)))
        throw ConfigError("config: '" + std::string(key) + "' expects a non-negative integer");
    return static_cast<std::uint64_t>(d);
}

inline bool parse_bool(std::string_view key, std::string_view text) {
    if (text == "true" || text == "1" || text == "yes") return true;
    if (text == "false" || text == "0" || text == "no") return false;
    throw ConfigError("config: '" + std::string(key) + "' expects true or false");
}

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

struct Field {
    std::string key;
    std::function<void(ScenarioConfig&, std::string_view)> set;
    std::function<std::string(const ScenarioConfig&)> get;
};

template <class T>
Field make_field(std::string key, T ScenarioConfig::*member) {
    Field f;
    f.key = key;
    f.set = [key, member](ScenarioConfig& c, std::string_view v) {
        if constexpr (std::is_same_v<T, double>)
            c.*member = parse_double(key, v);
        else if constexpr (std::is_same_v<T, std::uint64_t>)
            c.*member = parse_count(key, v);
        else if constexpr (std::is_same_v<T, bool>)
            c.*member = parse_bool(key, v);
        else
            c.*member = std::string(v);
    };
    f.get = [member](const ScenarioConfig& c) -> std::string {
        if constexpr (std::is_same_v<T, double>)
            return format_double(c.*member);
        else if constexpr (std::is_same_v<T, std::uint64_t>)
            return std::to_string(c.*member);
        else if constexpr (std::is_same_v<T, bool>)
            return c.*member ? "true" : "false";
        else
            return c.*member;
    };
    return f;
}

inline const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        make_field("scenario", &ScenarioConfig::scenario),
        make_field("law", &ScenarioConfig::law),
        make_field("ms2", &ScenarioConfig::ms2),
        make_field("sigmabar", &ScenarioConfig::sigmabar),
        make_field("table", &ScenarioConfig::table),
        make_field("c", &ScenarioConfig::c),
        make_field("strength", &ScenarioConfig::strength),
        make_field("mfp_true", &ScenarioConfig::mfp_true),
        make_field("histories", &ScenarioConfig::histories),
        make_field("seed", &ScenarioConfig::seed),
        make_field("shells", &ScenarioConfig::shells),
        make_field("shell_rmax", &ScenarioConfig::shell_rmax),
        make_field("capture", &ScenarioConfig::capture),
        make_field("track_length", &ScenarioConfig::track_length),
        make_field("grid_ratio", &ScenarioConfig::grid_ratio),
        make_field("grid_spacing", &ScenarioConfig::grid_spacing),
        make_field("grid_rmax", &ScenarioConfig::grid_rmax),
        make_field("tol", &ScenarioConfig::tol),
        make_field("max_iters", &ScenarioConfig::max_iters),
        make_field("curves_smax", &ScenarioConfig::curves_smax),
        make_field("curves_points", &ScenarioConfig::curves_points),
        make_field("compare_rmin", &ScenarioConfig::compare_rmin),
        make_field("compare_rmax", &ScenarioConfig::compare_rmax),
        make_field("compare_tol", &ScenarioConfig::compare_tol),
        make_field("mc_rmin", &ScenarioConfig::mc_rmin),
        make_field("mc_rmax", &ScenarioConfig::mc_rmax),
        make_field("mc_max_rel_err", &ScenarioConfig::mc_max_rel_err),
        make_field("mc_sigma", &ScenarioConfig::mc_sigma),
        make_field("out", &ScenarioConfig::out),
    };
    return table;
}

}  // namespace detail

/// Sets one key; unknown keys are rejected.
inline void set_config_value(ScenarioConfig& config, std::string_view key, std::string_view value) {
    for (const auto& f : detail::fields()) {
        if (f.key == key) {
            f.set(config, value);
            return;
        }
    }
    throw ConfigError("config: unknown key '" + std::string(key) + "'");
}

/// Applies flat `key = value` lines on top of `config`. '#' starts a comment.
inline void apply_config_text(ScenarioConfig& config, std::istream& in) {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const std::string body = detail::trim(line);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = detail::trim(std::string_view(body).substr(0, eq));
        const std::string value = detail::trim(std::string_view(body).substr(eq + 1));
        if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        set_config_value(config, key, value);
    }
}

inline ScenarioConfig parse_config(std::istream& in) {
    ScenarioConfig config;
    apply_config_text(config, in);
    return config;
}

inline ScenarioConfig parse_config(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
}

/// One `key = value` line per field, in a fixed order.
inline std::string serialize_config(const ScenarioConfig& config) {
    std::string out;
    for (const auto& f : detail::fields()) out += f.key + " = " + f.get(config) + "\n";
    return out;
}

/// Single-line form for CSV header comments. The output directory is left
/// out: it does not influence any computed value.
inline std::string config_comment(const ScenarioConfig& config) {
    std::string out = "config:";
    for (const auto& f : detail::fields()) {
        if (f.key == "out") continue;
        out += " " + f.key + "=" + f.get(config);
    }
    return out;
}

/// Range checks run before any computation starts.
inline void validate_config(const ScenarioConfig& c) {
    auto fail = [](const std::string& msg) { throw ConfigError("config: " + msg); };
    static const std::vector<std::string> scenarios = {"curves", "moments", "mc", "integral", "compare"};
    if (std::find(scenarios.begin(), scenarios.end(), c.scenario) == scenarios.end())
        fail("unknown scenario '" + c.scenario + "'");
    if (c.law != "diffusion_matched" && c.law != "classical" && c.law != "tabulated")
        fail("law must be diffusion_matched, classical or tabulated");
    if (c.law == "tabulated" && c.table.empty()) fail("law = tabulated needs 'table'");
    if (!(c.ms2 > 0.0) || !std::isfinite(c.ms2)) fail("ms2 must be positive");
    if (!(c.sigmabar > 0.0) || !std::isfinite(c.sigmabar)) fail("sigmabar must be positive");
    if (!(c.c >= 0.0 && c.c < 1.0)) fail("c must lie in [0, 1)");
    if (!(c.strength > 0.0)) fail("strength must be positive");
    if (c.mfp_true < 0.0) fail("mfp_true must be >= 0");
    if (c.histories < 1) fail("histories must be >= 1");
    if (c.shells < 1) fail("shells must be >= 1");
    if (c.shell_rmax < 0.0) fail("shell_rmax must be >= 0");
    if (c.capture != "analog" && c.capture != "implicit") fail("capture must be analog or implicit");
    if (!(c.grid_ratio > 1.0)) fail("grid_ratio must exceed 1");
    if (c.grid_spacing < 0.0 || c.grid_rmax < 0.0) fail("grid sizes must be >= 0");
    if (!(c.tol > 0.0)) fail("tol must be positive");
    if (!(c.curves_smax > 0.0) || c.curves_points < 2) fail("curves need smax > 0 and >= 2 points");
    if (!(c.compare_rmax > c.compare_rmin && c.compare_rmin > 0.0)) fail("bad compare radius range");
    if (!(c.mc_rmax > c.mc_rmin && c.mc_rmin >= 0.0)) fail("bad mc radius range");
    if (!(c.compare_tol > 0.0) || !(c.mc_sigma > 0.0) || !(c.mc_max_rel_err > 0.0))
        fail("tolerances must be positive");
    if (c.scenario == "compare" && c.law != "diffusion_matched")
        fail("compare needs law = diffusion_matched (the oracle is exact only for it)");
    if (c.out.empty()) fail("out must not be empty");
}

}  // namespace nct
