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

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "nct/experiments.hpp"

namespace {

namespace fs = std::filesystem;

class ScratchDir {
public:
    explicit ScratchDir(const std::string& name)
        : path_(fs::temp_directory_path() / ("nct_test_" + name + "_" + std::to_string(::getpid()))) {
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~ScratchDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    fs::path operator/(const std::string& s) const { return path_ / s; }
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

/// Data rows of a CSV written by the scenarios: comment and header skipped.
std::vector<std::vector<double>> read_rows(const fs::path& p, std::string* header = nullptr) {
    std::ifstream in(p);
    std::string line;
    std::vector<std::vector<double>> rows;
    bool seen_header = false;
    while (std::getline(in, line)) {
        if (line.starts_with("#")) continue;
        if (!seen_header) {
            seen_header = true;
            if (header) *header = line;
            continue;
        }
        std::vector<double> row;
        std::istringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::strtod(cell.c_str(), nullptr));
        rows.push_back(row);
    }
    return rows;
}

nct::ScenarioConfig config_for(const std::string& scenario, const fs::path& out) {
    nct::ScenarioConfig c;
    c.scenario = scenario;
    c.out = out.string();
    return c;
}

TEST(Curves, ColumnsHaveTheExpectedShape) {
    ScratchDir dir("curves");
    const auto outcome = nct::run_curves(config_for("curves", dir.path()));
    EXPECT_TRUE(outcome.passed);
    std::string header;
    const auto hazard = read_rows(dir / "sigma_t_curves.csv", &header);
    EXPECT_EQ(header, "s,classical_transport,classical_diffusion,nonclassical_diffusion");
    ASSERT_EQ(hazard.size(), 500u);
    EXPECT_EQ(hazard.front()[0], 0.0);
    EXPECT_EQ(hazard.back()[0], 10.0);
    for (const auto& row : hazard) ASSERT_EQ(row[1], 0.5934);
    EXPECT_EQ(hazard.front()[2], 0.0);
    EXPECT_EQ(hazard.front()[3], 0.0);
    for (std::size_t i = 1; i < hazard.size(); ++i) {
        ASSERT_GT(hazard[i][2], hazard[i - 1][2]);
        ASSERT_LT(hazard[i][2], 1.02779894921137);
        ASSERT_LT(hazard[i][3], 0.976691047892568);
    }
    const auto density = read_rows(dir / "pdf_curves.csv");
    ASSERT_EQ(density.size(), 500u);
    EXPECT_EQ(density.front()[2], 0.0);
    EXPECT_EQ(density.front()[3], 0.0);
    EXPECT_EQ(density.front()[1], 0.5934);
    EXPECT_TRUE(slurp(dir / "pdf_curves.csv").starts_with("# config: scenario=curves"));
}

TEST(Moments, ReportMatchesClosedForms) {
    ScratchDir dir("moments");
    auto c = config_for("moments", dir.path());
    nct::run_moments(c);
    std::string header;
    const auto rows = read_rows(dir / "moments.csv", &header);
    EXPECT_EQ(header, "quantity,quadrature,closed_form,abs_diff,error_estimate,converged");
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows[2][2], 6.2898);
    for (const auto& r : rows) EXPECT_LT(r[3], 1e-8);

    c.law = "classical";
    c.sigmabar = 1.0;
    nct::run_moments(c);
    const auto classical = read_rows(dir / "moments.csv");
    EXPECT_NEAR(classical[2][1], 2.0, 1e-10);
}

TEST(Moments, TabulatedLawFromFile) {
    ScratchDir dir("moments_tab");
    {
        std::ofstream t(dir / "law.txt");
        t << "0 0\n1 3\n2 0\n";
    }
    auto c = config_for("moments", dir.path());
    c.law = "tabulated";
    c.table = (dir / "law.txt").string();
    const auto outcome = nct::run_moments(c);
    EXPECT_TRUE(outcome.passed);
    const auto rows = read_rows(dir / "moments.csv");
    EXPECT_NEAR(rows[0][1], 1.0, 1e-12);
    EXPECT_NEAR(rows[1][2], 1.0, 1e-12);
}

TEST(Mc, ByteIdenticalAcrossRunsAndWorkers) {
    ScratchDir a("mc_a"), b("mc_b");
    auto c = config_for("mc", a.path());
    c.histories = 20000;
    c.c = 0.9;
    c.track_length = true;
    nct::run_mc(c, {1, nullptr});
    c.out = b.path().string();
    nct::run_mc(c, {4, nullptr});
    for (const char* f : {"mc_tally.csv", "mc_flux.csv", "mc_summary.txt"})
        EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    std::string header;
    read_rows(a / "mc_tally.csv", &header);
    EXPECT_EQ(header, "r_mid,r_lo,r_hi,f_estimate,rel_std_err,count");
    read_rows(a / "mc_flux.csv", &header);
    EXPECT_EQ(header, "r_mid,r_lo,r_hi,phi0_surrogate,phi0_true,rel_std_err,phi_track,track_rel_std_err");
}

TEST(Mc, FluxColumnsUseBothMeanFreePaths) {
    ScratchDir dir("mc_flux");
    auto c = config_for("mc", dir.path());
    c.histories = 5000;
    c.c = 0.5;
    nct::run_mc(c);
    const auto tally = read_rows(dir / "mc_tally.csv");
    const auto flux = read_rows(dir / "mc_flux.csv");
    ASSERT_EQ(tally.size(), flux.size());
    const double surrogate = nct::make_diffusion_matched(6.2898).moments().first;
    for (std::size_t k = 0; k < tally.size(); ++k) {
        EXPECT_NEAR(flux[k][3], surrogate * tally[k][3], 1e-15 + 1e-14 * flux[k][3]);
        EXPECT_NEAR(flux[k][4], tally[k][3] / 0.5934, 1e-15 + 1e-14 * flux[k][4]);
    }
}

TEST(Integral, WritesSolutionAndIsReproducible) {
    ScratchDir a("int_a"), b("int_b");
    auto c = config_for("integral", a.path());
    c.c = 0.5;
    const auto outcome = nct::run_integral(c);
    EXPECT_TRUE(outcome.passed);
    c.out = b.path().string();
    nct::run_integral(c);
    EXPECT_EQ(slurp(a / "integral.csv"), slurp(b / "integral.csv"));
    std::string header;
    const auto rows = read_rows(a / "integral.csv", &header);
    EXPECT_EQ(header, "r,f,phi0_surrogate,phi0_true");
    EXPECT_GT(rows.size(), 100u);
}

TEST(Integral, NonConvergenceIsAFailedOutcome) {
    ScratchDir dir("int_fail");
    auto c = config_for("integral", dir.path());
    c.c = 0.9;
    c.max_iters = 3;
    const auto outcome = nct::run_integral(c);
    EXPECT_FALSE(outcome.passed);
    EXPECT_TRUE(fs::exists(dir / "integral.csv"));
}

TEST(Compare, NoScatteringCollapsesToFirstFlight) {
    ScratchDir dir("cmp0");
    auto c = config_for("compare", dir.path());
    c.c = 0.0;
    c.histories = 300000;
    const auto outcome = nct::run_compare(c);
    EXPECT_TRUE(outcome.passed) << outcome.summary;
    double worst = 0.0;
    for (const auto& row : read_rows(dir / "compare_nodes.csv"))
        if (row[0] >= 0.5 && row[0] <= 10.0) worst = std::max(worst, row[3]);
    EXPECT_LT(worst, 1e-3);
}

TEST(Compare, ReproducibleCsv) {
    ScratchDir a("cmp_a"), b("cmp_b");
    auto c = config_for("compare", a.path());
    c.c = 0.5;
    c.histories = 10000;
    nct::run_compare(c, {1, nullptr});
    c.out = b.path().string();
    nct::run_compare(c, {3, nullptr});
    for (const char* f : {"compare.csv", "compare_nodes.csv", "mc_tally.csv", "compare_summary.txt"})
        EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
}

TEST(Compare, ToleranceViolationFails) {
    ScratchDir dir("cmp_tight");
    auto c = config_for("compare", dir.path());
    c.c = 0.5;
    c.histories = 2000;
    c.compare_tol = 1e-9;
    EXPECT_FALSE(nct::run_compare(c).passed);
}

TEST(Scenario, UnwritableOutputIsOutputError) {
    ScratchDir dir("unwritable");
    { std::ofstream(dir / "file") << "x"; }
    auto c = config_for("curves", dir / "file" / "sub");
    EXPECT_THROW(nct::run_scenario(c), nct::OutputError);
}

// ---- command line ----

int run_cli(const std::string& args) {
    const std::string cmd = std::string(NCTLAB_EXE) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Cli, ExitCodes) {
    ScratchDir dir("cli");
    const std::string out = " --out " + dir.path().string();
    EXPECT_EQ(run_cli("curves" + out), 0);
    EXPECT_EQ(run_cli("moments --law classical --sigmabar 2" + out), 0);
    EXPECT_EQ(run_cli("plot" + out), 2);
    EXPECT_EQ(run_cli(""), 2);
    EXPECT_EQ(run_cli("curves --set bogus=1" + out), 2);
    EXPECT_EQ(run_cli("curves --c 1.5" + out), 2);
    EXPECT_EQ(run_cli("curves --config " + (dir / "missing.cfg").string() + out), 2);
    EXPECT_EQ(run_cli("compare --law classical" + out), 2);
    { std::ofstream(dir / "blocker") << "x"; }
    EXPECT_EQ(run_cli("curves --out " + (dir / "blocker" / "sub").string()), 3);
    EXPECT_EQ(run_cli("moments --law tabulated --set table=" + (dir / "nope.txt").string() + out), 3);
    EXPECT_EQ(run_cli("compare --histories 2000 --c 0.5 --set compare_tol=1e-9" + out), 1);
    EXPECT_EQ(run_cli("compare --histories 300000 --c 0" + out), 0);
}

TEST(Cli, FlagsOverrideConfigFile) {
    ScratchDir dir("cli_cfg");
    {
        std::ofstream cfg(dir / "run.cfg");
        cfg << "c = 0.3\nseed = 9\nhistories = 777\n";
    }
    const std::string base = std::string(NCTLAB_EXE) + " mc --print-config --config " +
                             (dir / "run.cfg").string();
    const std::string cmd = base + " --seed 11 > " + (dir / "resolved.txt").string();
    ASSERT_EQ(std::system(cmd.c_str()), 0);
    const auto resolved = nct::parse_config(slurp(dir / "resolved.txt"));
    EXPECT_EQ(resolved.scenario, "mc");
    EXPECT_EQ(resolved.c, 0.3);
    EXPECT_EQ(resolved.seed, 11u);
    EXPECT_EQ(resolved.histories, 777u);
}

TEST(Cli, DemoTabulatedConfigRuns) {
    ScratchDir dir("cli_demo");
    EXPECT_EQ(run_cli("integral --config " NCT_DEMO_DIR "/tabulated_integral.cfg --out " +
                      dir.path().string()),
              0);
    EXPECT_TRUE(fs::exists(dir / "integral.csv"));
}

}  // namespace
