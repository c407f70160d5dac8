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

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "nct/diffusion_oracle.hpp"
#include "nct/pathlen.hpp"
#include "nct/quadrature.hpp"

namespace {

constexpr double kPi = std::numbers::pi;

TEST(GreensFunction, Values) {
    EXPECT_NEAR(nct::greens_function(1.0, 1.0), 0.0292749157621596, 1e-16);
    EXPECT_NEAR(nct::greens_function(0.0, 1.0), 0.0795774715459477, 1e-16);
    EXPECT_EQ(nct::greens_function(1.0, 1e4), 0.0);
}

TEST(GreensFunction, DomainError) {
    EXPECT_THROW(nct::greens_function(1.0, 0.0), std::domain_error);
    EXPECT_THROW(nct::greens_function(1.0, -2.0), std::domain_error);
}

TEST(DiffusionParams, DerivedQuantities) {
    const nct::DiffusionParams p(2.047735, 6.2898, 0.99);
    EXPECT_NEAR(p.lambda(), 0.976691047892568, 1e-14);
    EXPECT_NEAR(p.kappa(), 0.0976691047892568, 1e-14);
    EXPECT_LT(p.kappa(), p.lambda());
    EXPECT_GT(p.kappa(), 0.0);
    EXPECT_NEAR(p.diffusion_coefficient(), 6.2898 / (6.0 * 2.047735), 1e-15);
}

TEST(DiffusionParams, LambdaIdenticalToPathLengthLaw) {
    for (double ms2 : {6.2898, 6.0, 5.679824434354801, 0.123, 1e3}) {
        const nct::DiffusionParams p(1.0, ms2, 0.5);
        EXPECT_EQ(p.lambda(), nct::DiffusionMatched(ms2).lambda());
    }
}

TEST(DiffusionParams, RejectsBadInput) {
    EXPECT_THROW(nct::DiffusionParams(0.0, 6.0, 0.5), std::domain_error);
    EXPECT_THROW(nct::DiffusionParams(1.0, 0.0, 0.5), std::domain_error);
    EXPECT_THROW(nct::DiffusionParams(1.0, 6.0, 1.0), std::domain_error);
    EXPECT_THROW(nct::DiffusionParams(1.0, 6.0, -0.1), std::domain_error);
}

TEST(CollisionDensity, Values) {
    const nct::DiffusionParams p(1.0, 6.0, 0.99);  // lambda = 1, kappa = 0.1
    EXPECT_NEAR(nct::point_source_collision_density(p, 1.0, 1.0), 0.0720046738874653, 1e-15);
    EXPECT_THROW(nct::point_source_collision_density(p, 1.0, 0.0), std::domain_error);
}

TEST(CollisionDensity, NoScatteringIsLambdaSquaredG) {
    for (double ms2 : {6.0, 6.2898, 2.5}) {
        const nct::DiffusionParams p(1.0, ms2, 0.0);
        const double l = p.lambda();
        EXPECT_NEAR(nct::point_source_collision_density(p, 1.0, 1.0),
                    l * l * nct::greens_function(l, 1.0), 1e-16);
    }
}

TEST(CollisionDensity, TotalRateIsGeometricSum) {
    for (double c : {0.0, 0.5, 0.99}) {
        const nct::DiffusionParams p(2.0, 6.2898, c);
        const double expected = 3.0 / (1.0 - c);
        EXPECT_NEAR(nct::total_collision_rate(p, 3.0), expected, 1e-12 * expected);
        const auto q = nct::integrate_to_infinity(
            [&](double r) { return 4.0 * kPi * r * r * nct::point_source_collision_density(p, 3.0, r); },
            0.0, 1.0 / p.kappa());
        EXPECT_TRUE(q.converged);
        EXPECT_NEAR(q.value, expected, 1e-9 * expected);
    }
}

TEST(CollisionDensity, ShellAverageMatchesQuadrature) {
    const nct::DiffusionParams p(2.0, 6.2898, 0.99);
    for (auto [a, b] : {std::pair{0.0, 2.0}, std::pair{1.0, 1.5}, std::pair{4.0, 8.0}}) {
        const auto q = nct::integrate(
            [&](double r) {
                return r > 0.0 ? 4.0 * kPi * r * r * nct::point_source_collision_density(p, 1.0, r) : 0.0;
            },
            a, b);
        const double volume = 4.0 / 3.0 * kPi * (b * b * b - a * a * a);
        EXPECT_NEAR(nct::shell_average_collision_density(p, 1.0, a, b), q.value / volume,
                    1e-12 * q.value / volume);
    }
}

TEST(ScalarFlux, IsMeanFreePathTimesF) {
    const nct::DiffusionParams unit(1.0, 6.2898, 0.99);
    EXPECT_EQ(nct::point_source_scalar_flux(unit, 1.0, 2.0),
              nct::point_source_collision_density(unit, 1.0, 2.0));
    const nct::DiffusionParams pebble(2.047735, 6.2898, 0.99);
    EXPECT_NEAR(nct::point_source_scalar_flux(pebble, 1.0, 2.0),
                2.047735 * nct::point_source_collision_density(pebble, 1.0, 2.0), 1e-17);
    EXPECT_EQ(nct::point_source_scalar_flux(pebble, 0.0, 2.0), 0.0);
}

// (1/r) d^2/dr^2 (r u) by central differences.
template <class F>
long double radial_laplacian(F&& u, long double r, long double h) {
    auto ru = [&](long double x) { return x * u(x); };
    return (ru(r + h) - 2.0L * ru(r) + ru(r - h)) / (h * h * r);
}

TEST(ScreenedPoisson, CollisionDensityResidual) {
    const nct::DiffusionParams p(2.047735, 6.2898, 0.99);
    const long double lambda = p.lambda();
    const long double kappa = lambda * std::sqrt(1.0L - 0.99L);
    auto f = [&](long double r) {
        return nct::point_source_collision_density<long double>(lambda, kappa, 1.0L, r);
    };
    const long double h = 1e-3L;
    for (long double r = 0.5L; r <= 10.0L; r += 0.05L) {
        const long double absorb = lambda * lambda * (1.0L - 0.99L) * f(r);
        const long double residual = -radial_laplacian(f, r, h) + absorb;
        ASSERT_LT(std::abs(residual / absorb), 1e-6L) << "r = " << static_cast<double>(r);
    }
}

TEST(ScreenedPoisson, GreensFunctionIdentity) {
    for (long double lambda : {0.976691047892568L, 1.0L, 0.1L}) {
        auto g = [&](long double r) { return nct::greens_function<long double>(lambda, r); };
        for (long double r = 0.5L; r <= 10.0L; r += 0.05L) {
            const long double mass = lambda * lambda * g(r);
            const long double residual = -radial_laplacian(g, r, 1e-3L) + mass;
            ASSERT_LT(std::abs(residual / mass), 1e-6L);
        }
    }
}

// K^m applied to a unit point source, where K has kernel
// lambda^2 exp(-lambda r) / (4 pi r): the Fourier symbol is
// (lambda^2 / (lambda^2 + k^2))^m, whose inverse transform is a Matern
// function. Summing c^(m-1) K^m Q is the Neumann series of f = c K f + K Q.
double iterated_kernel(int m, double lambda, double r) {
    const double nu = m - 1.5;
    const double log_term = 2.0 * m * std::log(lambda) - 1.5 * std::log(2.0 * kPi) +
                            (1.0 - m) * std::log(2.0) - std::lgamma(m) +
                            nu * std::log(r / lambda) + std::log(std::cyl_bessel_k(std::abs(nu), lambda * r));
    return std::exp(log_term);
}

TEST(NeumannSeries, FirstTermIsKernel) {
    for (double r : {0.5, 1.0, 3.0})
        EXPECT_NEAR(iterated_kernel(1, 1.0, r), std::exp(-r) / (4.0 * kPi * r),
                    1e-13 * std::exp(-r) / r);
}

TEST(NeumannSeries, SumMatchesClosedForm) {
    const double c = 0.5;
    const nct::DiffusionParams p(1.0, 6.2898, c);
    for (double r : {0.5, 1.0, 2.0, 5.0, 10.0}) {
        double sum = 0.0, cm = 1.0;
        for (int m = 1; m <= 80; ++m, cm *= c) sum += cm * iterated_kernel(m, p.lambda(), r);
        const double exact = nct::point_source_collision_density(p, 1.0, r);
        EXPECT_NEAR(sum / exact, 1.0, 1e-10) << "r = " << r;
    }
}

}  // namespace
