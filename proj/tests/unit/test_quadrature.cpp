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

#include "nct/quadrature.hpp"

namespace {

TEST(Quadrature, PolynomialIsExact) {
    // G7K15 integrates degree-22 polynomials exactly on one panel
    const auto r = nct::integrate([](double x) { return 3.0 * x * x - 2.0 * x + 1.0; }, 0.0, 2.0);
    EXPECT_TRUE(r.converged);
    EXPECT_NEAR(r.value, 8.0 - 4.0 + 2.0, 1e-14);
}

TEST(Quadrature, SmoothOscillatory) {
    const auto r = nct::integrate([](double x) { return std::sin(x); }, 0.0, std::numbers::pi);
    EXPECT_TRUE(r.converged);
    EXPECT_NEAR(r.value, 2.0, 1e-13);
}

TEST(Quadrature, EndpointSqrtSingularity) {
    const auto r = nct::integrate([](double x) { return 1.0 / std::sqrt(x); }, 0.0, 1.0);
    EXPECT_TRUE(r.converged);
    EXPECT_NEAR(r.value, 2.0, 1e-9);
}

TEST(Quadrature, ReversedLimitsRejected) {
    auto f = [](double x) { return std::exp(x); };
    EXPECT_NEAR(nct::integrate(f, 0.0, 1.0).value, std::numbers::e - 1.0, 1e-14);
    EXPECT_THROW(nct::integrate(f, 1.0, 0.0), std::domain_error);
}

TEST(Quadrature, EmptyInterval) {
    const auto r = nct::integrate([](double) { return 1.0; }, 3.0, 3.0);
    EXPECT_EQ(r.value, 0.0);
    EXPECT_TRUE(r.converged);
}

TEST(Quadrature, HalfLineExponential) {
    const auto r = nct::integrate_to_infinity([](double x) { return std::exp(-2.0 * x); }, 0.0, 0.5);
    EXPECT_TRUE(r.converged);
    EXPECT_NEAR(r.value, 0.5, 1e-13);
}

TEST(Quadrature, HalfLineShiftedStart) {
    // int_1^inf x e^{-x} dx = 2/e
    const auto r = nct::integrate_to_infinity([](double x) { return x * std::exp(-x); }, 1.0, 1.0);
    EXPECT_TRUE(r.converged);
    EXPECT_NEAR(r.value, 2.0 / std::numbers::e, 1e-13);
}

TEST(Quadrature, HalfLineAlgebraicTail) {
    const auto r = nct::integrate_to_infinity([](double x) { return 1.0 / (1.0 + x * x); }, 0.0, 1.0);
    EXPECT_TRUE(r.converged);
    EXPECT_NEAR(r.value, std::numbers::pi / 2.0, 1e-10);
}

TEST(Quadrature, ReportsNonConvergence) {
    nct::QuadratureOptions opts;
    opts.max_intervals = 3;
    opts.rel_tol = 1e-15;
    opts.abs_tol = 0.0;
    const auto r = nct::integrate([](double x) { return std::sin(200.0 * x); }, 0.0, 10.0, opts);
    EXPECT_FALSE(r.converged);
    EXPECT_GT(r.error, 0.0);
}

}  // namespace
