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
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <queue>
#include <stdexcept>
#include <vector>

namespace nct {

/// Result of an adaptive integration: value, error estimate and whether the
/// requested tolerance was met before the interval budget ran out.
struct QuadratureResult {
    double value = 0.0;
    double error = 0.0;
    std::size_t evaluations = 0;
    bool converged = false;
};

struct QuadratureOptions {
    double rel_tol = 1e-10;
    double abs_tol = 1e-14;
    std::size_t max_intervals = 4000;
};

namespace detail {

// 7-point Gauss / 15-point Kronrod nodes and weights on [-1, 1]. Only the
// nonnegative half is stored; index 7 is the centre.
inline constexpr std::array<double, 8> kKronrodNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};

inline constexpr std::array<double, 8> kKronrodWeights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};

// Gauss weights for the odd Kronrod nodes (1, 3, 5) and the centre.
inline constexpr std::array<double, 4> kGaussWeights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
    double a, b, value, error;
    bool operator<(const Segment& other) const { return error < other.error; }
};

template <class F>
Segment gauss_kronrod_15(F&& f, double a, double b) {
    const double centre = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    const double fc = f(centre);
    double kronrod = fc * kKronrodWeights[7];
    double gauss = fc * kGaussWeights[3];
    for (std::size_t j = 0; j < 7; ++j) {
        const double dx = half * kKronrodNodes[j];
        const double pair = f(centre - dx) + f(centre + dx);
        kronrod += kKronrodWeights[j] * pair;
        if (j % 2 == 1) gauss += kGaussWeights[j / 2] * pair;
    }
    return {a, b, kronrod * half, std::abs((kronrod - gauss) * half)};
}

}  // namespace detail

/// Globally adaptive Gauss-Kronrod integration of f over the finite interval
/// [a, b]. The interval with the largest error estimate is bisected until
/// the summed error drops below max(abs_tol, rel_tol * |value|).
template <class F>
QuadratureResult integrate(F&& f, double a, double b, const QuadratureOptions& opts = {}) {
    if (!(a <= b)) throw std::domain_error("integrate: expected a <= b");
    QuadratureResult result;
    if (a == b) {
        result.converged = true;
        return result;
    }

    std::priority_queue<detail::Segment> work;
    work.push(detail::gauss_kronrod_15(f, a, b));
    result.evaluations = 15;
    double value = work.top().value;
    double error = work.top().error;

    while (true) {
        const double target = std::max(opts.abs_tol, opts.rel_tol * std::abs(value));
        if (error <= target) {
            result.converged = true;
            break;
        }
        if (work.size() >= opts.max_intervals) break;

        const detail::Segment worst = work.top();
        const double mid = 0.5 * (worst.a + worst.b);
        if (!(worst.a < mid && mid < worst.b)) break;  // interval no longer divisible
        work.pop();
        const auto left = detail::gauss_kronrod_15(f, worst.a, mid);
        const auto right = detail::gauss_kronrod_15(f, mid, worst.b);
        result.evaluations += 30;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        work.push(left);
        work.push(right);
    }

    // Re-sum from the leaves; the running totals above accumulate roundoff.
    value = 0.0;
    error = 0.0;
    while (!work.empty()) {
        value += work.top().value;
        error += work.top().error;
        work.pop();
    }
    result.value = value;
    result.error = error;
    if (!std::isfinite(value)) result.converged = false;
    return result;
}

/// Integral of f over [a, inf). The half line is mapped onto [0, 1) by
/// s = a + scale * t / (1 - t), which turns an exponentially decaying
/// integrand into one that vanishes smoothly at t = 1.
template <class F>
QuadratureResult integrate_to_infinity(F&& f, double a, double scale,
                                       const QuadratureOptions& opts = {}) {
    if (!(scale > 0.0)) throw std::domain_error("integrate_to_infinity: scale must be positive");
    auto mapped = [&](double t) {
        const double one_minus = 1.0 - t;
        if (one_minus <= 0.0) return 0.0;
        const double s = a + scale * t / one_minus;
        if (!std::isfinite(s)) return 0.0;
        return f(s) * scale / (one_minus * one_minus);
    };
    return integrate(mapped, 0.0, 1.0, opts);
}

}  // namespace nct
