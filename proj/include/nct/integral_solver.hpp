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
#include <limits>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "nct/csv.hpp"
#include "nct/mc_transport.hpp"
#include "nct/pathlen.hpp"

namespace nct {

/// Radial nodes 0 < r_1 < ... < r_N with volume weights: sum_i w_i g_i
/// approximates int 4 pi r^2 g dr for r g interpolated piecewise linearly
/// and held constant on [0, r_1].
class RadialGrid {
public:
    explicit RadialGrid(std::vector<double> nodes) : nodes_(std::move(nodes)) {
        if (nodes_.size() < 2) throw std::invalid_argument("RadialGrid: need at least two nodes");
        if (!(nodes_.front() > 0.0)) throw std::invalid_argument("RadialGrid: first node must be > 0");
        for (std::size_t i = 1; i < nodes_.size(); ++i)
            if (!(nodes_[i] > nodes_[i - 1]))
                throw std::invalid_argument("RadialGrid: nodes must be strictly increasing");

        const std::size_t n = nodes_.size();
        std::vector<double> rh(n, 0.0);  // weight for h_j = r_j g_j in int r h dr
        rh[0] += 0.5 * nodes_[0] * nodes_[0];
        for (std::size_t j = 0; j + 1 < n; ++j) {
            const double a = nodes_[j], b = nodes_[j + 1];
            rh[j] += (b - a) * (2.0 * a + b) / 6.0;
            rh[j + 1] += (b - a) * (a + 2.0 * b) / 6.0;
        }
        weights_.resize(n);
        for (std::size_t j = 0; j < n; ++j) weights_[j] = 4.0 * std::numbers::pi * nodes_[j] * rh[j];
    }

    /// n nodes in geometric progression from r_first to r_last.
    static RadialGrid geometric(double r_first, double r_last, std::size_t n) {
        if (!(r_first > 0.0 && r_last > r_first) || n < 2)
            throw std::invalid_argument("RadialGrid::geometric: bad arguments");
        std::vector<double> r(n);
        const double ratio = std::log(r_last / r_first) / static_cast<double>(n - 1);
        for (std::size_t i = 0; i < n; ++i) r[i] = r_first * std::exp(ratio * static_cast<double>(i));
        r.back() = r_last;
        return RadialGrid(std::move(r));
    }

    /// Geometric growth by `ratio` from r_first until the spacing reaches
    /// max_spacing, uniform after that, ending exactly at r_last.
    static RadialGrid graded(double r_first, double r_last, double ratio, double max_spacing) {
        if (!(r_first > 0.0 && r_last > r_first && ratio > 1.0 && max_spacing > 0.0))
            throw std::invalid_argument("RadialGrid::graded: bad arguments");
        std::vector<double> r{r_first};
        while (r.back() < r_last) r.push_back(r.back() + std::min(r.back() * (ratio - 1.0), max_spacing));
        r.back() = r_last;
        // drop a sliver interval at the outer edge
        if (r.size() > 2 && r[r.size() - 1] - r[r.size() - 2] < 0.5 * max_spacing &&
            r[r.size() - 2] * (ratio - 1.0) >= max_spacing)
            r.erase(r.end() - 2);
        return RadialGrid(std::move(r));
    }

    std::size_t size() const { return nodes_.size(); }
    const std::vector<double>& nodes() const { return nodes_; }
    const std::vector<double>& weights() const { return weights_; }
    double operator[](std::size_t i) const { return nodes_[i]; }
    double outer_radius() const { return nodes_.back(); }

private:
    std::vector<double> nodes_;
    std::vector<double> weights_;
};

/// Grid function on a RadialGrid: f(r) for collision density, or phi0(r).
class RadialField {
public:
    RadialField(RadialGrid grid, std::vector<double> values)
        : grid_(std::move(grid)), values_(std::move(values)) {
        if (values_.size() != grid_.size())
            throw std::invalid_argument("RadialField: value count does not match grid");
    }

    const RadialGrid& grid() const { return grid_; }
    const std::vector<double>& values() const { return values_; }
    std::vector<double>& values() { return values_; }
    double operator[](std::size_t i) const { return values_[i]; }
    std::size_t size() const { return values_.size(); }

    /// Interpolates r f(r) linearly between nodes; zero beyond the grid.
    double value_at(double r) const {
        const auto& x = grid_.nodes();
        if (!(r > 0.0)) throw std::domain_error("RadialField::value_at: r must be positive");
        if (r > x.back()) return 0.0;
        if (r <= x.front()) return x.front() * values_.front() / r;
        const std::size_t j = interval_of(r);
        const double t = (r - x[j]) / (x[j + 1] - x[j]);
        const double h = (1.0 - t) * x[j] * values_[j] + t * x[j + 1] * values_[j + 1];
        return h / r;
    }

    /// int 4 pi r^2 f dr over the grid, using the volume weights.
    double volume_integral() const {
        double sum = 0.0;
        for (std::size_t i = 0; i < size(); ++i) sum += grid_.weights()[i] * values_[i];
        return sum;
    }

    /// Analytic tail beyond the outer node, assuming r f ~ exp(-k r) with k
    /// fitted to the last two nodes. Zero if the field is not decaying there.
    double tail_integral() const {
        const auto& x = grid_.nodes();
        const std::size_t n = size();
        const double h1 = x[n - 2] * values_[n - 2];
        const double h2 = x[n - 1] * values_[n - 1];
        if (!(h1 > 0.0 && h2 > 0.0 && h2 < h1)) return 0.0;
        const double k = std::log(h1 / h2) / (x[n - 1] - x[n - 2]);
        const double R = x[n - 1];
        return 4.0 * std::numbers::pi * h2 * (R / k + 1.0 / (k * k));
    }

    /// Volume average of f over the shell [a, b].
    double shell_average(double a, double b) const {
        if (!(a >= 0.0 && b > a)) throw std::domain_error("shell_average: need 0 <= a < b");
        const auto& x = grid_.nodes();
        auto h_at = [&](double r) {
            if (r <= x.front()) return x.front() * values_.front();
            const std::size_t j = interval_of(r);
            const double t = (r - x[j]) / (x[j + 1] - x[j]);
            return (1.0 - t) * x[j] * values_[j] + t * x[j + 1] * values_[j + 1];
        };
        // int_lo^hi r h(r) dr with h linear on [lo, hi]
        auto piece = [&](double lo, double hi) {
            const double hl = h_at(lo), hh = h_at(hi);
            return (hi - lo) * (hl * (2.0 * lo + hi) + hh * (lo + 2.0 * hi)) / 6.0;
        };
        double acc = 0.0;
        const double top = std::min(b, x.back());
        double lo = a;
        if (lo < x.front()) {
            const double hi = std::min(top, x.front());
            acc += x.front() * values_.front() * 0.5 * (hi * hi - lo * lo);
            lo = hi;
        }
        while (lo < top) {
            const auto it = std::upper_bound(x.begin(), x.end(), lo);
            const double hi = std::min(top, it == x.end() ? top : *it);
            if (hi <= lo) break;
            acc += piece(lo, hi);
            lo = hi;
        }
        const double volume = 4.0 / 3.0 * std::numbers::pi * (b * b * b - a * a * a);
        return 4.0 * std::numbers::pi * acc / volume;
    }

private:
    std::size_t interval_of(double r) const {
        const auto& x = grid_.nodes();
        const auto it = std::upper_bound(x.begin(), x.end(), r);
        std::size_t j = static_cast<std::size_t>(std::distance(x.begin(), it));
        j = j == 0 ? 0 : j - 1;
        return std::min(j, x.size() - 2);
    }

    RadialGrid grid_;
    std::vector<double> values_;
};

/// Radial reduction of the point kernel p(|x - x'|) / (4 pi |x - x'|^2).
/// For spherically symmetric g,
///   (K g)(r) = 1/(2r) int_0^inf r' g(r') E(|r - r'|, r + r') dr',
/// with E(a, b) = int_a^b p(u)/u du = M(a) - M(b). The solver uses the
/// first and second antiderivatives
///   M1(a) = int_a^inf M = int_a^inf p(u) (u - a)/u du,
///   M2(a) = int_a^inf M1 = int_a^inf p(u) (u - a)^2 / (2u) du,
/// which stay finite at a = 0 even when M does not.
class ReducedKernel {
public:
    explicit ReducedKernel(PathLengthLaw law) : law_(std::move(law)) {}

    const PathLengthLaw& law() const { return law_; }

    /// E(a, b) for 0 <= a <= b (b may be +inf).
    double operator()(double a, double b) const {
        if (!(a >= 0.0 && b >= a)) throw std::domain_error("ReducedKernel: need 0 <= a <= b");
        if (const auto* dm = law_.get_if<DiffusionMatched>()) {
            const double l = dm->lambda();
            if (std::isinf(b)) return l * std::exp(-l * a);
            return -l * std::exp(-l * a) * std::expm1(-l * (b - a));
        }
        if (a == b) return 0.0;
        return tail(a) - tail(b);
    }

    /// M(a) = E(a, inf).
    double tail(double a) const {
        if (std::isinf(a)) return 0.0;
        return std::visit([a](const auto& l) { return l.tail_inverse_moment(a); }, law_.variant());
    }

    double tail_integral(double a) const {
        if (const auto* dm = law_.get_if<DiffusionMatched>()) return std::exp(-dm->lambda() * a);
        if (const auto* ce = law_.get_if<ClassicalExponential>()) {
            const double x = ce->sigma_t() * a;
            if (x <= 0.0) return 1.0;
            return std::exp(-x) + x * std::expint(-x);  // e^-x - x E1(x)
        }
        if (a <= 0.0) return law_.survival(0.0);
        return law_.survival(a) - a * tail(a);
    }

    double tail_integral2(double a) const {
        if (const auto* dm = law_.get_if<DiffusionMatched>())
            return std::exp(-dm->lambda() * a) / dm->lambda();
        if (const auto* ce = law_.get_if<ClassicalExponential>()) {
            const double sig = ce->sigma_t();
            const double x = sig * a;
            if (x <= 0.0) return 0.5 / sig;
            return (std::exp(-x) * (1.0 - x) - x * x * std::expint(-x)) / (2.0 * sig);
        }
        const auto& tab = std::get<Tabulated>(law_.variant());
        if (a <= 0.0) return 0.5 * tab.tail_first_moment(0.0);
        return 0.5 * (tab.tail_first_moment(a) - 2.0 * a * tab.survival(a) + a * a * tail(a));
    }

private:
    PathLengthLaw law_;
};

inline ReducedKernel reduce_kernel(const PathLengthLaw& law) { return ReducedKernel(law); }

/// Uncollided collision density of a point isotropic source:
/// strength p(r) / (4 pi r^2) at every node.
inline RadialField first_flight_source(const PathLengthLaw& law, const RadialGrid& grid,
                                       double strength) {
    std::vector<double> v(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double r = grid[i];
        v[i] = strength == 0.0 ? 0.0 : strength * law.pdf(r) / (4.0 * std::numbers::pi * r * r);
    }
    return RadialField(grid, std::move(v));
}

/// Dense matrix A with (K g)(r_i) = sum_j A_ij g_j. Built by product
/// integration: r' g(r') is linear between nodes (constant on [0, r_1]) and
/// the kernel is integrated exactly against it through M1 and M2.
class KernelMatrix {
public:
    KernelMatrix(const ReducedKernel& kernel, const RadialGrid& grid)
        : n_(grid.size()), a_(n_ * n_, 0.0) {
        const auto& x = grid.nodes();
        std::vector<double> w(n_);
        for (std::size_t i = 0; i < n_; ++i) {
            const double r = x[i];
            std::fill(w.begin(), w.end(), 0.0);

            // int_{u0}^{u1} q(u) M(u) du for linear q with q(u0)=q0, q(u1)=q1,
            // given M1 and M2 at the ends.
            auto moment = [](double u0, double u1, double m1_0, double m1_1, double m2_0,
                             double m2_1, double q0, double q1) {
                const double slope = (q1 - q0) / (u1 - u0);
                return q0 * m1_0 - q1 * m1_1 + slope * (m2_0 - m2_1);
            };

            // Each interval [lo, hi] of r' contributes to its two end nodes.
            // near: u = |r - r'|, far: u = r + r'.
            auto accumulate = [&](double lo, double hi, std::size_t j_lo, std::size_t j_hi,
                                  bool constant) {
                // basis values at (lo, hi); on [0, r_1] node 0 is held constant
                const double lo_at_lo = 1.0, lo_at_hi = constant ? 1.0 : 0.0;
                const double hi_at_lo = 0.0, hi_at_hi = 1.0;

                // near term, interval entirely on one side of r
                double nu0, nu1;
                bool reversed;
                if (hi <= r) {
                    nu0 = r - hi;
                    nu1 = r - lo;
                    reversed = true;  // u increases as r' decreases
                } else {
                    nu0 = lo - r;
                    nu1 = hi - r;
                    reversed = false;
                }
                const double n10 = kernel.tail_integral(nu0), n11 = kernel.tail_integral(nu1);
                const double n20 = kernel.tail_integral2(nu0), n21 = kernel.tail_integral2(nu1);
                const double fu0 = r + lo, fu1 = r + hi;
                const double f10 = kernel.tail_integral(fu0), f11 = kernel.tail_integral(fu1);
                const double f20 = kernel.tail_integral2(fu0), f21 = kernel.tail_integral2(fu1);

                auto contribution = [&](double at_lo, double at_hi) {
                    const double q0 = reversed ? at_hi : at_lo;
                    const double q1 = reversed ? at_lo : at_hi;
                    const double near = moment(nu0, nu1, n10, n11, n20, n21, q0, q1);
                    const double far = moment(fu0, fu1, f10, f11, f20, f21, at_lo, at_hi);
                    return near - far;
                };
                w[j_lo] += contribution(lo_at_lo, lo_at_hi);
                if (!constant) w[j_hi] += contribution(hi_at_lo, hi_at_hi);
            };

            accumulate(0.0, x[0], 0, 0, true);
            for (std::size_t j = 0; j + 1 < n_; ++j) accumulate(x[j], x[j + 1], j, j + 1, false);

            for (std::size_t j = 0; j < n_; ++j) a_[i * n_ + j] = w[j] * x[j] / (2.0 * r);
        }
    }

    std::size_t size() const { return n_; }
    double operator()(std::size_t i, std::size_t j) const { return a_[i * n_ + j]; }

    void apply(const std::vector<double>& g, std::vector<double>& out) const {
        out.assign(n_, 0.0);
        for (std::size_t i = 0; i < n_; ++i) {
            const double* row = &a_[i * n_];
            double acc = 0.0;
            for (std::size_t j = 0; j < n_; ++j) acc += row[j] * g[j];
            out[i] = acc;
        }
    }

private:
    std::size_t n_;
    std::vector<double> a_;
};

struct SolveResult {
    RadialField field;
    int iterations = 0;
    double residual = 0.0;                 ///< last relative update of r f
    std::vector<double> update_norms;      ///< absolute sup-norm of each update
};

/// Source iteration hit max_iters; carries the last iterate.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(RadialField last, double achieved, int count)
        : std::runtime_error("source iteration did not converge: residual " +
                             format_double(achieved) + " after " + std::to_string(count) +
                             " iterations"),
          last_iterate(std::move(last)), residual(achieved), iterations(count) {}

    RadialField last_iterate;
    double residual;
    int iterations;
};

/// ceil(ln tol / ln c) + 50.
inline int default_max_iterations(double c, double tol) {
    if (c <= 0.0) return 51;
    return static_cast<int>(std::ceil(std::log(tol) / std::log(c))) + 50;
}

/// From 1e-3 <s> out to 15 / kappa: 5% geometric growth near the source,
/// spacing capped at <s> / 16 further out.
inline RadialGrid default_grid(const TransportProblem& problem) {
    const double mean = problem.law.moments().first;
    const double r_max = 15.0 / diffusion_decay_constant(problem.law, problem.c);
    return RadialGrid::graded(1e-3 * mean, r_max, 1.05, mean / 16.0);
}

/// Solves f = c K f + K Q by source iteration from f = K Q, stopping when
/// the relative sup-norm update of r f, max_i r_i |df_i| / max_i r_i |f_i|,
/// drops below tol. Weighting by r removes the 1/r peak of the uncollided
/// term, which would otherwise dominate the norm.
inline SolveResult solve_collision_density(const TransportProblem& problem, const RadialGrid& grid,
                                           double tol = 1e-8, int max_iters = -1) {
    problem.validate();
    if (!(tol > 0.0)) throw std::domain_error("solve_collision_density: tol must be positive");
    if (max_iters < 0) max_iters = default_max_iterations(problem.c, tol);

    const RadialField source = first_flight_source(problem.law, grid, problem.source.strength);
    const KernelMatrix kmat(reduce_kernel(problem.law), grid);

    std::vector<double> f = source.values();
    std::vector<double> kf;
    SolveResult result{RadialField(grid, f), 0, 0.0, {}};
    for (int it = 1; it <= max_iters; ++it) {
        kmat.apply(f, kf);
        double diff = 0.0, weighted_diff = 0.0, weighted_scale = 0.0;
        for (std::size_t i = 0; i < f.size(); ++i) {
            const double next = problem.c * kf[i] + source[i];
            const double step = std::abs(next - f[i]);
            diff = std::max(diff, step);
            weighted_diff = std::max(weighted_diff, grid[i] * step);
            weighted_scale = std::max(weighted_scale, grid[i] * std::abs(next));
            f[i] = next;
        }
        result.update_norms.push_back(diff);
        result.iterations = it;
        result.residual = weighted_scale > 0.0 ? weighted_diff / weighted_scale : 0.0;
        if (result.residual < tol) {
            result.field = RadialField(grid, std::move(f));
            return result;
        }
    }
    throw ConvergenceError(RadialField(grid, std::move(f)), result.residual, result.iterations);
}

/// CSV: r, f, phi0_surrogate, phi0_true.
inline void write_solution_csv(std::ostream& out, const RadialField& f, double surrogate_mfp,
                               double true_mfp, const std::string& comment = {}) {
    if (!comment.empty()) out << "# " << comment << '\n';
    out << "r,f,phi0_surrogate,phi0_true\n";
    for (std::size_t i = 0; i < f.size(); ++i)
        write_row(out, f.grid()[i], f[i], surrogate_mfp * f[i], true_mfp * f[i]);
}

}  // namespace nct
