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
#include <concepts>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "nct/csv.hpp"
#include "nct/quadrature.hpp"

namespace nct {

/// A source of independent uniforms on (0, 1).
template <class R>
concept UniformSource = requires(R& r) {
    { r() } -> std::convertible_to<double>;
};

struct Moments {
    double first = 0.0;   ///< <s>
    double second = 0.0;  ///< <s^2>
};

/// lambda = sqrt(6 / <s^2>). Shared by the path-length law and the
/// diffusion oracle so both see the identical value.
inline double diffusion_lambda(double mean_square_free_path) {
    if (!(mean_square_free_path > 0.0) || !std::isfinite(mean_square_free_path))
        throw std::domain_error("mean-square free path must be positive and finite");
    return std::sqrt(6.0 / mean_square_free_path);
}

inline void require_nonnegative(double s, const char* what) {
    if (!(s >= 0.0)) throw std::domain_error(std::string(what) + ": path length must be >= 0");
}

/// Exponential free paths, p(s) = sigma_t exp(-sigma_t s).
class ClassicalExponential {
public:
    explicit ClassicalExponential(double sigma_t) : sigma_t_(sigma_t) {
        if (!(sigma_t > 0.0) || !std::isfinite(sigma_t))
            throw std::domain_error("ClassicalExponential: sigma_t must be positive");
    }

    double sigma_t() const { return sigma_t_; }
    double pdf(double s) const { return sigma_t_ * std::exp(-sigma_t_ * s); }
    double survival(double s) const { return std::exp(-sigma_t_ * s); }
    double hazard(double) const { return sigma_t_; }
    double cumulative_hazard(double s) const { return sigma_t_ * s; }
    Moments moments() const { return {1.0 / sigma_t_, 2.0 / (sigma_t_ * sigma_t_)}; }
    double length_scale() const { return 1.0 / sigma_t_; }
    double support_end() const { return std::numeric_limits<double>::infinity(); }

    /// int_a^inf p(u)/u du = sigma_t E1(sigma_t a).
    double tail_inverse_moment(double a) const {
        if (a <= 0.0) return std::numeric_limits<double>::infinity();
        return sigma_t_ * -std::expint(-sigma_t_ * a);
    }
    /// int_a^inf u p(u) du.
    double tail_first_moment(double a) const {
        return std::exp(-sigma_t_ * a) * (a + 1.0 / sigma_t_);
    }

    template <UniformSource Rng>
    double sample(Rng& rng) const {
        return -std::log(static_cast<double>(rng())) / sigma_t_;
    }

private:
    double sigma_t_;
};

/// The Gamma(2) law p(s) = lambda^2 s exp(-lambda s) with
/// lambda^2 = 6 / <s^2>. Its hazard is lambda^2 s / (1 + lambda s), and its
/// point-source kernel p(r) / (4 pi r^2) is lambda^2 exp(-lambda r)/(4 pi r).
class DiffusionMatched {
public:
    explicit DiffusionMatched(double mean_square_free_path)
        : ms2_(mean_square_free_path), lambda_(diffusion_lambda(mean_square_free_path)) {}

    double mean_square_free_path() const { return ms2_; }
    double lambda() const { return lambda_; }

    double pdf(double s) const { return lambda_ * lambda_ * s * std::exp(-lambda_ * s); }
    double survival(double s) const { return (1.0 + lambda_ * s) * std::exp(-lambda_ * s); }
    double hazard(double s) const { return lambda_ * lambda_ * s / (1.0 + lambda_ * s); }
    double cumulative_hazard(double s) const {
        return lambda_ * s - std::log1p(lambda_ * s);
    }
    Moments moments() const { return {2.0 / lambda_, ms2_}; }
    double length_scale() const { return 1.0 / lambda_; }
    double support_end() const { return std::numeric_limits<double>::infinity(); }

    double tail_inverse_moment(double a) const { return lambda_ * std::exp(-lambda_ * a); }
    double tail_first_moment(double a) const {
        const double la = lambda_ * a;
        return std::exp(-la) * (la * la + 2.0 * la + 2.0) / lambda_;
    }

    /// Sum of two unit exponentials: s = -ln(u1 u2) / lambda.
    template <UniformSource Rng>
    double sample(Rng& rng) const {
        const double u1 = rng();
        const double u2 = rng();
        return -std::log(u1 * u2) / lambda_;
    }

private:
    double ms2_;
    double lambda_;
};

/// Piecewise-linear density through (s_i, p_i), zero outside
/// [s_0, s_{n-1}]. The input table is rescaled to unit integral; the
/// original integral is kept as normalization().
class Tabulated {
public:
    Tabulated(std::vector<double> s, std::vector<double> p) : s_(std::move(s)), p_(std::move(p)) {
        if (s_.size() != p_.size()) throw std::invalid_argument("Tabulated: column lengths differ");
        if (s_.size() < 2) throw std::invalid_argument("Tabulated: need at least two rows");
        if (!(s_.front() >= 0.0)) throw std::invalid_argument("Tabulated: abscissae must be >= 0");
        for (std::size_t i = 0; i < s_.size(); ++i) {
            if (!std::isfinite(s_[i]) || !std::isfinite(p_[i]))
                throw std::invalid_argument("Tabulated: non-finite entry");
            if (p_[i] < 0.0) throw std::invalid_argument("Tabulated: negative density");
            if (i > 0 && !(s_[i] > s_[i - 1]))
                throw std::invalid_argument("Tabulated: abscissae must be strictly increasing");
        }
        double total = 0.0;
        for (std::size_t i = 0; i + 1 < s_.size(); ++i)
            total += 0.5 * (p_[i] + p_[i + 1]) * (s_[i + 1] - s_[i]);
        if (!(total > 0.0)) throw std::invalid_argument("Tabulated: density integrates to zero");
        normalization_ = total;
        for (auto& v : p_) v /= total;

        const std::size_t n = s_.size();
        cdf_.assign(n, 0.0);
        for (std::size_t i = 0; i + 1 < n; ++i)
            cdf_[i + 1] = cdf_[i] + segment_moment(i, s_[i], s_[i + 1], 0);
        for (int k = 0; k < 4; ++k) {
            auto& suffix = suffix_[k];
            suffix.assign(n, 0.0);
            for (std::size_t i = n - 1; i-- > 0;)
                suffix[i] = suffix[i + 1] + segment_moment(i, s_[i], s_[i + 1], k - 1);
        }
    }

    const std::vector<double>& abscissae() const { return s_; }
    /// Normalized density values at the abscissae.
    const std::vector<double>& densities() const { return p_; }
    double normalization() const { return normalization_; }

    double pdf(double s) const {
        if (s < s_.front() || s > s_.back()) return 0.0;
        const std::size_t i = segment_of(s);
        const double t = (s - s_[i]) / (s_[i + 1] - s_[i]);
        return p_[i] + t * (p_[i + 1] - p_[i]);
    }

    double survival(double s) const { return s <= s_.front() ? 1.0 : tail_moment(s, 0); }
    double cdf(double s) const { return 1.0 - survival(s); }

    double hazard(double s) const {
        const double surv = survival(s);
        if (!(surv > 0.0))
            throw std::domain_error("Tabulated: hazard undefined beyond the tabulated support");
        return pdf(s) / surv;
    }

    /// Closed-form moments from exact piecewise polynomial integration.
    Moments moments() const { return {suffix_[2].front(), suffix_[3].front()}; }
    double length_scale() const { return std::max(suffix_[2].front(), 1e-300); }
    double support_end() const { return s_.back(); }

    double tail_inverse_moment(double a) const {
        if (a <= 0.0 && s_.front() == 0.0 && p_.front() > 0.0)
            return std::numeric_limits<double>::infinity();
        return tail_moment(a, -1);
    }
    double tail_first_moment(double a) const { return tail_moment(a, 1); }

    /// int_a^inf u^k p(u) du for k in {-1, 0, 1, 2}, exact for the
    /// piecewise-linear density.
    double tail_moment(double a, int k) const {
        if (a >= s_.back()) return 0.0;
        const auto& suffix = suffix_.at(static_cast<std::size_t>(k + 1));
        if (a <= s_.front()) return suffix.front();
        const std::size_t i = segment_of(a);
        return segment_moment(i, a, s_[i + 1], k) + suffix[i + 1];
    }

    /// Index of the segment [s_i, s_{i+1}] containing s (clamped).
    std::size_t segment_of(double s) const {
        const auto it = std::upper_bound(s_.begin(), s_.end(), s);
        std::size_t i = static_cast<std::size_t>(std::distance(s_.begin(), it));
        i = i == 0 ? 0 : i - 1;
        return std::min(i, s_.size() - 2);
    }

    /// Inverts the piecewise-quadratic CDF segment by segment.
    template <UniformSource Rng>
    double sample(Rng& rng) const {
        const double u = rng();
        auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
        std::size_t i = static_cast<std::size_t>(std::distance(cdf_.begin(), it));
        i = std::clamp<std::size_t>(i == 0 ? 0 : i - 1, 0, s_.size() - 2);
        const double width = s_[i + 1] - s_[i];
        const double slope = (p_[i + 1] - p_[i]) / width;
        const double target = u - cdf_[i];
        // p_i x + slope x^2 / 2 = target, in the cancellation-free form.
        const double disc = std::max(0.0, p_[i] * p_[i] + 2.0 * slope * target);
        const double denom = p_[i] + std::sqrt(disc);
        const double x = denom > 0.0 ? 2.0 * target / denom : 0.0;
        return s_[i] + std::clamp(x, 0.0, width);
    }

private:
    // int_{u0}^{u1} u^k p(u) du on segment i, with p(u) = alpha + beta u.
    double segment_moment(std::size_t i, double u0, double u1, int k) const {
        const double beta = (p_[i + 1] - p_[i]) / (s_[i + 1] - s_[i]);
        const double alpha = p_[i] - beta * s_[i];
        switch (k) {
            case -1: {
                if (u0 <= 0.0) {
                    if (alpha != 0.0) return std::numeric_limits<double>::infinity();
                    return beta * (u1 - u0);
                }
                return alpha * std::log(u1 / u0) + beta * (u1 - u0);
            }
            case 0:
                // trapezoid on the linear density
                return 0.5 * (2.0 * alpha + beta * (u0 + u1)) * (u1 - u0);
            case 1:
                return alpha * (u1 * u1 - u0 * u0) / 2.0 + beta * (u1 * u1 * u1 - u0 * u0 * u0) / 3.0;
            case 2:
                return alpha * (u1 * u1 * u1 - u0 * u0 * u0) / 3.0 +
                       beta * (u1 * u1 * u1 * u1 - u0 * u0 * u0 * u0) / 4.0;
            default:
                throw std::invalid_argument("Tabulated: unsupported moment order");
        }
    }

    std::vector<double> s_;
    std::vector<double> p_;
    std::vector<double> cdf_;
    std::array<std::vector<double>, 4> suffix_;
    double normalization_ = 1.0;
};

enum class LawKind { ClassicalExponential, DiffusionMatched, Tabulated };

/// A path-length distribution p(s) together with its hazard Sigma_t(s),
/// survival function, sampler and moments.
class PathLengthLaw {
public:
    using Variant = std::variant<ClassicalExponential, DiffusionMatched, Tabulated>;

    PathLengthLaw(ClassicalExponential v) : law_(std::move(v)) {}
    PathLengthLaw(DiffusionMatched v) : law_(std::move(v)) {}
    PathLengthLaw(Tabulated v) : law_(std::move(v)) {}

    LawKind kind() const { return static_cast<LawKind>(law_.index()); }
    const Variant& variant() const { return law_; }

    template <class T>
    const T* get_if() const { return std::get_if<T>(&law_); }

    double pdf(double s) const {
        require_nonnegative(s, "pdf");
        return std::visit([s](const auto& l) { return l.pdf(s); }, law_);
    }

    double survival(double s) const {
        require_nonnegative(s, "survival");
        return std::visit([s](const auto& l) { return l.survival(s); }, law_);
    }

    double cdf(double s) const { return 1.0 - survival(s); }

    /// Sigma_t(s) = p(s) / int_s^inf p.
    double sigma_t_of_s(double s) const {
        require_nonnegative(s, "sigma_t_of_s");
        return std::visit([s](const auto& l) { return l.hazard(s); }, law_);
    }

    Moments moments() const {
        return std::visit([](const auto& l) { return l.moments(); }, law_);
    }

    double length_scale() const {
        return std::visit([](const auto& l) { return l.length_scale(); }, law_);
    }

    double support_end() const {
        return std::visit([](const auto& l) { return l.support_end(); }, law_);
    }

    template <UniformSource Rng>
    double sample_free_path(Rng& rng) const {
        return std::visit([&rng](const auto& l) { return l.sample(rng); }, law_);
    }

    std::string describe() const {
        std::ostringstream os;
        std::visit(
            [&os](const auto& l) {
                using T = std::decay_t<decltype(l)>;
                if constexpr (std::is_same_v<T, ClassicalExponential>)
                    os << "classical(sigma_t=" << format_double(l.sigma_t()) << ")";
                else if constexpr (std::is_same_v<T, DiffusionMatched>)
                    os << "diffusion_matched(ms2=" << format_double(l.mean_square_free_path()) << ")";
                else
                    os << "tabulated(rows=" << l.abscissae().size() << ")";
            },
            law_);
        return os.str();
    }

private:
    Variant law_;
};

inline PathLengthLaw make_diffusion_matched(double mean_square_free_path) {
    return DiffusionMatched(mean_square_free_path);
}

inline PathLengthLaw make_classical(double sigma_t) { return ClassicalExponential(sigma_t); }

inline PathLengthLaw make_tabulated(std::vector<double> s, std::vector<double> p) {
    return Tabulated(std::move(s), std::move(p));
}

/// Reads whitespace-separated `s p(s)` rows; '#' starts a comment.
inline Tabulated parse_tabulated(std::istream& in) {
    std::vector<double> s, p;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream row(line);
        double a = 0.0, b = 0.0;
        if (!(row >> a)) continue;  // blank line
        std::string extra;
        if (!(row >> b) || (row >> extra))
            throw std::invalid_argument("tabulated law: malformed row " + std::to_string(lineno));
        s.push_back(a);
        p.push_back(b);
    }
    return Tabulated(std::move(s), std::move(p));
}

inline Tabulated load_tabulated(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open tabulated law file: " + path);
    return parse_tabulated(in);
}

struct QuadratureMoments {
    QuadratureResult zeroth;  ///< int p
    QuadratureResult first;   ///< int s p
    QuadratureResult second;  ///< int s^2 p
    bool converged() const { return zeroth.converged && first.converged && second.converged; }
};

/// Moments by adaptive quadrature, independent of the closed forms.
inline QuadratureMoments quadrature_moments(const PathLengthLaw& law,
                                            const QuadratureOptions& opts = {}) {
    auto moment = [&](int k) -> QuadratureResult {
        auto integrand = [&](double s) { return std::pow(s, k) * law.pdf(s); };
        if (const auto* tab = law.get_if<Tabulated>()) {
            // one adaptive pass per linear piece; the kinks sit on abscissae
            QuadratureResult total;
            total.converged = true;
            const auto& x = tab->abscissae();
            for (std::size_t i = 0; i + 1 < x.size(); ++i) {
                const auto piece = integrate(integrand, x[i], x[i + 1], opts);
                total.value += piece.value;
                total.error += piece.error;
                total.evaluations += piece.evaluations;
                total.converged = total.converged && piece.converged;
            }
            return total;
        }
        return integrate_to_infinity(integrand, 0.0, law.length_scale(), opts);
    };
    QuadratureMoments out{moment(0), moment(1), moment(2)};
    for (const auto* r : {&out.zeroth, &out.first, &out.second})
        if (!std::isfinite(r->value))
            throw std::runtime_error("quadrature_moments: divergent moment integral");
    return out;
}

}  // namespace nct
