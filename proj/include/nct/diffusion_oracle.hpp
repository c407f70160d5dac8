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

#include <cmath>
#include <concepts>
#include <numbers>
#include <stdexcept>

#include "nct/pathlen.hpp"

namespace nct {

/// Parameters of the nonclassical diffusion equation
///   -<s^2>/(6<s>) lap(phi0) + (1-c)/<s> phi0 = Q.
/// The mean free path is supplied by the caller and is never derived from
/// <s^2>: the surrogate law's first moment is not the medium's <s>.
class DiffusionParams {
public:
    DiffusionParams(double mean_free_path, double mean_square_free_path, double c)
        : mfp_(mean_free_path), ms2_(mean_square_free_path), c_(c),
          lambda_(diffusion_lambda(mean_square_free_path)) {
        if (!(mean_free_path > 0.0)) throw std::domain_error("DiffusionParams: <s> must be positive");
        if (!(c >= 0.0 && c < 1.0)) throw std::domain_error("DiffusionParams: c must lie in [0, 1)");
        kappa_ = lambda_ * std::sqrt(1.0 - c_);
    }

    double mean_free_path() const { return mfp_; }
    double mean_square_free_path() const { return ms2_; }
    double c() const { return c_; }
    double lambda() const { return lambda_; }
    /// Decay constant of the point-source solution, lambda sqrt(1 - c).
    double kappa() const { return kappa_; }
    double diffusion_coefficient() const { return ms2_ / (6.0 * mfp_); }

private:
    double mfp_, ms2_, c_, lambda_, kappa_;
};

/// G(r) = exp(-lambda r) / (4 pi r), Green's function of -lap + lambda^2.
template <std::floating_point T>
T greens_function(T lambda, T r) {
    if (!(r > T(0))) throw std::domain_error("greens_function: r must be positive");
    return std::exp(-lambda * r) / (T(4) * std::numbers::pi_v<T> * r);
}

/// Collision-rate density of a point isotropic source in an infinite medium:
/// f(r) = strength lambda^2 exp(-kappa r) / (4 pi r). Obtained by eliminating
/// S = c f + Q from -lap f + lambda^2 f = lambda^2 S.
template <std::floating_point T>
T point_source_collision_density(T lambda, T kappa, T strength, T r) {
    return strength * lambda * lambda * greens_function(kappa, r);
}

inline double point_source_collision_density(const DiffusionParams& params, double strength,
                                             double r) {
    return point_source_collision_density(params.lambda(), params.kappa(), strength, r);
}

/// phi0 = <s> f with the caller's <s>.
inline double point_source_scalar_flux(const DiffusionParams& params, double strength, double r) {
    return params.mean_free_path() * point_source_collision_density(params, strength, r);
}

/// Volume average of f over the spherical shell a <= r <= b.
inline double shell_average_collision_density(const DiffusionParams& params, double strength,
                                              double a, double b) {
    if (!(a >= 0.0 && b > a)) throw std::domain_error("shell average: need 0 <= a < b");
    const double k = params.kappa();
    // int_a^b r exp(-k r) dr
    auto antideriv = [k](double r) { return -std::exp(-k * r) * (k * r + 1.0) / (k * k); };
    const double radial = antideriv(b) - antideriv(a);
    const double volume = 4.0 / 3.0 * std::numbers::pi * (b * b * b - a * a * a);
    // int_shell f dV = strength lambda^2 int_a^b r exp(-k r) dr
    return strength * params.lambda() * params.lambda() * radial / volume;
}

/// int f dV over all space = strength / (1 - c).
inline double total_collision_rate(const DiffusionParams& params, double strength) {
    return strength / (1.0 - params.c());
}

}  // namespace nct
