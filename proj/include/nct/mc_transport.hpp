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
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "nct/csv.hpp"
#include "nct/pathlen.hpp"
#include "nct/philox.hpp"

namespace nct {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    friend Vec3 operator+(const Vec3& a, const Vec3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
    friend Vec3 operator*(double s, const Vec3& v) { return {s * v.x, s * v.y, s * v.z}; }
    friend double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
    double norm() const { return std::sqrt(dot(*this, *this)); }
};

struct PointIsotropicSource {
    double strength = 1.0;
};

/// Infinite homogeneous medium: a path-length law, a scattering ratio and a
/// point isotropic source at the origin.
struct TransportProblem {
    PathLengthLaw law;
    double c = 0.0;
    PointIsotropicSource source{};

    void validate() const {
        if (!(c >= 0.0 && c < 1.0))
            throw std::domain_error("TransportProblem: scattering ratio must lie in [0, 1)");
        if (!(source.strength > 0.0) || !std::isfinite(source.strength))
            throw std::domain_error("TransportProblem: source strength must be positive");
    }
};

/// State of a particle in flight. path_length_since_event is reset to zero
/// at birth and after every collision.
struct Particle {
    Vec3 position;
    Vec3 direction;
    double path_length_since_event = 0.0;
    double weight = 1.0;
    bool alive = true;
};

/// Direction uniform on the unit sphere: mu uniform on [-1, 1], azimuth
/// uniform on [0, 2 pi).
template <UniformSource Rng>
Vec3 isotropic_direction(Rng& rng) {
    const double mu = 2.0 * rng() - 1.0;
    const double phi = 2.0 * std::numbers::pi * rng();
    const double sin_theta = std::sqrt(std::max(0.0, 1.0 - mu * mu));
    return {sin_theta * std::cos(phi), sin_theta * std::sin(phi), mu};
}

enum class CaptureMode {
    Analog,   ///< terminate with probability 1 - c at each collision
    Implicit  ///< always scatter with weight *= c, Russian roulette below a cutoff
};

struct RunOptions {
    unsigned workers = 1;
    std::size_t batch_size = 4096;
    CaptureMode capture = CaptureMode::Analog;
    double weight_cutoff = 0.25;
    double survival_weight = 0.5;
    bool track_length = false;
};

/// Follows one history from birth at the origin until termination.
/// on_flight(start, direction, length, weight) is called for every free
/// flight and on_collision(position, weight) for every collision.
template <UniformSource Rng, class OnFlight, class OnCollision>
void transport_history(const TransportProblem& problem, Rng& rng, const RunOptions& opts,
                       OnFlight&& on_flight, OnCollision&& on_collision) {
    Particle p;
    p.direction = isotropic_direction(rng);
    while (p.alive) {
        const double s = problem.law.sample_free_path(rng);
        on_flight(p.position, p.direction, s, p.weight);
        p.position = p.position + s * p.direction;
        p.path_length_since_event += s;
        on_collision(p.position, p.weight);

        if (opts.capture == CaptureMode::Analog) {
            if (rng() >= problem.c) {
                p.alive = false;
                break;
            }
        } else {
            p.weight *= problem.c;
            if (p.weight <= 0.0) {
                p.alive = false;
                break;
            }
            if (p.weight < opts.weight_cutoff) {
                if (rng() < p.weight / opts.survival_weight) {
                    p.weight = opts.survival_weight;
                } else {
                    p.alive = false;
                    break;
                }
            }
        }
        p.direction = isotropic_direction(rng);
        p.path_length_since_event = 0.0;
    }
}

/// Shell-binned collision tally. Shell k spans [edges[k], edges[k+1]);
/// collisions below edges[0] and at or beyond edges.back() go to the
/// underflow and overflow bins. Squared sums are per-history, so the
/// relative errors are history-based.
class RadialTally {
public:
    RadialTally() = default;
    explicit RadialTally(std::vector<double> edges, bool track_length = false)
        : edges_(std::move(edges)), track_enabled_(track_length) {
        if (edges_.size() < 2) throw std::invalid_argument("RadialTally: need at least one shell");
        if (!(edges_.front() >= 0.0)) throw std::invalid_argument("RadialTally: r0 must be >= 0");
        for (std::size_t k = 1; k < edges_.size(); ++k)
            if (!(edges_[k] > edges_[k - 1]))
                throw std::invalid_argument("RadialTally: shell edges must be strictly increasing");
        const std::size_t bins = edges_.size() + 1;  // underflow, shells, overflow
        score_.assign(bins, 0.0);
        score_sq_.assign(bins, 0.0);
        events_.assign(bins, 0);
        if (track_enabled_) {
            track_.assign(bins, 0.0);
            track_sq_.assign(bins, 0.0);
        }
    }

    std::size_t shells() const { return edges_.size() - 1; }
    const std::vector<double>& edges() const { return edges_; }
    bool track_length_enabled() const { return track_enabled_; }

    std::uint64_t histories() const { return histories_; }
    double strength() const { return strength_; }
    void set_strength(double s) { strength_ = s; }

    double r_lo(std::size_t k) const { return edges_[k]; }
    double r_hi(std::size_t k) const { return edges_[k + 1]; }
    double r_mid(std::size_t k) const { return 0.5 * (edges_[k] + edges_[k + 1]); }
    double volume(std::size_t k) const {
        const double a = edges_[k], b = edges_[k + 1];
        return 4.0 / 3.0 * std::numbers::pi * (b * b * b - a * a * a);
    }

    /// Bin index: 0 underflow, 1..K shells, K+1 overflow.
    std::size_t bin_of(double r) const {
        if (r < edges_.front()) return 0;
        const auto it = std::upper_bound(edges_.begin(), edges_.end(), r);
        return static_cast<std::size_t>(std::distance(edges_.begin(), it));
    }

    std::uint64_t count(std::size_t k) const { return events_[k + 1]; }
    double score(std::size_t k) const { return score_[k + 1]; }
    std::uint64_t overflow_count() const { return events_.back(); }
    std::uint64_t underflow_count() const { return events_.front(); }
    double overflow_score() const { return score_.back(); }
    std::uint64_t total_collisions() const { return total_events_; }
    double total_score() const { return total_score_; }
    double total_score_sq() const { return total_score_sq_; }

    /// Collisions per unit volume per source particle, times source strength.
    double estimate(std::size_t k) const {
        if (histories_ == 0) return 0.0;
        return strength_ * score_[k + 1] / (static_cast<double>(histories_) * volume(k));
    }

    /// Relative standard error of estimate(k); NaN when fewer than two
    /// collisions were scored in the shell.
    double rel_std_err(std::size_t k) const {
        return relative_error(score_[k + 1], score_sq_[k + 1], events_[k + 1]);
    }

    /// Track-length estimate of the scalar flux in shell k.
    double track_estimate(std::size_t k) const {
        if (!track_enabled_ || histories_ == 0) return 0.0;
        return strength_ * track_[k + 1] / (static_cast<double>(histories_) * volume(k));
    }
    double track_rel_std_err(std::size_t k) const {
        if (!track_enabled_) return std::numeric_limits<double>::quiet_NaN();
        return relative_error(track_[k + 1], track_sq_[k + 1], 2);
    }

    /// Mean collisions (score) per history and its standard error.
    double mean_collisions_per_history() const {
        return histories_ ? total_score_ / static_cast<double>(histories_) : 0.0;
    }
    double mean_collisions_std_err() const {
        if (histories_ < 2) return std::numeric_limits<double>::quiet_NaN();
        const double n = static_cast<double>(histories_);
        const double mean = total_score_ / n;
        const double var = std::max(0.0, total_score_sq_ / n - mean * mean) * n / (n - 1.0);
        return std::sqrt(var / n);
    }

    /// Folds another tally with identical edges into this one.
    void merge(const RadialTally& other) {
        if (other.edges_ != edges_ || other.track_enabled_ != track_enabled_)
            throw std::invalid_argument("RadialTally::merge: incompatible tallies");
        for (std::size_t b = 0; b < score_.size(); ++b) {
            score_[b] += other.score_[b];
            score_sq_[b] += other.score_sq_[b];
            events_[b] += other.events_[b];
        }
        if (track_enabled_)
            for (std::size_t b = 0; b < track_.size(); ++b) {
                track_[b] += other.track_[b];
                track_sq_[b] += other.track_sq_[b];
            }
        histories_ += other.histories_;
        total_events_ += other.total_events_;
        total_score_ += other.total_score_;
        total_score_sq_ += other.total_score_sq_;
    }

private:
    friend class HistoryScorer;

    double relative_error(double sum, double sum_sq, std::uint64_t events) const {
        if (events < 2 || histories_ < 2 || !(sum > 0.0))
            return std::numeric_limits<double>::quiet_NaN();
        const double n = static_cast<double>(histories_);
        const double mean = sum / n;
        const double var = std::max(0.0, sum_sq / n - mean * mean) * n / (n - 1.0);
        return std::sqrt(var / n) / mean;
    }

    std::vector<double> edges_;
    bool track_enabled_ = false;
    std::vector<double> score_, score_sq_;
    std::vector<std::uint64_t> events_;
    std::vector<double> track_, track_sq_;
    std::uint64_t histories_ = 0;
    std::uint64_t total_events_ = 0;
    double total_score_ = 0.0;
    double total_score_sq_ = 0.0;
    double strength_ = 1.0;
};

/// Accumulates one history at a time into a RadialTally, keeping the
/// per-history sums needed for squared moments.
class HistoryScorer {
public:
    explicit HistoryScorer(RadialTally& tally)
        : tally_(tally), hist_score_(tally.score_.size(), 0.0),
          hist_track_(tally.track_enabled_ ? tally.score_.size() : 0, 0.0),
          score_touched_(tally.score_.size(), 0), track_touched_(hist_track_.size(), 0) {}

    void collision(const Vec3& position, double weight) {
        const std::size_t b = tally_.bin_of(position.norm());
        if (!score_touched_[b]) {
            score_touched_[b] = 1;
            score_list_.push_back(b);
        }
        hist_score_[b] += weight;
        tally_.events_[b] += 1;
        tally_.total_events_ += 1;
        hist_total_ += weight;
    }

    /// Splits a straight flight among the shells it crosses.
    void flight(const Vec3& start, const Vec3& dir, double length, double weight) {
        if (!tally_.track_enabled_ || length <= 0.0) return;
        const double b = dot(start, dir);
        const double c0 = dot(start, start);
        // length of {t in [0, L] : |start + t dir| <= radius}
        auto inside = [&](double radius) {
            const double disc = b * b - c0 + radius * radius;
            if (disc <= 0.0) return 0.0;
            const double sq = std::sqrt(disc);
            const double lo = std::max(0.0, -b - sq);
            const double hi = std::min(length, -b + sq);
            return std::max(0.0, hi - lo);
        };
        const double t_closest = std::clamp(-b, 0.0, length);
        const double r_min = std::sqrt(std::max(0.0, c0 + 2.0 * b * t_closest + t_closest * t_closest));
        const double r_end = std::sqrt(std::max(0.0, c0 + 2.0 * b * length + length * length));
        const double r_max = std::max(std::sqrt(c0), r_end);

        const auto& edges = tally_.edges_;
        const std::size_t first = tally_.bin_of(r_min);
        const std::size_t last = tally_.bin_of(r_max);
        for (std::size_t bin = first; bin <= last; ++bin) {
            const double outer = bin < edges.size() ? inside(edges[bin]) : length;
            const double inner = bin == 0 ? 0.0 : inside(edges[bin - 1]);
            const double seg = outer - inner;
            if (seg <= 0.0) continue;
            if (!track_touched_[bin]) {
                track_touched_[bin] = 1;
                track_list_.push_back(bin);
            }
            hist_track_[bin] += weight * seg;
        }
    }

    void end_history() {
        for (const std::size_t b : score_list_) {
            tally_.score_[b] += hist_score_[b];
            tally_.score_sq_[b] += hist_score_[b] * hist_score_[b];
            hist_score_[b] = 0.0;
            score_touched_[b] = 0;
        }
        score_list_.clear();
        for (const std::size_t b : track_list_) {
            tally_.track_[b] += hist_track_[b];
            tally_.track_sq_[b] += hist_track_[b] * hist_track_[b];
            hist_track_[b] = 0.0;
            track_touched_[b] = 0;
        }
        track_list_.clear();
        tally_.total_score_ += hist_total_;
        tally_.total_score_sq_ += hist_total_ * hist_total_;
        hist_total_ = 0.0;
        tally_.histories_ += 1;
    }

private:
    RadialTally& tally_;
    std::vector<double> hist_score_, hist_track_;
    std::vector<char> score_touched_, track_touched_;
    std::vector<std::size_t> score_list_, track_list_;
    double hist_total_ = 0.0;
};

/// n uniform shells on [0, r_max].
inline std::vector<double> uniform_shell_edges(std::size_t n, double r_max) {
    if (n == 0 || !(r_max > 0.0)) throw std::invalid_argument("uniform_shell_edges: bad arguments");
    std::vector<double> edges(n + 1);
    for (std::size_t k = 0; k <= n; ++k)
        edges[k] = r_max * static_cast<double>(k) / static_cast<double>(n);
    return edges;
}

/// Diffusion decay constant kappa = sqrt(6 (1 - c) / <s^2>) of the law.
inline double diffusion_decay_constant(const PathLengthLaw& law, double c) {
    return std::sqrt(6.0 * (1.0 - c) / law.moments().second);
}

/// 60 uniform shells out to 12 / kappa.
inline std::vector<double> default_shell_edges(const TransportProblem& problem,
                                               std::size_t shells = 60) {
    return uniform_shell_edges(shells, 12.0 / diffusion_decay_constant(problem.law, problem.c));
}

/// Runs n_histories independent histories. History i draws from the
/// substream (master_seed, i), and batches are merged in index order, so
/// the result is bit-identical for any number of workers.
inline RadialTally run_histories(const TransportProblem& problem, const std::vector<double>& edges,
                                 std::uint64_t n_histories, std::uint64_t master_seed,
                                 const RunOptions& opts = {}) {
    problem.validate();
    if (n_histories < 1) throw std::invalid_argument("run_histories: need at least one history");
    if (opts.batch_size == 0) throw std::invalid_argument("run_histories: batch_size must be positive");

    const std::uint64_t batch = opts.batch_size;
    const std::uint64_t n_batches = (n_histories + batch - 1) / batch;
    std::vector<RadialTally> partial(n_batches, RadialTally(edges, opts.track_length));

    std::atomic<std::uint64_t> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};

    auto worker = [&] {
        try {
            while (!failed.load()) {
                const std::uint64_t b = next.fetch_add(1);
                if (b >= n_batches) break;
                RadialTally& tally = partial[b];
                HistoryScorer scorer(tally);
                const std::uint64_t end = std::min(n_histories, (b + 1) * batch);
                for (std::uint64_t h = b * batch; h < end; ++h) {
                    RngStream rng(master_seed, h);
                    transport_history(
                        problem, rng, opts,
                        [&](const Vec3& x, const Vec3& d, double s, double w) { scorer.flight(x, d, s, w); },
                        [&](const Vec3& x, double w) { scorer.collision(x, w); });
                    scorer.end_history();
                }
            }
        } catch (...) {
            if (!failed.exchange(true)) failure = std::current_exception();
        }
    };

    const unsigned workers = std::max(1u, opts.workers);
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    RadialTally merged(edges, opts.track_length);
    for (const auto& t : partial) merged.merge(t);
    merged.set_strength(problem.source.strength);
    return merged;
}

/// Shell values with relative standard errors.
struct ShellField {
    std::vector<double> edges;
    std::vector<double> values;
    std::vector<double> rel_err;
};

/// phi0 = <s> f per shell. Which <s> to use (the medium's true mean free
/// path or the law's first moment) is the caller's decision.
inline ShellField scalar_flux_estimate(const RadialTally& tally, double mean_free_path) {
    if (!(mean_free_path > 0.0))
        throw std::domain_error("scalar_flux_estimate: mean free path must be positive");
    ShellField out{tally.edges(), {}, {}};
    for (std::size_t k = 0; k < tally.shells(); ++k) {
        out.values.push_back(mean_free_path * tally.estimate(k));
        out.rel_err.push_back(tally.rel_std_err(k));
    }
    return out;
}

/// CSV: r_mid, r_lo, r_hi, f_estimate, rel_std_err, count.
inline void write_tally_csv(std::ostream& out, const RadialTally& tally,
                            const std::string& comment = {}) {
    if (!comment.empty()) out << "# " << comment << '\n';
    out << "r_mid,r_lo,r_hi,f_estimate,rel_std_err,count\n";
    for (std::size_t k = 0; k < tally.shells(); ++k)
        write_row(out, tally.r_mid(k), tally.r_lo(k), tally.r_hi(k), tally.estimate(k),
                  tally.rel_std_err(k), tally.count(k));
}

}  // namespace nct
