#pragma once

// Bounded particle swarm over a fixed-dimension search space.
//
// Each step draws r1, r2 in [0, 1) per particle (or per dimension when
// requested), then
//   v <- clamp(w*v + c1*r1*(b - s) + c2*r2*(g - s), -vmax, vmax)
//   s <- clamp(s + v, lower, upper)
// Fitness is minimized; personal and global bests only move on strict
// improvement, so ties keep the incumbent.

#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "npalf/errors.hpp"
#include "npalf/hdi_data.hpp"
#include "npalf/random.hpp"

namespace npalf {

template <std::size_t D>
using point = std::array<double, D>;

template <std::size_t D>
struct swarm_bounds {
    point<D> lower{};
    point<D> upper{};
    point<D> velocity_max{};  // velocity range is [-velocity_max, velocity_max]

    /// Velocity limit set to `fraction` of each position range.
    static swarm_bounds from_positions(const point<D>& lower, const point<D>& upper, double fraction = 0.01) {
        swarm_bounds b{lower, upper, {}};
        for (std::size_t d = 0; d < D; ++d) b.velocity_max[d] = fraction * (upper[d] - lower[d]);
        return b;
    }

    void validate() const {
        for (std::size_t d = 0; d < D; ++d) {
            if (!(lower[d] < upper[d]) || !std::isfinite(lower[d]) || !std::isfinite(upper[d]))
                throw config_error("swarm bounds: lower < upper must hold in dimension " + std::to_string(d));
            if (!(velocity_max[d] > 0.0) || !std::isfinite(velocity_max[d]))
                throw config_error("swarm bounds: velocity limit must be > 0 in dimension " + std::to_string(d));
        }
    }
};

struct pso_coefficients {
    double w = 0.7298;
    double c1 = 1.4962;
    double c2 = 1.4962;
    bool per_dimension_random = false;
};

template <std::size_t D>
struct particle {
    point<D> position{};
    point<D> velocity{};
    point<D> best_position{};
    double best_fitness = std::numeric_limits<double>::infinity();
    bool evaluated = false;
};

template <std::size_t D>
class swarm {
public:
    static constexpr std::size_t dimension = D;

    swarm(std::size_t size, const swarm_bounds<D>& bounds, const pso_coefficients& coefficients, std::uint64_t seed)
        : bounds_(bounds), coefficients_(coefficients), gen_(seed, streams::swarm) {
        if (size < 2) throw config_error("swarm needs at least 2 particles");
        bounds_.validate();
        particles_.resize(size);
        for (auto& p : particles_) {
            for (std::size_t d = 0; d < D; ++d) p.position[d] = gen_.uniform(bounds_.lower[d], bounds_.upper[d]);
            for (std::size_t d = 0; d < D; ++d)
                p.velocity[d] = gen_.uniform(-bounds_.velocity_max[d], bounds_.velocity_max[d]);
            p.best_position = p.position;
        }
        global_best_position_ = particles_.front().position;
    }

    std::size_t size() const noexcept { return particles_.size(); }
    const std::vector<particle<D>>& particles() const noexcept { return particles_; }
    const particle<D>& operator[](std::size_t j) const { return particles_.at(j); }
    const swarm_bounds<D>& bounds() const noexcept { return bounds_; }
    const pso_coefficients& coefficients() const noexcept { return coefficients_; }
    const point<D>& global_best_position() const noexcept { return global_best_position_; }
    double global_best_fitness() const noexcept { return global_best_fitness_; }
    const rng& generator() const noexcept { return gen_; }

    /// Place particle j explicitly (clamped into bounds); its best is reset.
    void place(std::size_t j, const point<D>& position, const point<D>& velocity = {}) {
        auto& p = particles_.at(j);
        p.position = position;
        p.velocity = velocity;
        clamp(p);
        p.best_position = p.position;
        p.best_fitness = std::numeric_limits<double>::infinity();
        p.evaluated = false;
        recompute_global_best();
    }

    /// Record fitness of particle j at its current position. Strict
    /// improvement is required; NaN and +inf never improve.
    void update_bests(std::size_t j, double fitness) {
        auto& p = particles_.at(j);
        p.evaluated = true;
        if (fitness < p.best_fitness) {
            p.best_fitness = fitness;
            p.best_position = p.position;
        }
        if (fitness < global_best_fitness_) {
            global_best_fitness_ = fitness;
            global_best_position_ = p.position;
        }
    }

    void step() {
        for (const auto& p : particles_)
            if (!p.evaluated) throw std::logic_error("pso step before every particle was evaluated");
        for (auto& p : particles_) {
            double r1 = gen_.uniform();
            double r2 = gen_.uniform();
            for (std::size_t d = 0; d < D; ++d) {
                if (coefficients_.per_dimension_random && d > 0) {
                    r1 = gen_.uniform();
                    r2 = gen_.uniform();
                }
                p.velocity[d] = coefficients_.w * p.velocity[d] +
                                coefficients_.c1 * r1 * (p.best_position[d] - p.position[d]) +
                                coefficients_.c2 * r2 * (global_best_position_[d] - p.position[d]);
            }
            clamp_velocity(p);
            for (std::size_t d = 0; d < D; ++d) p.position[d] += p.velocity[d];
            clamp(p);
        }
    }

    bool within_bounds() const noexcept {
        for (const auto& p : particles_)
            for (std::size_t d = 0; d < D; ++d) {
                if (p.position[d] < bounds_.lower[d] || p.position[d] > bounds_.upper[d]) return false;
                if (std::abs(p.velocity[d]) > bounds_.velocity_max[d]) return false;
            }
        return true;
    }

    // Resume file: versioned header, coefficients, generator state, bounds,
    // global best and every particle, all decimals round-trip precise.
    void save(std::ostream& out) const {
        auto row = [&](const point<D>& v) {
            for (std::size_t d = 0; d < D; ++d) out << (d ? " " : "") << format_round_trip(v[d]);
            out << '\n';
        };
        out << "npalf-swarm 1\n" << D << ' ' << particles_.size() << '\n';
        out << format_round_trip(coefficients_.w) << ' ' << format_round_trip(coefficients_.c1) << ' '
            << format_round_trip(coefficients_.c2) << ' ' << (coefficients_.per_dimension_random ? 1 : 0) << '\n';
        const auto& s = gen_.state();
        out << s[0] << ' ' << s[1] << ' ' << s[2] << ' ' << s[3] << '\n';
        row(bounds_.lower);
        row(bounds_.upper);
        row(bounds_.velocity_max);
        out << format_round_trip(global_best_fitness_) << '\n';
        row(global_best_position_);
        for (const auto& p : particles_) {
            out << (p.evaluated ? 1 : 0) << ' ' << format_round_trip(p.best_fitness) << '\n';
            row(p.position);
            row(p.velocity);
            row(p.best_position);
        }
    }

    static swarm load(std::istream& in) {
        std::string magic;
        int version = 0;
        std::size_t dim = 0, count = 0;
        if (!(in >> magic >> version) || magic != "npalf-swarm" || version != 1)
            throw data_error("swarm file: unsupported header");
        if (!(in >> dim >> count) || dim != D || count < 2) throw data_error("swarm file: dimension mismatch");

        std::string token;
        auto number = [&]() {
            double v = 0.0;
            if (!(in >> token) || !detail::parse_double(token, v)) throw data_error("swarm file: malformed number");
            return v;
        };
        auto read_point = [&]() {
            point<D> v{};
            for (auto& x : v) x = number();
            return v;
        };

        swarm out;
        out.coefficients_.w = number();
        out.coefficients_.c1 = number();
        out.coefficients_.c2 = number();
        int per_dim = 0;
        rng::state_type state{};
        if (!(in >> per_dim >> state[0] >> state[1] >> state[2] >> state[3]))
            throw data_error("swarm file: malformed generator state");
        out.coefficients_.per_dimension_random = per_dim != 0;
        out.gen_ = rng::from_state(state);
        out.bounds_.lower = read_point();
        out.bounds_.upper = read_point();
        out.bounds_.velocity_max = read_point();
        out.bounds_.validate();
        out.global_best_fitness_ = number();
        out.global_best_position_ = read_point();
        out.particles_.resize(count);
        for (auto& p : out.particles_) {
            int evaluated = 0;
            if (!(in >> evaluated)) throw data_error("swarm file: truncated particle");
            p.evaluated = evaluated != 0;
            p.best_fitness = number();
            p.position = read_point();
            p.velocity = read_point();
            p.best_position = read_point();
        }
        return out;
    }

    friend bool operator==(const swarm& a, const swarm& b) {
        auto same_particle = [](const particle<D>& p, const particle<D>& q) {
            return p.position == q.position && p.velocity == q.velocity && p.best_position == q.best_position &&
                   (p.best_fitness == q.best_fitness) && p.evaluated == q.evaluated;
        };
        if (a.particles_.size() != b.particles_.size()) return false;
        for (std::size_t j = 0; j < a.particles_.size(); ++j)
            if (!same_particle(a.particles_[j], b.particles_[j])) return false;
        return a.bounds_.lower == b.bounds_.lower && a.bounds_.upper == b.bounds_.upper &&
               a.bounds_.velocity_max == b.bounds_.velocity_max && a.coefficients_.w == b.coefficients_.w &&
               a.coefficients_.c1 == b.coefficients_.c1 && a.coefficients_.c2 == b.coefficients_.c2 &&
               a.coefficients_.per_dimension_random == b.coefficients_.per_dimension_random &&
               a.gen_.state() == b.gen_.state() && a.global_best_position_ == b.global_best_position_ &&
               a.global_best_fitness_ == b.global_best_fitness_;
    }

private:
    swarm() : gen_(0) {}

    void clamp_velocity(particle<D>& p) const noexcept {
        for (std::size_t d = 0; d < D; ++d)
            p.velocity[d] = std::fmin(bounds_.velocity_max[d], std::fmax(-bounds_.velocity_max[d], p.velocity[d]));
    }

    void clamp(particle<D>& p) const noexcept {
        clamp_velocity(p);
        for (std::size_t d = 0; d < D; ++d)
            p.position[d] = std::fmin(bounds_.upper[d], std::fmax(bounds_.lower[d], p.position[d]));
    }

    void recompute_global_best() {
        global_best_fitness_ = std::numeric_limits<double>::infinity();
        global_best_position_ = particles_.front().best_position;
        for (const auto& p : particles_)
            if (p.best_fitness < global_best_fitness_) {
                global_best_fitness_ = p.best_fitness;
                global_best_position_ = p.best_position;
            }
    }

    swarm_bounds<D> bounds_{};
    pso_coefficients coefficients_{};
    rng gen_;
    std::vector<particle<D>> particles_;
    point<D> global_best_position_{};
    double global_best_fitness_ = std::numeric_limits<double>::infinity();
};

template <std::size_t D>
swarm<D> init_swarm(std::size_t size, const swarm_bounds<D>& bounds, const pso_coefficients& coefficients,
                    std::uint64_t seed) {
    return swarm<D>(size, bounds, coefficients, seed);
}

}  // namespace npalf
