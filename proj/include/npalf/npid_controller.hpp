#pragma once

// Nonlinear PID rebuilding of the per-entry instant error.
//
//   gain_p(e) = kp1 + kp2 * (1 - sech(kp3 * e))
//   gain_i(e) = ki1 * sech(ki2 * e)
//   gain_d(e) = kd1 + kd2 / (1 + kd3 * exp(kd4 * e))
//
//   refined = gain_p(e) * e + gain_i(e) * sum_{k<=t} e_k + gain_d(e) * (e - e_prev)
//
// Every training entry owns one controller state (integral sum and previous
// error). The integral accumulates raw errors, and the first derivative term
// uses e_prev = 0.

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "npalf/errors.hpp"

namespace npalf {

/// sech(x) = 2 / (e^x + e^-x), evaluated as 2 e^-|x| / (1 + e^-2|x|) so it
/// underflows to 0 instead of overflowing.
inline double sech_stable(double x) noexcept {
    const double t = std::exp(-std::abs(x));
    return 2.0 * t / (1.0 + t * t);
}

struct npid_gains {
    double kp1 = 1.0, kp2 = 0.0, kp3 = 0.0;
    double ki1 = 0.0, ki2 = 0.0;
    double kd1 = 0.0, kd2 = 0.0, kd3 = 0.0, kd4 = 0.0;

    void validate() const {
        for (double v : {kp1, kp2, kp3, ki1, ki2, kd1, kd2, kd3, kd4})
            if (!std::isfinite(v)) throw config_error("NPID gains must be finite");
        if (kd3 < 0.0) throw config_error("NPID gain kd3 must be >= 0");
    }

    friend bool operator==(const npid_gains&, const npid_gains&) = default;
};

inline double gain_p(double e, const npid_gains& g) noexcept { return g.kp1 + g.kp2 * (1.0 - sech_stable(g.kp3 * e)); }

inline double gain_i(double e, const npid_gains& g) noexcept { return g.ki1 * sech_stable(g.ki2 * e); }

inline double gain_d(double e, const npid_gains& g) noexcept {
    // kd3 == 0 must not meet an overflowed exp (0 * inf).
    if (g.kd3 == 0.0) return g.kd1 + g.kd2;
    return g.kd1 + g.kd2 / (1.0 + g.kd3 * std::exp(g.kd4 * e));
}

struct entry_controller_state {
    double integral_sum = 0.0;
    double prev_error = 0.0;
    std::uint64_t observations = 0;

    friend bool operator==(const entry_controller_state&, const entry_controller_state&) = default;
};

/// Optional symmetric anti-windup bound on the integral sum. Off by default.
struct controller_options {
    std::optional<double> integral_clamp;
};

struct refine_result {
    double refined = 0.0;
    entry_controller_state state;
};

inline refine_result refine_error(const entry_controller_state& state, double e, const npid_gains& gains,
                                  const controller_options& options = {}) noexcept {
    refine_result out;
    out.state.integral_sum = state.integral_sum + e;
    if (options.integral_clamp) {
        const double bound = *options.integral_clamp;
        out.state.integral_sum = std::fmin(bound, std::fmax(-bound, out.state.integral_sum));
    }
    out.state.prev_error = e;
    out.state.observations = state.observations + 1;
    out.refined = gain_p(e, gains) * e + gain_i(e, gains) * out.state.integral_sum +
                  gain_d(e, gains) * (e - state.prev_error);
    return out;
}

/// One controller state per training entry, indexed like the training list.
class controller_bank {
public:
    controller_bank() = default;
    explicit controller_bank(std::size_t train_size) : states_(train_size) {}

    std::size_t size() const noexcept { return states_.size(); }
    const entry_controller_state& operator[](std::size_t i) const { return states_[i]; }

    /// Refine `e` for training entry `i` and advance that entry's state.
    /// Throws divergence_error when the refined error is not finite.
    double refine(std::size_t i, double e, const npid_gains& gains, const controller_options& options = {}) {
        const refine_result r = refine_error(states_[i], e, gains, options);
        if (!std::isfinite(r.refined) || !std::isfinite(r.state.integral_sum)) throw divergence_error(i);
        states_[i] = r.state;
        return r.refined;
    }

    /// Linear discrete PID on the same state layout: kp*e + ki*sum + kd*delta.
    double refine_linear(std::size_t i, double e, double kp, double ki, double kd,
                         const controller_options& options = {}) {
        const npid_gains linear{kp, 0.0, 0.0, ki, 0.0, kd, 0.0, 0.0, 0.0};
        return refine(i, e, linear, options);
    }

    friend bool operator==(const controller_bank&, const controller_bank&) = default;

private:
    std::vector<entry_controller_state> states_;
};

}  // namespace npalf
