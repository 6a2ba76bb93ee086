#pragma once

// One-epoch training passes for the compared learning schemes: plain SGD,
// linear PID-SGD, NPID-SGD with fixed gains, and the per-coordinate adaptive
// rules Adam, AdaDelta and RMSprop.
//
// All passes visit the training entries in the given order. For each entry
// the error is computed once from the current factors, then x_m and y_n are
// updated from each other's pre-update values.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "npalf/errors.hpp"
#include "npalf/factor_model.hpp"
#include "npalf/hdi_data.hpp"
#include "npalf/npid_controller.hpp"
#include "npalf/random.hpp"

namespace npalf {

enum class optimizer_kind { sgd, pid_sgd, npid_sgd, npalf, adam, adadelta, rmsprop };

inline optimizer_kind parse_optimizer_kind(std::string_view name) {
    if (name == "sgd") return optimizer_kind::sgd;
    if (name == "pid" || name == "pid-sgd") return optimizer_kind::pid_sgd;
    if (name == "npid" || name == "npid-sgd") return optimizer_kind::npid_sgd;
    if (name == "npalf") return optimizer_kind::npalf;
    if (name == "adam") return optimizer_kind::adam;
    if (name == "adadelta") return optimizer_kind::adadelta;
    if (name == "rmsprop") return optimizer_kind::rmsprop;
    throw config_error("unknown optimizer '" + std::string(name) + "'");
}

inline const char* optimizer_name(optimizer_kind kind) noexcept {
    switch (kind) {
        case optimizer_kind::sgd: return "sgd";
        case optimizer_kind::pid_sgd: return "pid";
        case optimizer_kind::npid_sgd: return "npid";
        case optimizer_kind::npalf: return "npalf";
        case optimizer_kind::adam: return "adam";
        case optimizer_kind::adadelta: return "adadelta";
        case optimizer_kind::rmsprop: return "rmsprop";
    }
    return "?";
}

/// Visit order for training passes: either the training-list order every
/// pass, or a fresh seeded shuffle per pass.
class visit_order {
public:
    visit_order(std::size_t size, bool shuffled, std::uint64_t seed)
        : perm_(size), shuffled_(shuffled), gen_(seed, streams::visit_order) {
        std::iota(perm_.begin(), perm_.end(), std::size_t{0});
    }

    std::span<const std::size_t> next() {
        if (shuffled_) shuffle(std::span<std::size_t>(perm_), gen_);
        return perm_;
    }

private:
    std::vector<std::size_t> perm_;
    bool shuffled_;
    rng gen_;
};

namespace detail {

inline void check_rows(std::span<const double> x, std::span<const double> y, std::size_t entry) {
    for (double v : x)
        if (!std::isfinite(v)) throw divergence_error(entry);
    for (double v : y)
        if (!std::isfinite(v)) throw divergence_error(entry);
}

/// x <- x + eta * (err * y - lambda * x), y likewise with the old x.
inline void regularized_step(factor_model& model, const rating_triple& t, double err, double eta, double lambda,
                             std::size_t entry) {
    auto x = model.user_row(t.user);
    auto y = model.item_row(t.item);
    for (std::size_t d = 0; d < x.size(); ++d) {
        const double x_old = x[d];
        x[d] = x_old + eta * (err * y[d] - lambda * x_old);
        y[d] = y[d] + eta * (err * x_old - lambda * y[d]);
    }
    check_rows(x, y, entry);
}

inline void validate_order(std::span<const std::size_t> order, std::size_t train_size) {
    if (order.size() != train_size) throw config_error("visit order must be a permutation of the training entries");
}

}  // namespace detail

inline void sgd_epoch(factor_model& model, std::span<const rating_triple> train, double eta, double lambda,
                      std::span<const std::size_t> order) {
    detail::validate_order(order, train.size());
    for (std::size_t i : order) {
        const auto& t = train[i];
        detail::regularized_step(model, t, model.instant_error(t), eta, lambda, i);
    }
}

struct pid_gains {
    double kp = 1.0;
    double ki = 0.01;
    double kd = 0.01;
};

/// SGD with the instant error replaced by kp*e + ki*sum(e) + kd*(e - e_prev).
inline void pid_sgd_epoch(factor_model& model, controller_bank& bank, std::span<const rating_triple> train,
                          double eta, double lambda, const pid_gains& gains, std::span<const std::size_t> order,
                          const controller_options& options = {}) {
    detail::validate_order(order, train.size());
    if (bank.size() != train.size()) throw config_error("controller bank size must equal the training set size");
    for (std::size_t i : order) {
        const auto& t = train[i];
        const double refined = bank.refine_linear(i, model.instant_error(t), gains.kp, gains.ki, gains.kd, options);
        detail::regularized_step(model, t, refined, eta, lambda, i);
    }
}

/// SGD with the instant error rebuilt by the nonlinear PID controller.
inline void npid_sgd_epoch(factor_model& model, controller_bank& bank, std::span<const rating_triple> train,
                           double eta, double lambda, const npid_gains& gains, std::span<const std::size_t> order,
                           const controller_options& options = {}) {
    detail::validate_order(order, train.size());
    if (bank.size() != train.size()) throw config_error("controller bank size must equal the training set size");
    for (std::size_t i : order) {
        const auto& t = train[i];
        const double refined = bank.refine(i, model.instant_error(t), gains, options);
        detail::regularized_step(model, t, refined, eta, lambda, i);
    }
}

// ---------------------------------------------------------------------------
// Adaptive per-coordinate rules.

enum class adaptive_kind { adam, adadelta, rmsprop };

struct adaptive_params {
    adaptive_kind kind = adaptive_kind::adam;
    double learning_rate = 0.01;  // unused by AdaDelta
    double beta1 = 0.9;           // Adam
    double beta2 = 0.999;         // Adam
    double rho = 0.9;             // RMSprop / AdaDelta decay
    double epsilon = 1e-8;

    static adaptive_params defaults(adaptive_kind kind, double learning_rate) {
        adaptive_params p;
        p.kind = kind;
        p.learning_rate = learning_rate;
        switch (kind) {
            case adaptive_kind::adam: p.epsilon = 1e-8; break;
            case adaptive_kind::rmsprop: p.rho = 0.9; p.epsilon = 1e-8; break;
            case adaptive_kind::adadelta: p.rho = 0.95; p.epsilon = 1e-6; break;
        }
        return p;
    }

    void validate() const {
        auto unit = [](double v) { return v >= 0.0 && v < 1.0; };
        if (kind == adaptive_kind::adam && (!unit(beta1) || !unit(beta2)))
            throw config_error("Adam betas must lie in [0, 1)");
        if (kind != adaptive_kind::adam && !unit(rho)) throw config_error("rho must lie in [0, 1)");
        if (!(epsilon > 0.0)) throw config_error("epsilon must be > 0");
        if (kind != adaptive_kind::adadelta && !(learning_rate > 0.0)) throw config_error("learning rate must be > 0");
    }
};

/// Auxiliary accumulators shaped like X and Y. For Adam `first`/`second` are
/// the first/second moments; for RMSprop only `second` (mean squared
/// gradient) is used; for AdaDelta `first` is E[g^2] and `second` is E[dx^2].
/// Adam bias correction uses per-row update counts.
struct moment_state {
    std::vector<double> first_x, first_y, second_x, second_y;
    std::vector<std::uint64_t> user_steps, item_steps;

    moment_state() = default;
    explicit moment_state(const factor_model& model)
        : first_x(model.user_factors().size()), first_y(model.item_factors().size()),
          second_x(model.user_factors().size()), second_y(model.item_factors().size()),
          user_steps(model.users()), item_steps(model.items()) {}

    bool matches(const factor_model& model) const noexcept {
        return first_x.size() == model.user_factors().size() && first_y.size() == model.item_factors().size() &&
               user_steps.size() == model.users() && item_steps.size() == model.items();
    }
};

namespace detail {

/// Returns the parameter increment for gradient g and advances the accumulators.
inline double adaptive_increment(const adaptive_params& p, double g, double& first, double& second,
                                 std::uint64_t step) noexcept {
    switch (p.kind) {
        case adaptive_kind::adam: {
            first = p.beta1 * first + (1.0 - p.beta1) * g;
            second = p.beta2 * second + (1.0 - p.beta2) * g * g;
            const auto t = static_cast<double>(step);
            const double m_hat = first / (1.0 - std::pow(p.beta1, t));
            const double v_hat = second / (1.0 - std::pow(p.beta2, t));
            return -p.learning_rate * m_hat / (std::sqrt(v_hat) + p.epsilon);
        }
        case adaptive_kind::rmsprop: {
            second = p.rho * second + (1.0 - p.rho) * g * g;
            return -p.learning_rate * g / (std::sqrt(second) + p.epsilon);
        }
        case adaptive_kind::adadelta: {
            first = p.rho * first + (1.0 - p.rho) * g * g;
            const double delta = -std::sqrt(second + p.epsilon) / std::sqrt(first + p.epsilon) * g;
            second = p.rho * second + (1.0 - p.rho) * delta * delta;
            return delta;
        }
    }
    return 0.0;
}

}  // namespace detail

/// Gradients g_x = -(e*y - lambda*x), g_y = -(e*x - lambda*y) at the
/// pre-update factors, then one adaptive step per coordinate.
inline void adaptive_epoch(factor_model& model, moment_state& moments, std::span<const rating_triple> train,
                           const adaptive_params& params, double lambda, std::span<const std::size_t> order) {
    detail::validate_order(order, train.size());
    if (!moments.matches(model)) throw config_error("moment state shape does not match the factor model");
    const std::size_t f = model.rank();
    for (std::size_t i : order) {
        const auto& t = train[i];
        const double e = model.instant_error(t);
        auto x = model.user_row(t.user);
        auto y = model.item_row(t.item);
        const std::size_t xo = t.user * f;
        const std::size_t yo = t.item * f;
        const std::uint64_t user_step = ++moments.user_steps[t.user];
        const std::uint64_t item_step = ++moments.item_steps[t.item];
        for (std::size_t d = 0; d < f; ++d) {
            const double x_old = x[d];
            const double y_old = y[d];
            const double gx = -(e * y_old - lambda * x_old);
            const double gy = -(e * x_old - lambda * y_old);
            x[d] += detail::adaptive_increment(params, gx, moments.first_x[xo + d], moments.second_x[xo + d], user_step);
            y[d] += detail::adaptive_increment(params, gy, moments.first_y[yo + d], moments.second_y[yo + d], item_step);
        }
        detail::check_rows(x, y, i);
    }
}

}  // namespace npalf
