#pragma once

// NPALF: NPID-rebuilt SGD in merged form, with all ten control parameters
// self-adapted by a particle swarm.
//
// Merged update for one training entry (parameters already absorb eta):
//   x_m <- (1 - k_phi) * x_m + refined * y_n
//   y_n <- (1 - k_phi) * y_n + refined * x_m(old)
// where `refined` is the NPID controller output built from the nine k_* gains.
//
// One epoch runs one training pass per particle, sequentially, over the same
// model and controller bank. Each pass is scored on the validation entries
// and the swarm evolves once after all passes.

#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "npalf/errors.hpp"
#include "npalf/factor_model.hpp"
#include "npalf/npid_controller.hpp"
#include "npalf/optimizers.hpp"
#include "npalf/swarm.hpp"

namespace npalf {

inline constexpr std::size_t npalf_dimension = 10;
using npalf_position = point<npalf_dimension>;
using npalf_swarm = swarm<npalf_dimension>;

/// The ten eta-absorbed parameters, in particle-position order.
struct npalf_params {
    double k_phi = 0.002;
    double k_p1 = 0.04, k_p2 = 0.0, k_p3 = 0.0;
    double k_i1 = 0.0, k_i2 = 0.0;
    double k_d1 = 0.0, k_d2 = 0.0, k_d3 = 0.0, k_d4 = 0.0;

    npalf_position to_position() const noexcept {
        return {k_phi, k_p1, k_p2, k_p3, k_i1, k_i2, k_d1, k_d2, k_d3, k_d4};
    }

    static npalf_params from_position(const npalf_position& s) noexcept {
        return {s[0], s[1], s[2], s[3], s[4], s[5], s[6], s[7], s[8], s[9]};
    }

    /// The plain-SGD profile: k_phi = eta*lambda, k_p1 = eta, rest 0.
    static npalf_params sgd_equivalent(double eta, double lambda) noexcept {
        npalf_params p;
        p.k_phi = eta * lambda;
        p.k_p1 = eta;
        return p;
    }

    npid_gains gains() const noexcept { return {k_p1, k_p2, k_p3, k_i1, k_i2, k_d1, k_d2, k_d3, k_d4}; }

    void validate() const {
        if (!(k_phi >= 0.0 && k_phi < 1.0)) throw config_error("k_phi must lie in [0, 1)");
        gains().validate();
    }

    friend bool operator==(const npalf_params&, const npalf_params&) = default;
};

/// Default search box: k_phi [1e-4, 0.05], k_p1 [1e-4, 0.1], k_p2 [0, 0.1],
/// k_p3 [0, 1], k_i1 [0, 0.001], k_i2 [0, 1], k_d1 and k_d2 [0, 0.05],
/// k_d3 [0, 10], k_d4 [-1, 1]; velocity limit 1% of each range.
/// k_i1 stays small because the integral sum of every entry grows by one
/// observation per sub-iteration, i.e. J per epoch.
inline swarm_bounds<npalf_dimension> default_npalf_bounds() {
    const npalf_position lower{1e-4, 1e-4, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -1.0};
    const npalf_position upper{0.05, 0.1, 0.1, 1.0, 0.001, 1.0, 0.05, 0.05, 10.0, 1.0};
    return swarm_bounds<npalf_dimension>::from_positions(lower, upper, 0.01);
}

enum class fitness_kind { rmse, mae };

inline fitness_kind parse_fitness_kind(std::string_view name) {
    if (name == "rmse" || name == "F1") return fitness_kind::rmse;
    if (name == "mae" || name == "F2") return fitness_kind::mae;
    throw config_error("unknown fitness '" + std::string(name) + "' (expected rmse or mae)");
}

/// F1 = validation RMSE, F2 = validation MAE.
inline double fitness(const factor_model& model, std::span<const rating_triple> validation, fitness_kind kind) {
    return kind == fitness_kind::rmse ? rmse(model, validation) : mae(model, validation);
}

/// One training pass in merged form with fixed parameters.
inline void npalf_pass(factor_model& model, controller_bank& bank, std::span<const rating_triple> train,
                       const npalf_params& params, std::span<const std::size_t> order,
                       const controller_options& options = {}) {
    detail::validate_order(order, train.size());
    if (bank.size() != train.size()) throw config_error("controller bank size must equal the training set size");
    const npid_gains gains = params.gains();
    const double keep = 1.0 - params.k_phi;
    for (std::size_t i : order) {
        const auto& t = train[i];
        const double refined = bank.refine(i, model.instant_error(t), gains, options);
        auto x = model.user_row(t.user);
        auto y = model.item_row(t.item);
        for (std::size_t d = 0; d < x.size(); ++d) {
            const double x_old = x[d];
            x[d] = keep * x_old + refined * y[d];
            y[d] = keep * y[d] + refined * x_old;
        }
        detail::check_rows(x, y, i);
    }
}

struct npalf_epoch_report {
    std::vector<double> particle_fitness;  // +inf for a diverged sub-iteration
    std::size_t diverged = 0;
    double global_best_fitness = std::numeric_limits<double>::infinity();
    npalf_position global_best_position{};
};

/// One outer epoch: a sub-iteration per particle, then one swarm step.
/// `next_order` supplies the visit order of each sub-iteration. A diverged
/// sub-iteration restores the model and bank to their state before it and
/// scores +inf.
template <typename OrderSource>
npalf_epoch_report npalf_epoch(factor_model& model, controller_bank& bank, npalf_swarm& swarm,
                               std::span<const rating_triple> train, std::span<const rating_triple> validation,
                               OrderSource&& next_order, fitness_kind kind = fitness_kind::rmse,
                               const controller_options& options = {}) {
    if (validation.empty()) throw data_error("npalf epoch: empty validation set");
    npalf_epoch_report report;
    report.particle_fitness.reserve(swarm.size());

    factor_model model_snapshot = model;
    controller_bank bank_snapshot = bank;
    for (std::size_t j = 0; j < swarm.size(); ++j) {
        const npalf_params params = npalf_params::from_position(swarm[j].position);
        model_snapshot.assign_from(model);
        bank_snapshot = bank;

        double score = std::numeric_limits<double>::infinity();
        try {
            npalf_pass(model, bank, train, params, next_order(), options);
            score = fitness(model, validation, kind);
        } catch (const divergence_error&) {
        }
        if (!std::isfinite(score)) {
            model.assign_from(model_snapshot);
            bank = bank_snapshot;
            score = std::numeric_limits<double>::infinity();
            ++report.diverged;
        }
        swarm.update_bests(j, score);
        report.particle_fitness.push_back(score);
    }
    swarm.step();
    report.global_best_fitness = swarm.global_best_fitness();
    report.global_best_position = swarm.global_best_position();
    return report;
}

}  // namespace npalf
