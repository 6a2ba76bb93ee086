#pragma once

// Latent factor model R^ = X Y^T over dense row-major factor matrices, with
// the regularized objective and the RMSE/MAE metrics.

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "npalf/errors.hpp"
#include "npalf/hdi_data.hpp"
#include "npalf/random.hpp"

namespace npalf {

class factor_model {
public:
    factor_model() = default;

    factor_model(std::size_t users, std::size_t items, std::size_t rank)
        : users_(users), items_(items), rank_(rank), x_(users * rank, 0.0), y_(items * rank, 0.0) {
        if (users == 0 || items == 0 || rank == 0) throw config_error("factor model dimensions must be >= 1");
    }

    std::size_t users() const noexcept { return users_; }
    std::size_t items() const noexcept { return items_; }
    std::size_t rank() const noexcept { return rank_; }
    std::uint64_t seed() const noexcept { return seed_; }
    void set_seed(std::uint64_t seed) noexcept { seed_ = seed; }

    std::span<double> user_row(std::size_t m) { return {x_.data() + m * rank_, rank_}; }
    std::span<const double> user_row(std::size_t m) const { return {x_.data() + m * rank_, rank_}; }
    std::span<double> item_row(std::size_t n) { return {y_.data() + n * rank_, rank_}; }
    std::span<const double> item_row(std::size_t n) const { return {y_.data() + n * rank_, rank_}; }

    std::span<double> user_factors() noexcept { return x_; }
    std::span<const double> user_factors() const noexcept { return x_; }
    std::span<double> item_factors() noexcept { return y_; }
    std::span<const double> item_factors() const noexcept { return y_; }

    /// <x_m, y_n>
    double predict(std::size_t m, std::size_t n) const {
        if (m >= users_ || n >= items_)
            throw std::out_of_range("predict: index (" + std::to_string(m) + ", " + std::to_string(n) + ") out of range");
        return dot(user_row(m), item_row(n));
    }

    double instant_error(const rating_triple& t) const { return t.value - predict(t.user, t.item); }

    bool all_finite() const noexcept {
        for (double v : x_)
            if (!std::isfinite(v)) return false;
        for (double v : y_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    /// Shapes must match; used by rollback and checkpointing.
    void assign_from(const factor_model& other) {
        x_ = other.x_;
        y_ = other.y_;
    }

    friend bool operator==(const factor_model&, const factor_model&) = default;

    static double dot(std::span<const double> a, std::span<const double> b) noexcept {
        double s = 0.0;
        for (std::size_t d = 0; d < a.size(); ++d) s += a[d] * b[d];
        return s;
    }

private:
    std::size_t users_ = 0;
    std::size_t items_ = 0;
    std::size_t rank_ = 0;
    std::uint64_t seed_ = 0;
    std::vector<double> x_;
    std::vector<double> y_;
};

/// Learning rate, regularization and their merged product phi = eta * lambda.
struct hyperparams {
    double eta = 0.04;
    double lambda = 0.05;

    hyperparams() = default;
    hyperparams(double eta_, double lambda_) : eta(eta_), lambda(lambda_) {
        if (!(eta > 0.0) || !std::isfinite(eta)) throw config_error("eta must be > 0");
        if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw config_error("lambda must be >= 0");
    }

    double phi() const noexcept { return eta * lambda; }
};

/// Every factor drawn uniformly from (0, scale].
inline factor_model init_factors(std::size_t users, std::size_t items, std::size_t rank, std::uint64_t seed,
                                 double scale = 0.05) {
    if (!(scale > 0.0)) throw config_error("init scale must be > 0");
    factor_model model(users, items, rank);
    model.set_seed(seed);
    rng gen(seed, streams::factors);
    for (double& v : model.user_factors()) v = scale * (1.0 - gen.uniform());
    for (double& v : model.item_factors()) v = scale * (1.0 - gen.uniform());
    return model;
}

namespace detail {

inline void require_entries(std::span<const rating_triple> entries, const char* what) {
    if (entries.empty()) throw data_error(std::string(what) + ": empty entry set");
}

inline double squared_norm(std::span<const double> v) noexcept {
    double s = 0.0;
    for (double a : v) s += a * a;
    return s;
}

}  // namespace detail

/// 1/2 * sum((r - r^)^2 + lambda*|x_m|^2 + lambda*|y_n|^2)
inline double objective(const factor_model& model, std::span<const rating_triple> entries, double lambda) {
    detail::require_entries(entries, "objective");
    double total = 0.0;
    for (const auto& t : entries) {
        const double e = model.instant_error(t);
        total += e * e + lambda * detail::squared_norm(model.user_row(t.user)) +
                 lambda * detail::squared_norm(model.item_row(t.item));
    }
    return 0.5 * total;
}

inline double rmse(const factor_model& model, std::span<const rating_triple> entries) {
    detail::require_entries(entries, "rmse");
    double sum = 0.0;
    for (const auto& t : entries) {
        const double e = model.instant_error(t);
        sum += e * e;
    }
    return std::sqrt(sum / static_cast<double>(entries.size()));
}

inline double mae(const factor_model& model, std::span<const rating_triple> entries) {
    detail::require_entries(entries, "mae");
    double sum = 0.0;
    for (const auto& t : entries) sum += std::abs(model.instant_error(t));
    return sum / static_cast<double>(entries.size());
}

/// Checkpoint: header "M N f seed", then M user rows and N item rows of f
/// values in shortest round-trip decimal form.
inline void save_checkpoint(std::ostream& out, const factor_model& model) {
    out << model.users() << ' ' << model.items() << ' ' << model.rank() << ' ' << model.seed() << '\n';
    auto write_rows = [&](std::span<const double> data) {
        for (std::size_t r = 0; r < data.size() / model.rank(); ++r) {
            for (std::size_t d = 0; d < model.rank(); ++d) {
                if (d) out << ' ';
                out << format_round_trip(data[r * model.rank() + d]);
            }
            out << '\n';
        }
    };
    write_rows(model.user_factors());
    write_rows(model.item_factors());
}

inline factor_model load_checkpoint(std::istream& in) {
    std::size_t users = 0, items = 0, rank = 0;
    std::uint64_t seed = 0;
    if (!(in >> users >> items >> rank >> seed)) throw data_error("checkpoint: malformed header");
    factor_model model(users, items, rank);
    model.set_seed(seed);
    auto read_values = [&](std::span<double> data) {
        std::string token;
        for (double& v : data) {
            if (!(in >> token) || !detail::parse_double(token, v))
                throw data_error("checkpoint: truncated or malformed factor data");
        }
    };
    read_values(model.user_factors());
    read_values(model.item_factors());
    return model;
}

}  // namespace npalf
