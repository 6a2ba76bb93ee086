#pragma once

// End-to-end training runs: epoch loop with termination rules, best-model
// checkpointing, cross-validation, the optimizer comparison bench and CSV
// emission of convergence curves and summaries.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "npalf/adaptive_lfa.hpp"
#include "npalf/errors.hpp"
#include "npalf/factor_model.hpp"
#include "npalf/hdi_data.hpp"
#include "npalf/npid_controller.hpp"
#include "npalf/optimizers.hpp"

namespace npalf {

/// Fixed NPID gains used by the `npid` optimizer unless overridden.
inline npid_gains default_npid_gains() {
    npid_gains g;
    g.kp1 = 1.0;
    g.kp2 = 1.0;
    g.kp3 = 1.0;
    g.ki1 = 3e-4;
    g.ki2 = 2.0;
    g.kd1 = 0.05;
    g.kd2 = 0.05;
    g.kd3 = 1.0;
    g.kd4 = 1.0;
    return g;
}

struct run_config {
    std::string data_path;
    rating_format format = rating_format::tsv;
    optimizer_kind optimizer = optimizer_kind::sgd;
    std::size_t rank = 20;
    double eta = 0.04;
    double lambda = 0.05;
    std::uint64_t seed = 1;
    std::size_t max_epochs = 1000;
    double tol = 1e-5;
    split_ratio split{};
    std::size_t folds = 0;  // 0: one split by `split`
    std::size_t repeats = 1;
    double init_scale = 0.05;
    bool shuffle = true;
    bool timing = true;  // false: seconds columns are written as 0
    std::string out_dir;

    pid_gains pid{};
    npid_gains npid = default_npid_gains();
    controller_options controller{};

    // Adaptive baselines. Unset values take the per-kind defaults; the
    // learning rate defaults to eta.
    std::optional<double> adaptive_lr;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    std::optional<double> rho;
    std::optional<double> epsilon;

    // NPALF swarm.
    std::size_t swarm_size = 8;
    fitness_kind fitness = fitness_kind::rmse;
    pso_coefficients pso{};
    swarm_bounds<npalf_dimension> bounds = default_npalf_bounds();

    void validate() const {
        if (max_epochs < 1) throw config_error("max_epochs must be >= 1");
        if (!(tol > 0.0)) throw config_error("tol must be > 0");
        if (rank < 1) throw config_error("rank must be >= 1");
        hyperparams(eta, lambda);
        if (!(init_scale > 0.0)) throw config_error("init scale must be > 0");
        if (folds != 0 && repeats < 1) throw config_error("repeats must be >= 1");
        if (split.train == 0 || split.validation == 0 || split.test == 0)
            throw config_error("split weights must all be positive");
        if (controller.integral_clamp && !(*controller.integral_clamp > 0.0))
            throw config_error("integral clamp must be > 0");
        npid.validate();
        if (optimizer == optimizer_kind::npalf) {
            if (swarm_size < 2) throw config_error("swarm size must be >= 2");
            bounds.validate();
        }
        if (optimizer == optimizer_kind::adam || optimizer == optimizer_kind::adadelta ||
            optimizer == optimizer_kind::rmsprop)
            adaptive(optimizer).validate();
    }

    adaptive_params adaptive(optimizer_kind kind) const {
        const adaptive_kind ak = kind == optimizer_kind::adam       ? adaptive_kind::adam
                                 : kind == optimizer_kind::adadelta ? adaptive_kind::adadelta
                                                                    : adaptive_kind::rmsprop;
        adaptive_params p = adaptive_params::defaults(ak, adaptive_lr.value_or(eta));
        p.beta1 = adam_beta1;
        p.beta2 = adam_beta2;
        if (rho) p.rho = *rho;
        if (epsilon) p.epsilon = *epsilon;
        return p;
    }
};

struct epoch_record {
    std::size_t epoch = 0;  // 1-based
    double train_rmse = 0.0;
    double valid_rmse = 0.0;
    double seconds = 0.0;  // cumulative
    std::optional<double> best_fitness;  // NPALF only
    std::optional<npalf_position> best_position;
};

enum class termination { converged, max_epochs, diverged };

inline const char* termination_name(termination t) noexcept {
    switch (t) {
        case termination::converged: return "converged";
        case termination::max_epochs: return "max_epochs";
        case termination::diverged: return "diverged";
    }
    return "?";
}

struct run_summary {
    std::string optimizer;
    std::string label;  // fold or run name
    double lowest_valid_rmse = std::numeric_limits<double>::quiet_NaN();
    std::size_t best_epoch = 0;
    double test_rmse = std::numeric_limits<double>::quiet_NaN();
    double total_seconds = 0.0;
    std::size_t epochs = 0;
    termination reason = termination::max_epochs;
    std::string diagnostic;
};

struct run_result {
    run_summary summary;
    std::vector<epoch_record> records;
    factor_model best_model;
    std::vector<std::string> warnings;
};

namespace detail {

class stopwatch {
public:
    explicit stopwatch(bool enabled) : enabled_(enabled), start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        if (!enabled_) return 0.0;
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    bool enabled_;
    std::chrono::steady_clock::time_point start_;
};

}  // namespace detail

/// Train one split. Only `train` and `validation` are read during training;
/// `evaluate_test(best_model)` is called exactly once, after the loop, on the
/// model from the lowest-validation-RMSE epoch.
///
/// Stops when |valid_rmse(t) - valid_rmse(t-1)| < tol, at max_epochs, or on
/// divergence.
template <typename TestEvaluator>
run_result train_split(const run_config& cfg, std::size_t users, std::size_t items,
                       std::span<const rating_triple> train, std::span<const rating_triple> validation,
                       TestEvaluator&& evaluate_test) {
    cfg.validate();
    if (train.empty() || validation.empty()) throw data_error("training and validation sets must be non-empty");

    run_result result;
    result.summary.optimizer = optimizer_name(cfg.optimizer);
    if (cfg.rank >= std::min(users, items))
        result.warnings.push_back("rank " + std::to_string(cfg.rank) + " is not small relative to min(M, N) = " +
                                  std::to_string(std::min(users, items)));

    factor_model model = init_factors(users, items, cfg.rank, cfg.seed, cfg.init_scale);
    result.best_model = model;
    controller_bank bank(train.size());
    moment_state moments(model);
    visit_order order(train.size(), cfg.shuffle, cfg.seed);
    std::optional<npalf_swarm> swarm;
    if (cfg.optimizer == optimizer_kind::npalf) swarm.emplace(cfg.swarm_size, cfg.bounds, cfg.pso, cfg.seed);
    const adaptive_params adaptive = cfg.adaptive(cfg.optimizer);

    detail::stopwatch clock(cfg.timing);
    double lowest = std::numeric_limits<double>::infinity();
    termination reason = termination::max_epochs;

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        epoch_record rec;
        rec.epoch = epoch;
        try {
            switch (cfg.optimizer) {
                case optimizer_kind::sgd: sgd_epoch(model, train, cfg.eta, cfg.lambda, order.next()); break;
                case optimizer_kind::pid_sgd:
                    pid_sgd_epoch(model, bank, train, cfg.eta, cfg.lambda, cfg.pid, order.next(), cfg.controller);
                    break;
                case optimizer_kind::npid_sgd:
                    npid_sgd_epoch(model, bank, train, cfg.eta, cfg.lambda, cfg.npid, order.next(), cfg.controller);
                    break;
                case optimizer_kind::npalf: {
                    const auto report = npalf_epoch(model, bank, *swarm, train, validation,
                                                    [&] { return order.next(); }, cfg.fitness, cfg.controller);
                    if (report.diverged == swarm->size()) throw divergence_error(train.size());
                    rec.best_fitness = report.global_best_fitness;
                    rec.best_position = report.global_best_position;
                    break;
                }
                case optimizer_kind::adam:
                case optimizer_kind::adadelta:
                case optimizer_kind::rmsprop:
                    adaptive_epoch(model, moments, train, adaptive, cfg.lambda, order.next());
                    break;
            }
        } catch (const divergence_error& e) {
            reason = termination::diverged;
            result.summary.diagnostic = std::string("epoch ") + std::to_string(epoch) + ": " + e.what();
            break;
        }
        if (!model.all_finite()) {
            reason = termination::diverged;
            result.summary.diagnostic = "epoch " + std::to_string(epoch) + ": non-finite factors";
            break;
        }
        rec.train_rmse = rmse(model, train);
        rec.valid_rmse = rmse(model, validation);
        rec.seconds = clock.seconds();
        if (!std::isfinite(rec.train_rmse) || !std::isfinite(rec.valid_rmse)) {
            reason = termination::diverged;
            result.summary.diagnostic = "epoch " + std::to_string(epoch) + ": non-finite RMSE";
            break;
        }
        result.records.push_back(rec);

        if (rec.valid_rmse < lowest) {
            lowest = rec.valid_rmse;
            result.summary.best_epoch = epoch;
            result.best_model.assign_from(model);
        }
        if (result.records.size() >= 2 &&
            std::abs(rec.valid_rmse - result.records[result.records.size() - 2].valid_rmse) < cfg.tol) {
            reason = termination::converged;
            break;
        }
    }

    result.summary.reason = reason;
    result.summary.epochs = result.records.size();
    result.summary.total_seconds = result.records.empty() ? clock.seconds() : result.records.back().seconds;
    if (!result.records.empty()) result.summary.lowest_valid_rmse = lowest;
    result.summary.test_rmse = evaluate_test(static_cast<const factor_model&>(result.best_model));
    return result;
}

/// Train on a prepared split of `ds`.
inline run_result train(const run_config& cfg, const hdi_dataset& ds, const data_split& split) {
    const auto train_set = select_entries(ds, split.train);
    const auto valid_set = select_entries(ds, split.validation);
    const auto test_set = select_entries(ds, split.test);
    return train_split(cfg, ds.users, ds.items, train_set, valid_set,
                       [&](const factor_model& best) { return rmse(best, test_set); });
}

/// Train on `ds` with the configured single split.
inline run_result train(const run_config& cfg, const hdi_dataset& ds) {
    return train(cfg, ds, split_dataset(ds, cfg.split, cfg.seed));
}

inline hdi_dataset load_dataset(const std::string& path, rating_format format) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open '" + path + "'");
    return parse_ratings(in, format);
}

/// Load `cfg.data_path` and train on the configured single split.
inline run_result train(const run_config& cfg) { return train(cfg, load_dataset(cfg.data_path, cfg.format)); }

// ---------------------------------------------------------------------------
// Cross-validation.

struct mean_std {
    double mean = 0.0;
    double std = 0.0;  // population
};

inline mean_std population_mean_std(std::span<const double> values) {
    mean_std out;
    if (values.empty()) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
    for (double v : values) out.mean += v;
    out.mean /= static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(ss / static_cast<double>(values.size()));
    return out;
}

struct cv_aggregate {
    std::size_t runs = 0;
    mean_std lowest_valid_rmse;
    mean_std test_rmse;
    mean_std seconds;
};

inline cv_aggregate aggregate(std::span<const run_summary> summaries) {
    std::vector<double> valid, test, secs;
    for (const auto& s : summaries) {
        valid.push_back(s.lowest_valid_rmse);
        test.push_back(s.test_rmse);
        secs.push_back(s.total_seconds);
    }
    return {summaries.size(), population_mean_std(valid), population_mean_std(test), population_mean_std(secs)};
}

struct cv_result {
    std::vector<run_result> runs;          // every split, including failed ones
    std::vector<run_summary> included;     // non-failed runs used in the aggregate
    cv_aggregate summary;
    std::vector<std::string> warnings;
};

/// One train() per k-fold split; diverged or failed splits are reported and
/// left out of the aggregate.
inline cv_result cross_validate(const run_config& cfg, const hdi_dataset& ds) {
    cfg.validate();
    if (cfg.folds == 0) throw config_error("cross-validation needs folds >= 3");
    const auto splits = k_fold_partitions(ds, cfg.folds, cfg.repeats, cfg.seed, cfg.split);
    cv_result out;
    for (std::size_t s = 0; s < splits.size(); ++s) {
        const std::string label = "r" + std::to_string(s / cfg.folds + 1) + "f" + std::to_string(s % cfg.folds + 1);
        try {
            run_result r = train(cfg, ds, splits[s]);
            r.summary.label = label;
            if (r.summary.reason == termination::diverged || r.records.empty())
                out.warnings.push_back("split " + label + " diverged and is excluded: " + r.summary.diagnostic);
            else
                out.included.push_back(r.summary);
            out.runs.push_back(std::move(r));
        } catch (const std::exception& e) {
            out.warnings.push_back("split " + label + " failed and is excluded: " + e.what());
            run_result failed;
            failed.summary.optimizer = optimizer_name(cfg.optimizer);
            failed.summary.label = label;
            failed.summary.reason = termination::diverged;
            failed.summary.diagnostic = e.what();
            out.runs.push_back(std::move(failed));
        }
    }
    out.summary = aggregate(out.included);
    return out;
}

// ---------------------------------------------------------------------------
// CSV output (10 significant digits).

inline std::string format_sig10(double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", value);
    return buf;
}

inline void write_curve_csv(std::ostream& out, std::span<const epoch_record> records, bool with_fitness) {
    out << "epoch,train_rmse,valid_rmse,seconds" << (with_fitness ? ",best_fitness" : "") << '\n';
    for (const auto& r : records) {
        out << r.epoch << ',' << format_sig10(r.train_rmse) << ',' << format_sig10(r.valid_rmse) << ','
            << format_sig10(r.seconds);
        if (with_fitness) out << ',' << format_sig10(r.best_fitness.value_or(std::numeric_limits<double>::quiet_NaN()));
        out << '\n';
    }
}

inline void write_summary_csv(std::ostream& out, std::span<const run_summary> summaries) {
    out << "optimizer,label,lowest_valid_rmse,best_epoch,test_rmse,total_seconds,epochs,termination\n";
    for (const auto& s : summaries)
        out << s.optimizer << ',' << s.label << ',' << format_sig10(s.lowest_valid_rmse) << ',' << s.best_epoch << ','
            << format_sig10(s.test_rmse) << ',' << format_sig10(s.total_seconds) << ',' << s.epochs << ','
            << termination_name(s.reason) << '\n';
}

inline void write_best_position_csv(std::ostream& out, std::span<const epoch_record> records) {
    out << "epoch,k_phi,k_p1,k_p2,k_p3,k_i1,k_i2,k_d1,k_d2,k_d3,k_d4\n";
    for (const auto& r : records) {
        if (!r.best_position) continue;
        out << r.epoch;
        for (double v : *r.best_position) out << ',' << format_sig10(v);
        out << '\n';
    }
}

namespace detail {

inline std::ofstream open_for_write(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    return out;
}

}  // namespace detail

/// Writes curve.csv and summary.csv (one row) into `out_dir`; NPALF runs also
/// get the best_fitness column and best_position.csv.
inline void emit_csv(std::span<const epoch_record> records, const run_summary& summary,
                     const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    const bool npalf_run = summary.optimizer == optimizer_name(optimizer_kind::npalf);
    {
        auto out = detail::open_for_write(out_dir / "curve.csv");
        write_curve_csv(out, records, npalf_run);
    }
    {
        auto out = detail::open_for_write(out_dir / "summary.csv");
        write_summary_csv(out, std::span<const run_summary>(&summary, 1));
    }
    if (npalf_run) {
        auto out = detail::open_for_write(out_dir / "best_position.csv");
        write_best_position_csv(out, records);
    }
}

// ---------------------------------------------------------------------------
// Bench: the six compared models on one split with a shared initialization.

inline const std::vector<optimizer_kind>& bench_optimizers() {
    static const std::vector<optimizer_kind> kinds = {optimizer_kind::npalf, optimizer_kind::pid_sgd,
                                                      optimizer_kind::sgd,   optimizer_kind::adam,
                                                      optimizer_kind::adadelta, optimizer_kind::rmsprop};
    return kinds;
}

/// Runs every bench optimizer on the configured split and, when `out_dir` is
/// non-empty, writes <out_dir>/<optimizer>/curve.csv and <out_dir>/summary.csv.
inline std::vector<run_result> bench(const run_config& base, const hdi_dataset& ds,
                                     const std::filesystem::path& out_dir = {}) {
    const data_split split = split_dataset(ds, base.split, base.seed);
    std::vector<run_result> results;
    std::vector<run_summary> summaries;
    for (optimizer_kind kind : bench_optimizers()) {
        run_config cfg = base;
        cfg.optimizer = kind;
        run_result r = train(cfg, ds, split);
        r.summary.label = "bench";
        if (!out_dir.empty()) emit_csv(r.records, r.summary, out_dir / optimizer_name(kind));
        summaries.push_back(r.summary);
        results.push_back(std::move(r));
    }
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        auto out = detail::open_for_write(out_dir / "summary.csv");
        write_summary_csv(out, summaries);
    }
    return results;
}

}  // namespace npalf
