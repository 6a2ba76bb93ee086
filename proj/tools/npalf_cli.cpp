// npalf: command-line front end for training, benchmarking and inspecting
// latent factor models on rating data.
//
// Exit codes: 0 success, 2 configuration or input error, 3 divergence.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "npalf.hpp"

namespace {

constexpr int exit_config = 2;
constexpr int exit_divergence = 3;

std::vector<double> parse_list(const std::string& text, std::size_t expected, const char* what) {
    std::vector<double> values;
    std::stringstream ss(text);
    std::string token;
    while (std::getline(ss, token, ',')) {
        double v = 0.0;
        if (!npalf::detail::parse_double(token, v)) throw npalf::config_error(std::string(what) + ": bad number '" + token + "'");
        values.push_back(v);
    }
    if (values.size() != expected)
        throw npalf::config_error(std::string(what) + ": expected " + std::to_string(expected) + " comma-separated values");
    return values;
}

// Raw option values; converted into a run_config after parsing.
struct run_options {
    std::string data;
    std::string format = "tsv";
    std::string optimizer = "sgd";
    std::size_t rank = 20;
    double eta = 0.04;
    double lambda = 0.05;
    std::uint64_t seed = 1;
    std::size_t max_epochs = 1000;
    double tol = 1e-5;
    std::string split = "7:1:2";
    std::size_t folds = 0;
    std::size_t repeats = 1;
    std::size_t swarm_size = 8;
    std::string fitness = "rmse";
    std::string out;
    double init_scale = 0.05;
    bool fixed_order = false;
    std::string timing = "wall";
    std::string pid_gains;
    std::string npid_gains;
    double integral_clamp = 0.0;
    double adaptive_lr = 0.0;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double rho = -1.0;
    double epsilon = -1.0;
    double pso_w = 0.7298;
    double pso_c1 = 1.4962;
    double pso_c2 = 1.4962;
    bool pso_per_dimension = false;
};

void add_run_options(CLI::App* app, run_options& o, bool with_optimizer) {
    app->add_option("--config", "Key-value config file (key = value per line); flags override it");
    app->add_option("--data", o.data, "Rating file")->required();
    app->add_option("--format", o.format, "Rating file format")->check(CLI::IsMember({"tsv", "colons", "csv"}));
    if (with_optimizer)
        app->add_option("--optimizer", o.optimizer, "Learning scheme")
            ->check(CLI::IsMember({"sgd", "pid", "npid", "npalf", "adam", "adadelta", "rmsprop"}));
    app->add_option("--rank", o.rank, "Latent factor dimension f");
    app->add_option("--eta", o.eta, "Learning rate");
    app->add_option("--lambda", o.lambda, "Regularization coefficient");
    app->add_option("--seed", o.seed, "Seed for split, initialization, visit order and swarm");
    app->add_option("--max-epochs", o.max_epochs, "Epoch limit");
    app->add_option("--tol", o.tol, "Stop when consecutive validation RMSEs differ by less than this");
    app->add_option("--split", o.split, "train:validation:test weights");
    app->add_option("--folds", o.folds, "Cross-validation folds (0 = single split)");
    app->add_option("--repeats", o.repeats, "Cross-validation repeats");
    app->add_option("--swarm-size", o.swarm_size, "NPALF particles per swarm");
    app->add_option("--fitness", o.fitness, "NPALF particle fitness")->check(CLI::IsMember({"rmse", "mae"}));
    app->add_option("--out", o.out, "Output directory")->required();
    app->add_option("--init-scale", o.init_scale, "Initial factors drawn from (0, scale]");
    app->add_flag("--fixed-order", o.fixed_order, "Visit training entries in file order instead of shuffling");
    app->add_option("--timing", o.timing, "Record wall-clock seconds, or write 0 for reproducible files")
        ->check(CLI::IsMember({"wall", "off"}));
    app->add_option("--pid-gains", o.pid_gains, "Linear PID gains Kp,Ki,Kd");
    app->add_option("--npid-gains", o.npid_gains, "NPID gains kp1,kp2,kp3,ki1,ki2,kd1,kd2,kd3,kd4");
    app->add_option("--integral-clamp", o.integral_clamp, "Symmetric bound on the integral sum (0 = off)");
    app->add_option("--adaptive-lr", o.adaptive_lr, "Adam/RMSprop learning rate (0 = eta)");
    app->add_option("--adam-beta1", o.adam_beta1);
    app->add_option("--adam-beta2", o.adam_beta2);
    app->add_option("--rho", o.rho, "RMSprop/AdaDelta decay (negative = default)");
    app->add_option("--epsilon", o.epsilon, "Adaptive epsilon (negative = default)");
    app->add_option("--pso-w", o.pso_w);
    app->add_option("--pso-c1", o.pso_c1);
    app->add_option("--pso-c2", o.pso_c2);
    app->add_flag("--pso-per-dimension", o.pso_per_dimension, "Draw r1, r2 per dimension");
}

npalf::run_config to_config(const run_options& o) {
    npalf::run_config c;
    c.data_path = o.data;
    c.format = npalf::parse_rating_format(o.format);
    c.optimizer = npalf::parse_optimizer_kind(o.optimizer);
    c.rank = o.rank;
    c.eta = o.eta;
    c.lambda = o.lambda;
    c.seed = o.seed;
    c.max_epochs = o.max_epochs;
    c.tol = o.tol;
    c.split = npalf::parse_split_ratio(o.split);
    c.folds = o.folds;
    c.repeats = o.repeats;
    c.swarm_size = o.swarm_size;
    c.fitness = npalf::parse_fitness_kind(o.fitness);
    c.out_dir = o.out;
    c.init_scale = o.init_scale;
    c.shuffle = !o.fixed_order;
    c.timing = o.timing == "wall";
    if (!o.pid_gains.empty()) {
        const auto v = parse_list(o.pid_gains, 3, "--pid-gains");
        c.pid = {v[0], v[1], v[2]};
    }
    if (!o.npid_gains.empty()) {
        const auto v = parse_list(o.npid_gains, 9, "--npid-gains");
        c.npid = {v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8]};
    }
    if (o.integral_clamp > 0.0) c.controller.integral_clamp = o.integral_clamp;
    if (o.adaptive_lr > 0.0) c.adaptive_lr = o.adaptive_lr;
    c.adam_beta1 = o.adam_beta1;
    c.adam_beta2 = o.adam_beta2;
    if (o.rho >= 0.0) c.rho = o.rho;
    if (o.epsilon >= 0.0) c.epsilon = o.epsilon;
    c.pso = {o.pso_w, o.pso_c1, o.pso_c2, o.pso_per_dimension};
    if (!std::filesystem::exists(c.data_path)) throw npalf::config_error("data file '" + c.data_path + "' does not exist");
    c.validate();
    return c;
}

void print_summary(const npalf::run_summary& s) {
    std::printf("%-9s %-8s lowest_valid_rmse=%.6f best_epoch=%zu test_rmse=%.6f epochs=%zu seconds=%.3f %s\n",
                s.optimizer.c_str(), s.label.c_str(), s.lowest_valid_rmse, s.best_epoch, s.test_rmse, s.epochs,
                s.total_seconds, npalf::termination_name(s.reason));
    if (!s.diagnostic.empty()) std::printf("  diagnostic: %s\n", s.diagnostic.c_str());
}

void print_warnings(const std::vector<std::string>& warnings) {
    for (const auto& w : warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
}

int run_train(const run_options& opts) {
    const npalf::run_config cfg = to_config(opts);
    const npalf::hdi_dataset ds = npalf::load_dataset(cfg.data_path, cfg.format);
    const std::filesystem::path out = cfg.out_dir;

    if (cfg.folds > 0) {
        const auto cv = npalf::cross_validate(cfg, ds);
        std::vector<npalf::run_summary> all;
        for (const auto& r : cv.runs) {
            print_warnings(r.warnings);
            if (!r.records.empty()) npalf::emit_csv(r.records, r.summary, out / r.summary.label);
            all.push_back(r.summary);
            print_summary(r.summary);
        }
        print_warnings(cv.warnings);
        std::filesystem::create_directories(out);
        {
            std::ofstream f(out / "summary.csv", std::ios::binary | std::ios::trunc);
            npalf::write_summary_csv(f, all);
        }
        {
            std::ofstream f(out / "aggregate.csv", std::ios::binary | std::ios::trunc);
            const auto& a = cv.summary;
            f << "optimizer,runs,lowest_valid_rmse_mean,lowest_valid_rmse_std,test_rmse_mean,test_rmse_std,seconds_mean,"
                 "seconds_std\n"
              << npalf::optimizer_name(cfg.optimizer) << ',' << a.runs << ','
              << npalf::format_sig10(a.lowest_valid_rmse.mean) << ',' << npalf::format_sig10(a.lowest_valid_rmse.std)
              << ',' << npalf::format_sig10(a.test_rmse.mean) << ',' << npalf::format_sig10(a.test_rmse.std) << ','
              << npalf::format_sig10(a.seconds.mean) << ',' << npalf::format_sig10(a.seconds.std) << '\n';
        }
        std::printf("aggregate over %zu splits: test RMSE %.6f +/- %.2e, seconds %.3f +/- %.3f\n", cv.summary.runs,
                    cv.summary.test_rmse.mean, cv.summary.test_rmse.std, cv.summary.seconds.mean,
                    cv.summary.seconds.std);
        return cv.summary.runs == 0 ? exit_divergence : 0;
    }

    const auto result = npalf::train(cfg, ds);
    print_warnings(result.warnings);
    npalf::emit_csv(result.records, result.summary, out);
    {
        std::ofstream f(out / "model.txt", std::ios::binary | std::ios::trunc);
        npalf::save_checkpoint(f, result.best_model);
    }
    print_summary(result.summary);
    return result.summary.reason == npalf::termination::diverged ? exit_divergence : 0;
}

int run_bench(const run_options& opts) {
    const npalf::run_config cfg = to_config(opts);
    const npalf::hdi_dataset ds = npalf::load_dataset(cfg.data_path, cfg.format);
    const auto results = npalf::bench(cfg, ds, cfg.out_dir);
    bool diverged = false;
    for (const auto& r : results) {
        print_warnings(r.warnings);
        print_summary(r.summary);
        diverged = diverged || r.summary.reason == npalf::termination::diverged;
    }
    return diverged ? exit_divergence : 0;
}

int run_inspect(const std::string& path, const std::string& format) {
    const auto ds = npalf::load_dataset(path, npalf::parse_rating_format(format));
    std::printf("rows (M)        %zu\ncolumns (N)     %zu\nknown entries   %zu\ndensity         %.4f%%\n", ds.users,
                ds.items, ds.entries.size(), 100.0 * ds.density());
    return 0;
}

// CLI11 only reads config files for the top-level app, so `<sub> --config F`
// is expanded here: each `key = value` line of F becomes `--key=value`,
// placed before the remaining flags so that explicit flags win.
std::vector<std::string> expand_config(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    if (args.empty()) return args;
    std::vector<std::string> rest, from_file;
    for (std::size_t i = 1; i < args.size(); ++i) {
        std::string path;
        if (args[i] == "--config" && i + 1 < args.size())
            path = args[++i];
        else if (args[i].rfind("--config=", 0) == 0)
            path = args[i].substr(9);
        else {
            rest.push_back(args[i]);
            continue;
        }
        std::ifstream in(path);
        if (!in) throw npalf::config_error("cannot read config file '" + path + "'");
        std::string line;
        while (std::getline(in, line)) {
            line = std::string(npalf::detail::trim(line));
            if (line.empty() || line[0] == '#' || line[0] == ';' || line[0] == '[') continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos) throw npalf::config_error("config line without '=': " + line);
            const auto key = std::string(npalf::detail::trim(line.substr(0, eq)));
            auto value = std::string(npalf::detail::trim(line.substr(eq + 1)));
            if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
            from_file.push_back("--" + key + "=" + value);
        }
    }
    std::vector<std::string> out{args.front()};
    out.insert(out.end(), from_file.begin(), from_file.end());
    out.insert(out.end(), rest.begin(), rest.end());
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Latent factor analysis with NPID-rebuilt errors and swarm-adapted parameters"};
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

    run_options train_opts;
    auto* train = app.add_subcommand("train", "Train one model (optionally with k-fold cross-validation)");
    add_run_options(train, train_opts, true);

    run_options bench_opts;
    auto* bench = app.add_subcommand("bench", "Run npalf, pid, sgd, adam, adadelta and rmsprop on one split");
    add_run_options(bench, bench_opts, false);

    std::string inspect_path, inspect_format = "tsv";
    auto* inspect = app.add_subcommand("inspect", "Print M, N, known entries and density of a rating file");
    inspect->add_option("--data", inspect_path, "Rating file")->required()->check(CLI::ExistingFile);
    inspect->add_option("--format", inspect_format)->check(CLI::IsMember({"tsv", "colons", "csv"}));

    npalf::synthetic_spec synth_spec;
    std::string synth_out;
    auto* synth = app.add_subcommand("synth", "Write a seeded synthetic low-rank rating file (tsv)");
    synth->add_option("--users", synth_spec.users);
    synth->add_option("--items", synth_spec.items);
    synth->add_option("--rank", synth_spec.rank);
    synth->add_option("--density", synth_spec.density);
    synth->add_option("--noise", synth_spec.noise);
    synth->add_option("--seed", synth_spec.seed);
    synth->add_option("--out", synth_out, "Output file")->required();

    try {
        auto args = expand_config(argc, argv);
        std::reverse(args.begin(), args.end());
        app.parse(std::move(args));
    } catch (const npalf::config_error& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return exit_config;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_config;
    }

    try {
        if (*train) return run_train(train_opts);
        if (*bench) return run_bench(bench_opts);
        if (*inspect) return run_inspect(inspect_path, inspect_format);
        if (*synth) {
            const auto ds = npalf::make_synthetic(synth_spec);
            std::ofstream out(synth_out, std::ios::binary | std::ios::trunc);
            if (!out) throw npalf::config_error("cannot write '" + synth_out + "'");
            npalf::write_canonical(out, ds);
            return 0;
        }
    } catch (const npalf::config_error& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return exit_config;
    } catch (const npalf::data_error& e) {
        std::fprintf(stderr, "input error: %s\n", e.what());
        return exit_config;
    } catch (const npalf::divergence_error& e) {
        std::fprintf(stderr, "diverged: %s\n", e.what());
        return exit_divergence;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
