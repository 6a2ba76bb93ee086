#pragma once

// Seeded synthetic low-rank rating matrices for tests and desk-scale benchmarks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_set>
#include <vector>

#include "npalf/errors.hpp"
#include "npalf/hdi_data.hpp"
#include "npalf/random.hpp"

namespace npalf {

struct synthetic_spec {
    std::size_t users = 50;
    std::size_t items = 40;
    std::size_t rank = 3;
    double density = 0.05;
    double noise = 0.01;  // standard deviation of additive Gaussian noise
    std::uint64_t seed = 1;
};

/// r_mn = (10 / rank) * <u_m, v_n> + noise, with u, v entries uniform in [0, 1)
/// (mean rating 2.5). round(density * M * N) distinct cells are observed,
/// listed in row-major cell order. Ids are the 1-based row/column numbers.
inline hdi_dataset make_synthetic(const synthetic_spec& spec) {
    if (spec.users == 0 || spec.items == 0 || spec.rank == 0) throw config_error("synthetic: dimensions must be >= 1");
    if (!(spec.density > 0.0 && spec.density <= 1.0)) throw config_error("synthetic: density must lie in (0, 1]");
    if (!(spec.noise >= 0.0)) throw config_error("synthetic: noise must be >= 0");

    rng gen(spec.seed, streams::synthetic);
    std::vector<double> u(spec.users * spec.rank), v(spec.items * spec.rank);
    for (double& a : u) a = gen.uniform();
    for (double& a : v) a = gen.uniform();

    const std::uint64_t cells = static_cast<std::uint64_t>(spec.users) * spec.items;
    const auto count = static_cast<std::uint64_t>(std::llround(spec.density * static_cast<double>(cells)));
    if (count == 0) throw config_error("synthetic: density too small, no entries");

    // Floyd's sampling of `count` distinct cells.
    std::unordered_set<std::uint64_t> chosen;
    chosen.reserve(count * 2);
    for (std::uint64_t j = cells - count; j < cells; ++j) {
        const std::uint64_t t = gen.below(j + 1);
        if (!chosen.insert(t).second) chosen.insert(j);
    }
    std::vector<std::uint64_t> sorted(chosen.begin(), chosen.end());
    std::sort(sorted.begin(), sorted.end());

    hdi_dataset ds;
    ds.users = spec.users;
    ds.items = spec.items;
    for (std::size_t m = 0; m < spec.users; ++m) ds.user_ids.push_back(std::to_string(m + 1));
    for (std::size_t n = 0; n < spec.items; ++n) ds.item_ids.push_back(std::to_string(n + 1));
    const double scale = 10.0 / static_cast<double>(spec.rank);
    ds.entries.reserve(sorted.size());
    for (std::uint64_t cell : sorted) {
        const auto m = static_cast<std::uint32_t>(cell / spec.items);
        const auto n = static_cast<std::uint32_t>(cell % spec.items);
        double r = 0.0;
        for (std::size_t d = 0; d < spec.rank; ++d) r += u[m * spec.rank + d] * v[n * spec.rank + d];
        ds.entries.push_back({m, n, scale * r + spec.noise * gen.normal()});
    }
    return ds;
}

}  // namespace npalf
