#pragma once

// Rating-file ingestion and deterministic train/validation/test splitting of
// the known entry set of a high-dimensional incomplete (HDI) matrix.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "npalf/errors.hpp"
#include "npalf/random.hpp"

namespace npalf {

struct rating_triple {
    std::uint32_t user = 0;  // dense, 0-based
    std::uint32_t item = 0;  // dense, 0-based
    double value = 0.0;

    friend bool operator==(const rating_triple&, const rating_triple&) = default;
};

enum class rating_format { tsv, colons, csv };

inline rating_format parse_rating_format(std::string_view name) {
    if (name == "tsv" || name == "tab") return rating_format::tsv;
    if (name == "colons" || name == "::") return rating_format::colons;
    if (name == "csv") return rating_format::csv;
    throw config_error("unknown rating format '" + std::string(name) + "' (expected tsv, colons or csv)");
}

/// Known entries of an M x N rating matrix, with dense reindexing of the
/// original identifiers in first-appearance order.
struct hdi_dataset {
    std::size_t users = 0;  // M
    std::size_t items = 0;  // N
    std::vector<rating_triple> entries;
    std::vector<std::string> user_ids;  // dense index -> original id
    std::vector<std::string> item_ids;

    double density() const noexcept {
        if (users == 0 || items == 0) return 0.0;
        return static_cast<double>(entries.size()) /
               (static_cast<double>(users) * static_cast<double>(items));
    }
};

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line, rating_format format) {
    std::vector<std::string_view> fields;
    const std::string_view sep = format == rating_format::tsv      ? std::string_view("\t")
                                 : format == rating_format::colons ? std::string_view("::")
                                                                   : std::string_view(",");
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + sep.size();
    }
    return fields;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline bool parse_double(std::string_view text, double& out) {
    text = trim(text);
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    if (text.empty()) return false;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    return ec == std::errc() && ptr == text.data() + text.size();
}

inline std::uint32_t intern(std::unordered_map<std::string, std::uint32_t>& map,
                            std::vector<std::string>& ids, std::string_view key) {
    auto [it, inserted] = map.try_emplace(std::string(key), static_cast<std::uint32_t>(ids.size()));
    if (inserted) ids.emplace_back(key);
    return it->second;
}

/// Largest-remainder apportionment of `total` units over positive weights.
/// Ties in the fractional part go to the earlier weight.
inline std::vector<std::size_t> apportion(std::size_t total, std::span<const std::size_t> weights) {
    const std::size_t weight_sum = std::accumulate(weights.begin(), weights.end(), std::size_t{0});
    std::vector<std::size_t> sizes(weights.size());
    std::vector<std::size_t> remainders(weights.size());
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        sizes[i] = total * weights[i] / weight_sum;
        remainders[i] = total * weights[i] % weight_sum;
        assigned += sizes[i];
    }
    std::vector<std::size_t> rank(weights.size());
    std::iota(rank.begin(), rank.end(), std::size_t{0});
    std::stable_sort(rank.begin(), rank.end(),
                     [&](std::size_t a, std::size_t b) { return remainders[a] > remainders[b]; });
    for (std::size_t k = 0; assigned < total; ++k, ++assigned) ++sizes[rank[k % rank.size()]];
    return sizes;
}

}  // namespace detail

/// Parse one rating per non-empty line: user, item, rating as the first three
/// fields; further fields are ignored. For csv input a non-numeric rating on
/// line 1 is treated as a column header and skipped.
inline hdi_dataset parse_ratings(std::istream& source, rating_format format) {
    hdi_dataset ds;
    std::unordered_map<std::string, std::uint32_t> user_map;
    std::unordered_map<std::string, std::uint32_t> item_map;
    std::unordered_set<std::uint64_t> seen;

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(source, line)) {
        ++line_no;
        const std::string_view view = detail::trim(line);
        if (view.empty()) continue;
        const auto fields = detail::split_fields(view, format);
        if (fields.size() < 3) throw parse_error(line_no, "expected at least 3 fields, found " + std::to_string(fields.size()));
        const std::string_view user = detail::trim(fields[0]);
        const std::string_view item = detail::trim(fields[1]);
        if (user.empty() || item.empty()) throw parse_error(line_no, "empty user or item id");
        double value = 0.0;
        if (!detail::parse_double(fields[2], value)) {
            if (format == rating_format::csv && line_no == 1) continue;
            throw parse_error(line_no, "invalid rating '" + std::string(fields[2]) + "'");
        }
        if (!std::isfinite(value)) throw parse_error(line_no, "rating is not finite");

        const std::uint32_t u = detail::intern(user_map, ds.user_ids, user);
        const std::uint32_t i = detail::intern(item_map, ds.item_ids, item);
        if (!seen.insert((static_cast<std::uint64_t>(u) << 32) | i).second)
            throw parse_error(line_no, "duplicate (user, item) pair (" + std::string(user) + ", " + std::string(item) + ")");
        ds.entries.push_back({u, i, value});
    }
    if (ds.entries.empty()) throw data_error("empty input");
    ds.users = ds.user_ids.size();
    ds.items = ds.item_ids.size();
    return ds;
}

/// Shortest decimal representation that round-trips to the same double.
inline std::string format_round_trip(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, ptr);
}

/// Canonical output: "user<TAB>item<TAB>rating" with the original ids.
inline void write_canonical(std::ostream& out, const hdi_dataset& ds) {
    for (const auto& t : ds.entries)
        out << ds.user_ids[t.user] << '\t' << ds.item_ids[t.item] << '\t' << format_round_trip(t.value) << '\n';
}

struct split_ratio {
    std::size_t train = 7;
    std::size_t validation = 1;
    std::size_t test = 2;

    std::size_t sum() const noexcept { return train + validation + test; }
};

inline split_ratio parse_split_ratio(std::string_view text) {
    split_ratio r;
    std::size_t* parts[3] = {&r.train, &r.validation, &r.test};
    std::size_t start = 0;
    for (int k = 0; k < 3; ++k) {
        const std::size_t end = k < 2 ? text.find(':', start) : text.size();
        if (end == std::string_view::npos) throw config_error("split ratio must look like 7:1:2");
        const std::string_view part = text.substr(start, end - start);
        auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), *parts[k]);
        if (ec != std::errc() || ptr != part.data() + part.size() || part.empty())
            throw config_error("split ratio must look like 7:1:2");
        start = end + 1;
    }
    return r;
}

/// Entry index lists for the three roles. Each list is sorted ascending.
struct data_split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
    std::vector<std::size_t> test;
    std::uint64_t seed = 0;

    friend bool operator==(const data_split&, const data_split&) = default;
};

namespace detail {

inline void validate_ratio(const split_ratio& ratio) {
    if (ratio.train == 0 || ratio.validation == 0 || ratio.test == 0)
        throw config_error("split weights must all be positive");
}

}  // namespace detail

/// Shuffle all entry indices and cut them by `ratio` (largest-remainder rounding).
inline data_split split_dataset(const hdi_dataset& ds, const split_ratio& ratio, std::uint64_t seed) {
    detail::validate_ratio(ratio);
    const std::size_t n = ds.entries.size();
    if (n < ratio.sum())
        throw data_error("dataset has " + std::to_string(n) + " entries, fewer than the " +
                         std::to_string(ratio.sum()) + " requested subsets");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng gen(seed, streams::split);
    shuffle(std::span<std::size_t>(order), gen);

    const std::size_t weights[3] = {ratio.train, ratio.validation, ratio.test};
    const auto sizes = detail::apportion(n, weights);

    data_split out;
    out.seed = seed;
    auto first = order.begin();
    out.train.assign(first, first + static_cast<std::ptrdiff_t>(sizes[0]));
    first += static_cast<std::ptrdiff_t>(sizes[0]);
    out.validation.assign(first, first + static_cast<std::ptrdiff_t>(sizes[1]));
    first += static_cast<std::ptrdiff_t>(sizes[1]);
    out.test.assign(first, order.end());
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.validation.begin(), out.validation.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

/// Divide the entries into k near-equal folds per repeat and rotate role
/// assignment over the folds, giving k splits per repeat (k * repeats total).
/// The number of folds per role follows `ratio` over k.
inline std::vector<data_split> k_fold_partitions(const hdi_dataset& ds, std::size_t k, std::size_t repeats,
                                                 std::uint64_t seed, const split_ratio& ratio = {}) {
    detail::validate_ratio(ratio);
    if (k < 3) throw config_error("k-fold partitioning needs k >= 3");
    if (repeats < 1) throw config_error("k-fold partitioning needs repeats >= 1");
    const std::size_t n = ds.entries.size();
    if (k > n)
        throw data_error("k = " + std::to_string(k) + " folds exceeds " + std::to_string(n) + " entries (fold size 0)");

    const std::size_t weights[3] = {ratio.train, ratio.validation, ratio.test};
    const auto role_folds = detail::apportion(k, weights);
    if (role_folds[0] == 0 || role_folds[1] == 0 || role_folds[2] == 0)
        throw config_error("k = " + std::to_string(k) + " folds cannot give every role at least one fold");

    std::vector<data_split> splits;
    splits.reserve(k * repeats);
    rng gen(seed, streams::split);
    std::vector<std::size_t> order(n);
    for (std::size_t rep = 0; rep < repeats; ++rep) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        shuffle(std::span<std::size_t>(order), gen);

        std::vector<std::span<const std::size_t>> folds;
        std::size_t offset = 0;
        for (std::size_t f = 0; f < k; ++f) {
            const std::size_t size = n / k + (f < n % k ? 1 : 0);
            folds.emplace_back(order.data() + offset, size);
            offset += size;
        }

        for (std::size_t rot = 0; rot < k; ++rot) {
            data_split s;
            s.seed = seed;
            for (std::size_t j = 0; j < k; ++j) {
                const auto& fold = folds[(rot + j) % k];
                auto& target = j < role_folds[0]                   ? s.train
                               : j < role_folds[0] + role_folds[1] ? s.validation
                                                                   : s.test;
                target.insert(target.end(), fold.begin(), fold.end());
            }
            std::sort(s.train.begin(), s.train.end());
            std::sort(s.validation.begin(), s.validation.end());
            std::sort(s.test.begin(), s.test.end());
            splits.push_back(std::move(s));
        }
    }
    return splits;
}

/// Materialize the triples named by an index list.
inline std::vector<rating_triple> select_entries(const hdi_dataset& ds, std::span<const std::size_t> indices) {
    std::vector<rating_triple> out;
    out.reserve(indices.size());
    for (std::size_t i : indices) out.push_back(ds.entries.at(i));
    return out;
}

}  // namespace npalf
