#pragma once

// Seeded sampling protocols. Each sampler is a pure function of
// (pool, parameters, seed); replicate seeds come from derive_seed so that
// replicates can be generated in any order or concurrently.

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "biasaudit/common.hpp"
#include "biasaudit/dataset.hpp"
#include "biasaudit/rng.hpp"

namespace biasaudit {

struct SizedProtocol {
    std::size_t m = 2;
};

struct RatioProtocol {
    std::size_t m = 2;
    double f1 = 0.5;  // target fraction of group a1, in (0,1)
};

struct GrowingGroupProtocol {
    std::uint8_t fixed_group = 1;
    std::size_t fixed_n = 100;
    std::vector<std::size_t> growing_sizes;  // strictly increasing, positive
    bool selective_positive_only = false;
};

struct Protocol {
    std::variant<SizedProtocol, RatioProtocol, GrowingGroupProtocol> kind;
    std::size_t repeats = 30;
    std::uint64_t master_seed = 0;

    void validate() const {
        if (repeats < 1) throw ValidationError("protocol: repeats must be >= 1");
        if (const auto* s = std::get_if<SizedProtocol>(&kind)) {
            if (s->m < 2) throw ValidationError("protocol: sample size must be >= 2");
        } else if (const auto* r = std::get_if<RatioProtocol>(&kind)) {
            if (r->m < 2) throw ValidationError("protocol: sample size must be >= 2");
            if (!(r->f1 > 0.0 && r->f1 < 1.0))
                throw ValidationError("protocol: group fraction must lie strictly in (0,1)");
        } else {
            const auto& g = std::get<GrowingGroupProtocol>(kind);
            if (g.fixed_group > 1)
                throw ValidationError("protocol: fixed group must be a0 or a1");
            if (g.fixed_n < 1) throw ValidationError("protocol: fixed group size must be >= 1");
            if (g.growing_sizes.empty())
                throw ValidationError("protocol: at least one growing size required");
            std::size_t prev = 0;
            for (std::size_t s : g.growing_sizes) {
                if (s <= prev)
                    throw ValidationError(
                        "protocol: growing sizes must be strictly increasing positive integers");
                prev = s;
            }
        }
    }
};

struct SampleFamily {
    Protocol protocol;
    std::vector<Dataset> replicates;  // indexed 0..repeats-1
};

inline std::size_t round_half_up(double x) {
    return static_cast<std::size_t>(std::floor(x + 0.5));
}

// Uniform sample of exactly m rows, without replacement.
inline Dataset sample_sized(const Dataset& pool, std::size_t m, std::uint64_t seed) {
    if (m > pool.size())
        throw ValidationError("sample_sized: requested " + std::to_string(m) +
                              " rows from a pool of " + std::to_string(pool.size()));
    Rng rng(seed);
    return pool.subset(rng.sample_without_replacement(pool.size(), m));
}

// Sample with an exact group split: round_half_up(f1*m) rows from a1, the
// rest from a0, each uniform without replacement within its group.
inline Dataset sample_ratio(const Dataset& pool, std::size_t m, double f1, std::uint64_t seed) {
    if (!(f1 > 0.0 && f1 < 1.0))
        throw ValidationError("sample_ratio: fraction must lie strictly in (0,1)");
    const std::size_t m1 = round_half_up(f1 * static_cast<double>(m));
    if (m1 < 1 || m < m1 + 1)
        throw ValidationError("sample_ratio: fraction " + std::to_string(f1) + " at size " +
                              std::to_string(m) + " leaves a group empty");
    const std::size_t m0 = m - m1;
    const std::vector<std::size_t> g0 = pool.rows_in_group(0);
    const std::vector<std::size_t> g1 = pool.rows_in_group(1);
    if (g1.size() < m1)
        throw ValidationError("sample_ratio: group a1 has " + std::to_string(g1.size()) +
                              " rows, need " + std::to_string(m1));
    if (g0.size() < m0)
        throw ValidationError("sample_ratio: group a0 has " + std::to_string(g0.size()) +
                              " rows, need " + std::to_string(m0));
    Rng rng(seed);
    std::vector<std::size_t> rows;
    rows.reserve(m);
    for (std::size_t k : rng.sample_without_replacement(g0.size(), m0)) rows.push_back(g0[k]);
    for (std::size_t k : rng.sample_without_replacement(g1.size(), m1)) rows.push_back(g1[k]);
    std::sort(rows.begin(), rows.end());
    return pool.subset(rows);
}

// Series of training sets in which one group is frozen and the other grows.
// The fixed-group sample is drawn once and reused; growing-group samples are
// nested (each extends the previous) to model cumulative data collection.
// Selective mode draws the growing rows from that group's positive rows only.
inline std::vector<Dataset> growing_group_series(const Dataset& pool, std::uint8_t fixed_group,
                                                 std::size_t fixed_n,
                                                 const std::vector<std::size_t>& growing_sizes,
                                                 bool selective_positive_only,
                                                 std::uint64_t seed) {
    if (fixed_group > 1)
        throw ValidationError("growing_group_series: fixed group must be a0 or a1");
    if (growing_sizes.empty())
        throw ValidationError("growing_group_series: no growing sizes given");
    std::size_t prev = 0;
    for (std::size_t s : growing_sizes) {
        if (s <= prev)
            throw ValidationError("growing_group_series: sizes must be strictly increasing");
        prev = s;
    }
    const std::uint8_t growing_group = fixed_group ? 0 : 1;

    std::vector<std::size_t> fixed_pool = pool.rows_in_group(fixed_group);
    std::vector<std::size_t> grow_pool;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        if (pool.sensitive[i] != growing_group) continue;
        if (selective_positive_only && pool.labels[i] != 1) continue;
        grow_pool.push_back(i);
    }
    if (fixed_pool.size() < fixed_n)
        throw ValidationError("growing_group_series: fixed group a" +
                              std::to_string(fixed_group ? 1 : 0) + " has " +
                              std::to_string(fixed_pool.size()) + " rows, need " +
                              std::to_string(fixed_n));
    const std::size_t max_grow = growing_sizes.back();
    if (grow_pool.size() < max_grow)
        throw ValidationError("growing_group_series: growing group a" +
                              std::to_string(growing_group ? 1 : 0) +
                              (selective_positive_only ? " (positive rows only)" : "") +
                              " has " + std::to_string(grow_pool.size()) + " rows, need " +
                              std::to_string(max_grow));

    Rng rng(seed);
    std::vector<std::size_t> fixed_rows;
    for (std::size_t k : rng.sample_without_replacement(fixed_pool.size(), fixed_n))
        fixed_rows.push_back(fixed_pool[k]);
    // One shuffled order of the growing pool; prefixes give nested samples.
    std::vector<std::size_t> grow_order;
    for (std::size_t k : rng.sample_without_replacement(grow_pool.size(), max_grow))
        grow_order.push_back(grow_pool[k]);
    rng.shuffle(grow_order);

    std::vector<Dataset> series;
    series.reserve(growing_sizes.size());
    for (std::size_t s : growing_sizes) {
        std::vector<std::size_t> rows = fixed_rows;
        rows.insert(rows.end(), grow_order.begin(), grow_order.begin() + s);
        std::sort(rows.begin(), rows.end());
        series.push_back(pool.subset(rows));
    }
    return series;
}

// Materializes all replicates of a protocol. Replicate r of sweep index s
// uses derive_seed(master_seed, s, r), so families for different sweep
// points never share draws.
inline SampleFamily draw_family(const Dataset& pool, const Protocol& protocol,
                                std::size_t sweep_index) {
    protocol.validate();
    SampleFamily fam;
    fam.protocol = protocol;
    fam.replicates.reserve(protocol.repeats);
    for (std::size_t r = 0; r < protocol.repeats; ++r) {
        const std::uint64_t seed = derive_seed(protocol.master_seed, sweep_index, r);
        if (const auto* s = std::get_if<SizedProtocol>(&protocol.kind)) {
            fam.replicates.push_back(sample_sized(pool, s->m, seed));
        } else if (const auto* rt = std::get_if<RatioProtocol>(&protocol.kind)) {
            fam.replicates.push_back(sample_ratio(pool, rt->m, rt->f1, seed));
        } else {
            throw ValidationError(
                "draw_family: growing-group protocols produce a series, not a family");
        }
    }
    return fam;
}

}  // namespace biasaudit
