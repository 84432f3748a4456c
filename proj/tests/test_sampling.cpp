#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <set>

#include "biasaudit/sampling.hpp"
#include "testing_util.hpp"

using namespace biasaudit;

namespace {

Dataset grouped_pool(std::size_t n1, std::size_t n0, double pos_rate = 0.5,
                     std::uint64_t seed = 1) {
    Rng rng(seed);
    std::vector<std::vector<double>> rows;
    std::vector<std::uint8_t> labels, sens;
    for (std::size_t i = 0; i < n1 + n0; ++i) {
        rows.push_back({static_cast<double>(i), rng.next_double()});
        labels.push_back(rng.bernoulli(pos_rate) ? 1 : 0);
        sens.push_back(i < n1 ? 1 : 0);
    }
    return testutil::make_dataset(rows, labels, sens);
}

std::set<std::int64_t> id_set(const Dataset& ds) {
    return {ds.row_ids.begin(), ds.row_ids.end()};
}

}  // namespace

TEST_CASE("round_half_up follows the documented tie rule") {
    CHECK(round_half_up(2.5) == 3);
    CHECK(round_half_up(2.49) == 2);
    CHECK(round_half_up(0.5) == 1);
    CHECK(round_half_up(0.0) == 0);
    CHECK(round_half_up(7.0) == 7);
}

TEST_CASE("sample_sized draws exactly m distinct pool rows") {
    const Dataset pool = grouped_pool(40, 60);
    const Dataset s = sample_sized(pool, 10, 99);
    REQUIRE(s.size() == 10);
    CHECK(id_set(s).size() == 10);
    for (std::int64_t id : s.row_ids) {
        CHECK(id >= 0);
        CHECK(id < 100);
    }
}

TEST_CASE("sample_sized with m equal to the pool returns every row") {
    const Dataset pool = grouped_pool(5, 5);
    const Dataset s = sample_sized(pool, 10, 3);
    CHECK(id_set(s) == id_set(pool));
}

TEST_CASE("sample_sized rejects oversized requests") {
    const Dataset pool = grouped_pool(5, 5);
    CHECK_THROWS_AS(sample_sized(pool, 11, 1), ValidationError);
}

TEST_CASE("repeated sized draws track the pool positive rate") {
    const Dataset pool = grouped_pool(1000, 1000, 0.3, 7);
    double pool_rate = 0;
    for (std::uint8_t y : pool.labels) pool_rate += y;
    pool_rate /= static_cast<double>(pool.size());

    double mean_rate = 0;
    const int draws = 200;
    for (int r = 0; r < draws; ++r) {
        const Dataset s = sample_sized(pool, 500, derive_seed(11, 0, r));
        double rate = 0;
        for (std::uint8_t y : s.labels) rate += y;
        mean_rate += rate / 500.0;
    }
    mean_rate /= draws;
    CHECK(std::abs(mean_rate - pool_rate) < 0.02);
}

TEST_CASE("sample_ratio rounds the minority count half-up") {
    const Dataset pool = grouped_pool(50, 50);
    const Dataset s = sample_ratio(pool, 10, 0.25, 4);
    REQUIRE(s.size() == 10);
    std::size_t m1 = 0;
    for (std::uint8_t a : s.sensitive) m1 += a;
    CHECK(m1 == 3);  // round(0.25 * 10) with half-up rule
}

TEST_CASE("sample_ratio hits exact group counts for the balanced case") {
    const Dataset pool = grouped_pool(600, 600);
    const Dataset s = sample_ratio(pool, 1000, 0.5, 21);
    std::size_t m1 = 0;
    for (std::uint8_t a : s.sensitive) m1 += a;
    CHECK(m1 == 500);
    CHECK(s.size() - m1 == 500);
}

TEST_CASE("sample_ratio supports extreme splits") {
    const Dataset pool = grouped_pool(600, 1100);
    const Dataset s = sample_ratio(pool, 1000, 0.001, 5);
    std::size_t m1 = 0;
    for (std::uint8_t a : s.sensitive) m1 += a;
    CHECK(m1 == 1);
    CHECK(s.size() == 1000);
}

TEST_CASE("sample_ratio errors name the short group") {
    const Dataset pool = grouped_pool(3, 50);
    try {
        sample_ratio(pool, 20, 0.5, 8);
        FAIL("expected a validation error");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("a1") != std::string::npos);
    }
}

TEST_CASE("sample_ratio draws are deterministic and within-group") {
    const Dataset pool = grouped_pool(100, 100);
    const Dataset a = sample_ratio(pool, 60, 0.3, 42);
    const Dataset b = sample_ratio(pool, 60, 0.3, 42);
    CHECK(a.row_ids == b.row_ids);
    for (std::size_t i = 0; i < a.size(); ++i) {
        const std::size_t src = static_cast<std::size_t>(a.row_ids[i]);
        CHECK(a.sensitive[i] == pool.sensitive[src]);
    }
}

TEST_CASE("growing series reuses the fixed draw and nests the growing draws") {
    const Dataset pool = grouped_pool(200, 300);
    const std::vector<Dataset> series =
        growing_group_series(pool, 1, 100, {2, 4, 30}, false, 77);
    REQUIRE(series.size() == 3);
    CHECK(series[0].size() == 102);
    CHECK(series[1].size() == 104);
    CHECK(series[2].size() == 130);

    // fixed-group rows identical across the whole series
    std::set<std::int64_t> fixed_prev;
    for (const Dataset& ds : series) {
        std::set<std::int64_t> fixed;
        for (std::size_t i = 0; i < ds.size(); ++i)
            if (ds.sensitive[i] == 1) fixed.insert(ds.row_ids[i]);
        CHECK(fixed.size() == 100);
        if (!fixed_prev.empty()) CHECK(fixed == fixed_prev);
        fixed_prev = fixed;
    }

    // nesting of the full row sets
    const std::set<std::int64_t> s0 = id_set(series[0]);
    const std::set<std::int64_t> s1 = id_set(series[1]);
    const std::set<std::int64_t> s2 = id_set(series[2]);
    CHECK(std::includes(s1.begin(), s1.end(), s0.begin(), s0.end()));
    CHECK(std::includes(s2.begin(), s2.end(), s1.begin(), s1.end()));
}

TEST_CASE("selective growing mode adds only positive rows of the growing group") {
    const Dataset pool = grouped_pool(150, 400, 0.5, 13);
    const std::vector<Dataset> series = growing_group_series(pool, 1, 50, {5, 20}, true, 3);
    for (const Dataset& ds : series)
        for (std::size_t i = 0; i < ds.size(); ++i)
            if (ds.sensitive[i] == 0) CHECK(ds.labels[i] == 1);
}

TEST_CASE("growing size matching fixed_n yields exactly balanced groups") {
    const Dataset pool = grouped_pool(200, 200);
    const std::vector<Dataset> series =
        growing_group_series(pool, 1, 100, {100}, false, 9);
    std::size_t m1 = 0;
    for (std::uint8_t a : series[0].sensitive) m1 += a;
    CHECK(m1 == 100);
    CHECK(series[0].size() - m1 == 100);
}

TEST_CASE("growing series errors name the limiting stratum") {
    const Dataset pool = grouped_pool(150, 30, 0.5, 2);
    try {
        growing_group_series(pool, 1, 100, {40}, false, 1);
        FAIL("expected a validation error");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("a0") != std::string::npos);
    }
}

TEST_CASE("protocol validation enforces the documented invariants") {
    Protocol p;
    p.kind = SizedProtocol{1};
    CHECK_THROWS_AS(p.validate(), ValidationError);
    p.kind = SizedProtocol{2};
    p.repeats = 0;
    CHECK_THROWS_AS(p.validate(), ValidationError);
    p.repeats = 1;
    CHECK_NOTHROW(p.validate());
    p.kind = RatioProtocol{100, 0.0};
    CHECK_THROWS_AS(p.validate(), ValidationError);
    p.kind = RatioProtocol{100, 1.0};
    CHECK_THROWS_AS(p.validate(), ValidationError);
    p.kind = GrowingGroupProtocol{1, 10, {5, 5}, false};
    CHECK_THROWS_AS(p.validate(), ValidationError);
}

TEST_CASE("draw_family produces repeats distinct deterministic replicates") {
    const Dataset pool = grouped_pool(80, 80);
    Protocol p;
    p.kind = SizedProtocol{20};
    p.repeats = 5;
    p.master_seed = 1234;
    const SampleFamily fam1 = draw_family(pool, p, 0);
    const SampleFamily fam2 = draw_family(pool, p, 0);
    REQUIRE(fam1.replicates.size() == 5);
    bool all_same_size = true, any_distinct = false;
    for (std::size_t r = 0; r < 5; ++r) {
        all_same_size = all_same_size && fam1.replicates[r].size() == 20;
        CHECK(fam1.replicates[r].row_ids == fam2.replicates[r].row_ids);
        if (r && fam1.replicates[r].row_ids != fam1.replicates[0].row_ids)
            any_distinct = true;
    }
    CHECK(all_same_size);
    CHECK(any_distinct);
}

TEST_CASE("draw_family sweeps give different draws per sweep index") {
    const Dataset pool = grouped_pool(80, 80);
    Protocol p;
    p.kind = SizedProtocol{20};
    p.repeats = 2;
    p.master_seed = 1234;
    const SampleFamily a = draw_family(pool, p, 0);
    const SampleFamily b = draw_family(pool, p, 1);
    CHECK(a.replicates[0].row_ids != b.replicates[0].row_ids);
}
