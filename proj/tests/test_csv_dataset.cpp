#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "biasaudit/csv.hpp"
#include "biasaudit/dataset.hpp"
#include "biasaudit/learners.hpp"
#include "biasaudit/metrics.hpp"
#include "testing_util.hpp"

using namespace biasaudit;

TEST_CASE("csv parser handles quoting, embedded commas, and CRLF") {
    std::istringstream in("a,b,c\r\n1,\"x,y\",\"he said \"\"hi\"\"\"\n2,,\"multi\nline\"\n");
    const CsvTable t = parse_csv(in);
    REQUIRE(t.header == std::vector<std::string>{"a", "b", "c"});
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[0] == std::vector<std::string>{"1", "x,y", "he said \"hi\""});
    CHECK(t.rows[1] == std::vector<std::string>{"2", "", "multi\nline"});
}

TEST_CASE("csv writer round-trips through the parser") {
    std::ostringstream os;
    write_csv_row(os, {"plain", "with,comma", "with\"quote", "with\nnewline", ""});
    write_csv_row(os, {"1", "2", "3", "4", "5"});
    std::istringstream in(os.str());
    const CsvTable t = parse_csv(in);
    CHECK(t.header == std::vector<std::string>{"plain", "with,comma", "with\"quote",
                                               "with\nnewline", ""});
    CHECK(t.rows[0] == std::vector<std::string>{"1", "2", "3", "4", "5"});
}

TEST_CASE("column_index throws for unknown columns") {
    std::istringstream in("a,b\n1,2\n");
    const CsvTable t = parse_csv(in);
    CHECK(t.column_index("b") == 1);
    CHECK(t.has_column("a"));
    CHECK_FALSE(t.has_column("z"));
    CHECK_THROWS_AS(t.column_index("z"), ValidationError);
}

namespace {

DataSchema toy_schema() {
    DataSchema s;
    s.label_column = "y";
    s.positive_label = "yes";
    s.sensitive_column = "grp";
    s.privileged_value = "p";
    s.feature_columns = {{"age", FeatureKind::Numeric}, {"job", FeatureKind::Categorical}};
    return s;
}

}  // namespace

TEST_CASE("load_csv maps labels, encodes categoricals, and standardizes numerics") {
    testutil::TempDir tmp;
    testutil::write_file(tmp.file("d.csv"),
                         "age,job,grp,y\n"
                         "30,nurse,p,yes\n"
                         "40,clerk,q,no\n"
                         "50,nurse,q,yes\n"
                         "60,smith,p,no\n");
    const Dataset ds = load_csv(tmp.file("d.csv"), toy_schema());
    REQUIRE(ds.size() == 4);
    CHECK(ds.labels == std::vector<std::uint8_t>{1, 0, 1, 0});
    CHECK(ds.sensitive == std::vector<std::uint8_t>{1, 0, 0, 1});

    // one numeric + three one-hot categories + the sensitive column appended
    REQUIRE(ds.feature_names.size() == 5);
    CHECK(ds.feature_names[0] == "age");
    CHECK(ds.feature_names[1] == "job=clerk");
    CHECK(ds.feature_names[2] == "job=nurse");
    CHECK(ds.feature_names[3] == "job=smith");
    CHECK(ds.feature_names[4] == "grp");
    CHECK(ds.sensitive_feature_index == 4);
    for (std::size_t i = 0; i < 4; ++i)
        CHECK(ds.features.at(i, 4) == static_cast<double>(ds.sensitive[i]));

    // standardized column: sample mean approx 0, sample variance approx 1
    double mean = 0;
    for (std::size_t i = 0; i < 4; ++i) mean += ds.features.at(i, 0);
    mean /= 4;
    double var = 0;
    for (std::size_t i = 0; i < 4; ++i) {
        const double d = ds.features.at(i, 0) - mean;
        var += d * d;
    }
    var /= 3;
    CHECK(std::abs(mean) < 1e-9);
    CHECK(std::abs(var - 1.0) < 1e-9);

    CHECK(ds.features.at(0, 2) == 1.0);  // row 0 is a nurse
    CHECK(ds.features.at(1, 1) == 1.0);  // row 1 is a clerk
}

TEST_CASE("load_csv drops rows with missing values and counts them") {
    testutil::TempDir tmp;
    testutil::write_file(tmp.file("d.csv"),
                         "age,job,grp,y\n"
                         "30,nurse,p,yes\n"
                         "?,clerk,q,no\n"
                         "50,,q,yes\n"
                         "60,smith,p,no\n");
    const Dataset ds = load_csv(tmp.file("d.csv"), toy_schema());
    CHECK(ds.size() == 2);
    CHECK(ds.provenance.find("2") != std::string::npos);  // dropped-row count surfaces
}

TEST_CASE("load_csv rejects a three-valued sensitive column naming the values") {
    testutil::TempDir tmp;
    testutil::write_file(tmp.file("d.csv"),
                         "age,job,grp,y\n30,nurse,p,yes\n40,clerk,q,no\n50,nurse,r,yes\n");
    try {
        load_csv(tmp.file("d.csv"), toy_schema());
        FAIL("expected a validation error");
    } catch (const ValidationError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("grp") != std::string::npos);
    }
}

TEST_CASE("load_csv errors name a missing schema column") {
    testutil::TempDir tmp;
    testutil::write_file(tmp.file("d.csv"), "age,grp,y\n30,p,yes\n");
    try {
        load_csv(tmp.file("d.csv"), toy_schema());
        FAIL("expected a validation error");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("job") != std::string::npos);
    }
}

TEST_CASE("load_csv errors on a non-numeric value in a numeric column") {
    testutil::TempDir tmp;
    testutil::write_file(tmp.file("d.csv"),
                         "age,job,grp,y\n30,nurse,p,yes\noops,clerk,q,no\n");
    try {
        load_csv(tmp.file("d.csv"), toy_schema());
        FAIL("expected a validation error");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("age") != std::string::npos);
    }
}

TEST_CASE("schema can exclude the sensitive attribute from the feature matrix") {
    testutil::TempDir tmp;
    testutil::write_file(tmp.file("d.csv"),
                         "age,job,grp,y\n30,nurse,p,yes\n40,clerk,q,no\n");
    DataSchema s = toy_schema();
    s.include_sensitive_as_feature = false;
    const Dataset ds = load_csv(tmp.file("d.csv"), s);
    CHECK(ds.sensitive_feature_index == -1);
    for (const std::string& name : ds.feature_names) CHECK(name != "grp");
}

TEST_CASE("group_stats counts by direct enumeration") {
    const Dataset ds = testutil::make_dataset({{0.0}, {0.0}, {0.0}, {0.0}}, {1, 0, 1, 0},
                                              {1, 1, 0, 0});
    const GroupStats gs = group_stats(ds);
    CHECK(gs.m0 == 2);
    CHECK(gs.m1 == 2);
    REQUIRE(gs.pos_rate_a0.has_value());
    REQUIRE(gs.pos_rate_a1.has_value());
    CHECK(*gs.pos_rate_a0 == 0.5);
    CHECK(*gs.pos_rate_a1 == 0.5);
    CHECK(gs.group_fraction_a1 == 0.5);
}

TEST_CASE("group_stats marks an empty group's rate undefined") {
    const Dataset ds = testutil::make_dataset({{0.0}}, {1}, {1});
    const GroupStats gs = group_stats(ds);
    CHECK(gs.m0 == 0);
    CHECK(gs.m1 == 1);
    CHECK_FALSE(gs.pos_rate_a0.has_value());
    REQUIRE(gs.pos_rate_a1.has_value());
    CHECK(*gs.pos_rate_a1 == 1.0);
}

namespace {

// group layout: first n1 rows are a1, split pos/neg as requested
Dataset two_group_dataset(std::size_t pos1, std::size_t neg1, std::size_t pos0,
                          std::size_t neg0) {
    std::vector<std::vector<double>> rows;
    std::vector<std::uint8_t> labels, sens;
    auto add = [&](std::size_t count, std::uint8_t y, std::uint8_t a) {
        for (std::size_t i = 0; i < count; ++i) {
            rows.push_back({static_cast<double>(rows.size())});
            labels.push_back(y);
            sens.push_back(a);
        }
    };
    add(pos1, 1, 1);
    add(neg1, 0, 1);
    add(pos0, 1, 0);
    add(neg0, 0, 0);
    return testutil::make_dataset(rows, labels, sens);
}

}  // namespace

TEST_CASE("rebalance hits the documented 500/500 at rate 0.9 case") {
    const Dataset ds = two_group_dataset(500, 500, 500, 500);
    const Dataset out = rebalance_outcome_rates(ds, 0.9, 0.9, 123);
    const GroupStats gs = group_stats(out);
    CHECK(gs.m1 == 555);
    CHECK(gs.m0 == 555);
    std::size_t pos1 = 0, pos0 = 0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (out.sensitive[i] && out.labels[i]) ++pos1;
        if (!out.sensitive[i] && out.labels[i]) ++pos0;
    }
    CHECK(pos1 == 500);
    CHECK(pos0 == 500);
}

TEST_CASE("rebalance realized rate stays within one part in group size") {
    const Dataset ds = two_group_dataset(300, 700, 600, 400);
    for (double r : {0.1, 0.25, 0.5, 0.75}) {
        const Dataset out = rebalance_outcome_rates(ds, r, r, 9);
        const GroupStats gs = group_stats(out);
        REQUIRE(gs.pos_rate_a1.has_value());
        REQUIRE(gs.pos_rate_a0.has_value());
        CHECK(std::abs(*gs.pos_rate_a1 - r) <= 1.0 / static_cast<double>(gs.m1));
        CHECK(std::abs(*gs.pos_rate_a0 - r) <= 1.0 / static_cast<double>(gs.m0));
    }
}

TEST_CASE("rebalance at the existing rate keeps the whole group") {
    const Dataset ds = two_group_dataset(500, 500, 250, 750);
    const Dataset out = rebalance_outcome_rates(ds, 0.5, 0.25, 77);
    const GroupStats gs = group_stats(out);
    CHECK(gs.m1 == 1000);
    CHECK(gs.m0 == 1000);
    REQUIRE(gs.pos_rate_a1.has_value());
    CHECK(*gs.pos_rate_a1 == 0.5);
    REQUIRE(gs.pos_rate_a0.has_value());
    CHECK(*gs.pos_rate_a0 == 0.25);
}

TEST_CASE("rebalance output is a row subset preserving pool order") {
    const Dataset ds = two_group_dataset(40, 60, 50, 50);
    const Dataset out = rebalance_outcome_rates(ds, 0.3, 0.7, 5);
    for (std::size_t i = 1; i < out.size(); ++i) CHECK(out.row_ids[i] > out.row_ids[i - 1]);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const std::size_t src = static_cast<std::size_t>(out.row_ids[i]);
        CHECK(out.labels[i] == ds.labels[src]);
        CHECK(out.sensitive[i] == ds.sensitive[src]);
        CHECK(out.features.at(i, 0) == ds.features.at(src, 0));
    }
}

TEST_CASE("rebalance with an infeasible rate errors") {
    const Dataset no_pos = two_group_dataset(0, 100, 50, 50);
    CHECK_THROWS_AS(rebalance_outcome_rates(no_pos, 0.9, 0.5, 1), ValidationError);
}

TEST_CASE("rebalance handles the all-positive and all-negative targets") {
    const Dataset ds = two_group_dataset(30, 70, 20, 80);
    const Dataset all_pos = rebalance_outcome_rates(ds, 1.0, 0.0, 3);
    const GroupStats gs = group_stats(all_pos);
    CHECK(gs.m1 == 30);  // every a1 positive, nothing else
    CHECK(gs.m0 == 80);  // every a0 negative
    REQUIRE(gs.pos_rate_a1.has_value());
    CHECK(*gs.pos_rate_a1 == 1.0);
    REQUIRE(gs.pos_rate_a0.has_value());
    CHECK(*gs.pos_rate_a0 == 0.0);
}

TEST_CASE("rebalance is deterministic in the seed") {
    const Dataset ds = two_group_dataset(120, 80, 90, 110);
    const Dataset a = rebalance_outcome_rates(ds, 0.4, 0.6, 42);
    const Dataset b = rebalance_outcome_rates(ds, 0.4, 0.6, 42);
    const Dataset c = rebalance_outcome_rates(ds, 0.4, 0.6, 43);
    CHECK(a.row_ids == b.row_ids);
    CHECK(a.row_ids != c.row_ids);
}

TEST_CASE("synthetic generator hits target rates within 0.03") {
    SyntheticSpec spec;
    spec.n0 = 1000;
    spec.n1 = 1000;
    spec.pos_rate_a0 = 0.1;
    spec.pos_rate_a1 = 0.9;
    const Dataset ds = generate_synthetic(spec, 2024);
    const GroupStats gs = group_stats(ds);
    CHECK(gs.m0 == 1000);
    CHECK(gs.m1 == 1000);
    REQUIRE(gs.pos_rate_a1.has_value());
    REQUIRE(gs.pos_rate_a0.has_value());
    CHECK(std::abs(*gs.pos_rate_a1 - 0.9) < 0.03);
    CHECK(std::abs(*gs.pos_rate_a0 - 0.1) < 0.03);
}

TEST_CASE("synthetic generator is deterministic and appends the group feature") {
    SyntheticSpec spec;
    spec.n0 = 50;
    spec.n1 = 60;
    const Dataset a = generate_synthetic(spec, 5);
    const Dataset b = generate_synthetic(spec, 5);
    CHECK(a.features == b.features);
    CHECK(a.labels == b.labels);
    REQUIRE(a.sensitive_feature_index >= 0);
    const std::size_t sidx = static_cast<std::size_t>(a.sensitive_feature_index);
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(a.features.at(i, sidx) == static_cast<double>(a.sensitive[i]));
}

TEST_CASE("zero-signal population drives held-out error to the label base rate") {
    SyntheticSpec spec;
    spec.n0 = 1200;
    spec.n1 = 1200;
    spec.pos_rate_a0 = 0.2;
    spec.pos_rate_a1 = 0.2;
    spec.signal = 0.0;
    const Dataset pop = generate_synthetic(spec, 31);

    // fit on one half, evaluate on the other
    std::vector<std::size_t> train_rows, eval_rows;
    for (std::size_t i = 0; i < pop.size(); ++i)
        (i % 2 ? train_rows : eval_rows).push_back(i);
    const Dataset train = pop.subset(train_rows);
    const Dataset eval = pop.subset(eval_rows);
    const Model model = fit(make_learner("logreg", 1), train);
    const Predictions pred = predict_batch(model, eval);
    for (std::uint8_t a : {0, 1}) {
        const MaybeDouble zol =
            group_cost(MetricKind::ZOL, pred.labels, eval.labels, eval.sensitive, a);
        REQUIRE(zol.has_value());
        CHECK(std::abs(*zol - 0.2) < 0.05);  // Bayes error = min(rate, 1-rate)
    }
}

TEST_CASE("strong-signal population is nearly separable") {
    SyntheticSpec spec;
    spec.n0 = 600;
    spec.n1 = 600;
    spec.pos_rate_a0 = 0.5;
    spec.pos_rate_a1 = 0.5;
    spec.signal = 6.0;
    const Dataset pop = generate_synthetic(spec, 8);
    std::vector<std::size_t> train_rows, eval_rows;
    for (std::size_t i = 0; i < pop.size(); ++i)
        (i % 2 ? train_rows : eval_rows).push_back(i);
    const Model model = fit(make_learner("logreg", 1), pop.subset(train_rows));
    const Predictions pred = predict_batch(model, pop.subset(eval_rows));
    const Dataset eval = pop.subset(eval_rows);
    std::size_t errors = 0;
    for (std::size_t i = 0; i < eval.size(); ++i)
        errors += pred.labels[i] != eval.labels[i];
    CHECK(static_cast<double>(errors) / static_cast<double>(eval.size()) < 0.05);
}

TEST_CASE("dataset subset preserves ids and metadata") {
    const Dataset ds = two_group_dataset(3, 3, 3, 3);
    const Dataset sub = ds.subset({1, 4, 7});
    REQUIRE(sub.size() == 3);
    CHECK(sub.row_ids == std::vector<std::int64_t>{1, 4, 7});
    CHECK(sub.labels[0] == ds.labels[1]);
    CHECK(sub.sensitive[2] == ds.sensitive[7]);
    CHECK(sub.feature_names == ds.feature_names);
}
