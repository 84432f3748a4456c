#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "biasaudit/learners.hpp"
#include "biasaudit/dataset.hpp"
#include "testing_util.hpp"

using namespace biasaudit;

namespace {

// 1-D separable problem: negatives clustered at -2, positives at +2
Dataset separable_1d(std::size_t per_class = 20) {
    std::vector<std::vector<double>> rows;
    std::vector<std::uint8_t> labels, sens;
    Rng rng(404);
    for (std::size_t i = 0; i < per_class; ++i) {
        rows.push_back({-2.0 + 0.1 * rng.next_double()});
        labels.push_back(0);
        sens.push_back(i % 2);
        rows.push_back({2.0 + 0.1 * rng.next_double()});
        labels.push_back(1);
        sens.push_back(i % 2);
    }
    return testutil::make_dataset(rows, labels, sens);
}

Dataset random_dataset(std::size_t n, std::size_t d, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::vector<double>> rows;
    std::vector<std::uint8_t> labels, sens;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> row;
        for (std::size_t j = 0; j < d; ++j) row.push_back(rng.normal());
        const bool y = row[0] + 0.5 * rng.normal() > 0;
        rows.push_back(row);
        labels.push_back(y ? 1 : 0);
        sens.push_back(rng.bernoulli(0.5) ? 1 : 0);
    }
    return testutil::make_dataset(rows, labels, sens);
}

// duplicates row i weight[i] times
Dataset duplicate_by_weights(const Dataset& ds, const std::vector<std::size_t>& times) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < ds.size(); ++i)
        for (std::size_t c = 0; c < times[i]; ++c) rows.push_back(i);
    return ds.subset(rows);
}

}  // namespace

TEST_CASE("logreg separates a separable problem with zero training error") {
    const Dataset train = separable_1d();
    const Model model = fit(make_learner("logreg", 1), train);
    const Predictions pred = predict_batch(model, train);
    for (std::size_t i = 0; i < train.size(); ++i)
        REQUIRE(pred.labels[i] == train.labels[i]);
}

TEST_CASE("logreg with zero iterations scores one half everywhere") {
    const Dataset train = separable_1d();
    LearnerSpec spec = make_learner("logreg", 1);
    std::get<LogRegSpec>(spec.kind).max_iters = 0;
    const Model model = fit(spec, train);
    const Predictions pred = predict_batch(model, train);
    for (double s : pred.scores) CHECK(s == 0.5);
    for (std::uint8_t l : pred.labels) CHECK(l == 1);  // 0.5 ties predict positive
}

TEST_CASE("logreg integer weights equal row duplication") {
    const Dataset base = random_dataset(40, 3, 71);
    std::vector<std::size_t> times;
    Rng rng(5);
    for (std::size_t i = 0; i < base.size(); ++i) times.push_back(1 + rng.below(3));
    const Dataset dup = duplicate_by_weights(base, times);
    std::vector<double> weights;
    for (std::size_t t : times) weights.push_back(static_cast<double>(t));

    const Model weighted = fit(make_learner("logreg", 1), base, &weights);
    const Model duplicated = fit(make_learner("logreg", 1), dup);

    const Dataset probe = random_dataset(30, 3, 99);
    const Predictions pw = predict_batch(weighted, probe);
    const Predictions pd = predict_batch(duplicated, probe);
    for (std::size_t i = 0; i < probe.size(); ++i)
        CHECK(std::abs(pw.scores[i] - pd.scores[i]) < 1e-9);
}

TEST_CASE("tree integer weights equal row duplication bitwise") {
    const Dataset base = random_dataset(60, 4, 13);
    std::vector<std::size_t> times;
    Rng rng(6);
    for (std::size_t i = 0; i < base.size(); ++i) times.push_back(1 + rng.below(4));
    const Dataset dup = duplicate_by_weights(base, times);
    std::vector<double> weights;
    for (std::size_t t : times) weights.push_back(static_cast<double>(t));

    const Model weighted = fit(make_learner("tree", 1), base, &weights);
    const Model duplicated = fit(make_learner("tree", 1), dup);

    const Dataset probe = random_dataset(50, 4, 100);
    const Predictions pw = predict_batch(weighted, probe);
    const Predictions pd = predict_batch(duplicated, probe);
    // every quantity in the split search is an integer-valued double, so the
    // two fits share identical structure and leaf fractions
    for (std::size_t i = 0; i < probe.size(); ++i) CHECK(pw.scores[i] == pd.scores[i]);
}

TEST_CASE("tree fits a threshold concept exactly") {
    std::vector<std::vector<double>> rows;
    std::vector<std::uint8_t> labels;
    for (int i = 0; i < 40; ++i) {
        rows.push_back({static_cast<double>(i)});
        labels.push_back(i >= 20 ? 1 : 0);
    }
    const Dataset train =
        testutil::make_dataset(rows, labels, std::vector<std::uint8_t>(40, 0));
    TreeSpec tspec;
    tspec.min_leaf = 1.0;
    LearnerSpec spec;
    spec.kind = tspec;
    const Model model = fit(spec, train);
    const Predictions pred = predict_batch(model, train);
    for (std::size_t i = 0; i < train.size(); ++i) CHECK(pred.labels[i] == train.labels[i]);
}

TEST_CASE("knn with k=1 returns the nearest row's label") {
    const Dataset train = testutil::make_dataset(
        {{0.0, 0.0}, {1.0, 1.0}, {4.0, 4.0}, {5.0, 5.0}}, {0, 0, 1, 1}, {0, 0, 1, 1});
    LearnerSpec spec;
    spec.kind = KnnSpec{1};
    const Model model = fit(spec, train);
    const Predictions pred = predict_batch(model, train);
    for (std::size_t i = 0; i < train.size(); ++i) {
        CHECK(pred.labels[i] == train.labels[i]);
        CHECK((pred.scores[i] == 0.0 || pred.scores[i] == 1.0));
    }
}

TEST_CASE("knn score is the neighbor positive fraction") {
    // probe at origin; 5 nearest of 6 rows are labels 1,1,1,0,0
    const Dataset train = testutil::make_dataset(
        {{0.1}, {0.2}, {0.3}, {0.4}, {0.5}, {9.0}}, {1, 1, 1, 0, 0, 0}, {0, 0, 0, 1, 1, 1});
    LearnerSpec spec;
    spec.kind = KnnSpec{5};
    const Model model = fit(spec, train);
    const Dataset probe = testutil::make_dataset({{0.0}}, {0}, {0});
    const Predictions pred = predict_batch(model, probe);
    CHECK(std::abs(pred.scores[0] - 0.6) < 1e-12);
    CHECK(pred.labels[0] == 1);
}

TEST_CASE("knn weighted vote follows the weights") {
    const Dataset train =
        testutil::make_dataset({{0.1}, {0.2}, {0.3}}, {1, 0, 0}, {0, 0, 0});
    std::vector<double> weights{6.0, 1.0, 1.0};
    LearnerSpec spec;
    spec.kind = KnnSpec{3};
    const Model model = fit(spec, train, &weights);
    const Dataset probe = testutil::make_dataset({{0.0}}, {0}, {0});
    const Predictions pred = predict_batch(model, probe);
    CHECK(std::abs(pred.scores[0] - 0.75) < 1e-12);  // 6/(6+1+1)
}

TEST_CASE("forest with one tree equals the manually bootstrapped tree") {
    const Dataset train = random_dataset(80, 3, 55);
    ForestSpec fspec;
    fspec.n_trees = 1;
    fspec.feature_subsample = 3;  // all features, isolating the bootstrap
    LearnerSpec spec;
    spec.kind = fspec;
    spec.seed = 2024;
    const Model forest = fit(spec, train);

    // replicate the internal draw: bootstrap rows first, then the feature subset
    Rng rng(derive_seed(2024, seed_stream::kFit, 0));
    const std::vector<double> unit(train.size(), 1.0);
    const std::vector<std::size_t> rows =
        detail::weighted_bootstrap(unit, train.size(), rng);
    (void)rng.sample_without_replacement(train.dim(), 3);
    const Dataset boot = train.subset(rows);
    TreeSpec tspec;
    tspec.max_depth = fspec.max_depth;
    tspec.min_leaf = fspec.min_leaf;
    LearnerSpec tree_spec;
    tree_spec.kind = tspec;
    const Model tree = fit(tree_spec, boot);

    const Dataset probe = random_dataset(40, 3, 66);
    const Predictions pf = predict_batch(forest, probe);
    const Predictions pt = predict_batch(tree, probe);
    for (std::size_t i = 0; i < probe.size(); ++i) CHECK(pf.scores[i] == pt.scores[i]);
}

TEST_CASE("forest prediction is deterministic in the seed") {
    const Dataset train = random_dataset(100, 4, 3);
    LearnerSpec spec = make_learner("forest", 77);
    const Model a = fit(spec, train);
    const Model b = fit(spec, train);
    spec.seed = 78;
    const Model c = fit(spec, train);
    const Dataset probe = random_dataset(30, 4, 4);
    const Predictions pa = predict_batch(a, probe);
    const Predictions pb = predict_batch(b, probe);
    const Predictions pc = predict_batch(c, probe);
    bool identical = true, any_diff = false;
    for (std::size_t i = 0; i < probe.size(); ++i) {
        identical = identical && pa.scores[i] == pb.scores[i];
        any_diff = any_diff || pa.scores[i] != pc.scores[i];
    }
    CHECK(identical);
    CHECK(any_diff);
}

TEST_CASE("single-class training yields a flagged degenerate constant model") {
    const Dataset all_pos = testutil::make_dataset({{1.0}, {2.0}, {3.0}},
                                                   {1, 1, 1}, {0, 1, 0});
    for (const char* name : {"logreg", "tree", "knn", "forest"}) {
        const Model model = fit(make_learner(name, 1), all_pos);
        CHECK(model.degenerate());
        const Predictions pred = predict_batch(model, all_pos);
        for (std::size_t i = 0; i < 3; ++i) {
            CHECK(pred.labels[i] == 1);
            CHECK(pred.scores[i] == 1.0);  // class prior of an all-positive set
        }
    }
    const Dataset all_neg = testutil::make_dataset({{1.0}, {2.0}}, {0, 0}, {0, 1});
    const Model model = fit(make_learner("tree", 1), all_neg);
    CHECK(model.degenerate());
    const Predictions pred = predict_batch(model, all_neg);
    CHECK(pred.labels[0] == 0);
    CHECK(pred.scores[0] == 0.0);
}

TEST_CASE("zero weight on one class makes the fit degenerate") {
    const Dataset ds = testutil::make_dataset({{1.0}, {2.0}, {3.0}}, {1, 1, 0}, {0, 0, 1});
    std::vector<double> weights{1.0, 1.0, 0.0};
    const Model model = fit(make_learner("logreg", 1), ds, &weights);
    CHECK(model.degenerate());
}

TEST_CASE("weight vectors are validated") {
    const Dataset ds = testutil::make_dataset({{1.0}, {2.0}}, {1, 0}, {0, 1});
    std::vector<double> bad_len{1.0};
    CHECK_THROWS_AS(fit(make_learner("logreg", 1), ds, &bad_len), ValidationError);
    std::vector<double> negative{1.0, -0.5};
    CHECK_THROWS_AS(fit(make_learner("logreg", 1), ds, &negative), ValidationError);
    std::vector<double> all_zero{0.0, 0.0};
    CHECK_THROWS_AS(fit(make_learner("logreg", 1), ds, &all_zero), ValidationError);
}

TEST_CASE("labels always agree with the half threshold on scores") {
    const Dataset train = random_dataset(60, 3, 17);
    const Dataset probe = random_dataset(60, 3, 18);
    for (const char* name : {"logreg", "tree", "knn", "forest"}) {
        const Model model = fit(make_learner(name, 9), train);
        const Predictions pred = predict_batch(model, probe);
        for (std::size_t i = 0; i < probe.size(); ++i) {
            CHECK(pred.scores[i] >= 0.0);
            CHECK(pred.scores[i] <= 1.0);
            CHECK(pred.labels[i] == (pred.scores[i] >= 0.5 ? 1 : 0));
        }
    }
}

TEST_CASE("prediction rejects mismatched feature dimensions") {
    const Dataset train = random_dataset(30, 3, 1);
    const Dataset wrong = random_dataset(10, 2, 2);
    const Model model = fit(make_learner("tree", 1), train);
    CHECK_THROWS_AS(predict_batch(model, wrong), ValidationError);
}

TEST_CASE("make_learner knows the four names and rejects others") {
    CHECK(learner_name(make_learner("logreg")) == "logreg");
    CHECK(learner_name(make_learner("tree")) == "tree");
    CHECK(learner_name(make_learner("knn")) == "knn");
    CHECK(learner_name(make_learner("forest")) == "forest");
    CHECK_THROWS_AS(make_learner("svm"), ValidationError);
}

TEST_CASE("learner spec validation rejects nonpositive hyperparameters") {
    LearnerSpec spec = make_learner("logreg");
    std::get<LogRegSpec>(spec.kind).lr = 0.0;
    CHECK_THROWS_AS(spec.validate(), ValidationError);
    spec = make_learner("knn");
    std::get<KnnSpec>(spec.kind).k = 0;
    CHECK_THROWS_AS(spec.validate(), ValidationError);
    spec = make_learner("tree");
    std::get<TreeSpec>(spec.kind).max_depth = 0;
    CHECK_THROWS_AS(spec.validate(), ValidationError);
    spec = make_learner("forest");
    std::get<ForestSpec>(spec.kind).n_trees = 0;
    CHECK_THROWS_AS(spec.validate(), ValidationError);
}

TEST_CASE("standardization keeps constant features harmless") {
    const Dataset train = testutil::make_dataset(
        {{5.0, -1.0}, {5.0, 1.0}, {5.0, -1.2}, {5.0, 0.8}}, {0, 1, 0, 1}, {0, 0, 1, 1});
    const Model model = fit(make_learner("logreg", 1), train);
    const Predictions pred = predict_batch(model, train);
    for (double s : pred.scores) {
        CHECK(std::isfinite(s));
        CHECK(s >= 0.0);
        CHECK(s <= 1.0);
    }
    for (std::size_t i = 0; i < train.size(); ++i)
        CHECK(pred.labels[i] == train.labels[i]);  // second feature separates
}
