#pragma once

// From-scratch, sample-weight-aware classifiers behind one interface:
// fit(spec, train, weights) -> Model, then predict_batch(model, eval).
//
// Conventions shared by every learner:
//   - label tie rule: predict_label(x) = 1  <=>  predict_score(x) >= 0.5
//   - scores lie in [0,1]
//   - a training set whose classes do not both carry positive weight yields
//     a model flagged degenerate that predicts the constant class with score
//     equal to the (weighted) positive fraction
//   - fitting is a pure function of (spec, data, weights, spec.seed)
//
// LogReg and Knn standardize features internally with weighted population
// moments, so fitting with weight w on a row matches fitting with that row
// duplicated w times. Trees are scale-invariant and use raw features.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <variant>
#include <vector>

#include "biasaudit/common.hpp"
#include "biasaudit/dataset.hpp"
#include "biasaudit/rng.hpp"

namespace biasaudit {

struct LogRegSpec {
    double lr = 0.1;
    double l2 = 1e-4;
    std::size_t max_iters = 500;
    double tol = 1e-8;
};

struct TreeSpec {
    std::size_t max_depth = 6;
    double min_leaf = 5.0;  // minimum total weight per child
};

struct KnnSpec {
    std::size_t k = 5;
};

struct ForestSpec {
    std::size_t n_trees = 25;
    std::size_t max_depth = 6;
    double min_leaf = 5.0;
    std::size_t feature_subsample = 0;  // 0 = round(sqrt(d))
};

struct LearnerSpec {
    std::variant<LogRegSpec, TreeSpec, KnnSpec, ForestSpec> kind;
    std::uint64_t seed = 0;

    void validate() const {
        if (const auto* l = std::get_if<LogRegSpec>(&kind)) {
            // max_iters = 0 is legal: it yields the zero-initialized model
            if (l->lr <= 0 || l->l2 < 0 || l->tol < 0)
                throw ValidationError("learner: logreg hyperparameters out of range");
        } else if (const auto* t = std::get_if<TreeSpec>(&kind)) {
            if (t->max_depth == 0 || t->min_leaf <= 0)
                throw ValidationError("learner: tree hyperparameters must be positive");
        } else if (const auto* k = std::get_if<KnnSpec>(&kind)) {
            if (k->k == 0) throw ValidationError("learner: k must be >= 1");
        } else {
            const auto& f = std::get<ForestSpec>(kind);
            if (f.n_trees == 0 || f.max_depth == 0 || f.min_leaf <= 0)
                throw ValidationError("learner: forest hyperparameters must be positive");
        }
    }
};

inline LearnerSpec make_learner(const std::string& name, std::uint64_t seed = 0) {
    LearnerSpec spec;
    spec.seed = seed;
    if (name == "logreg")
        spec.kind = LogRegSpec{};
    else if (name == "tree")
        spec.kind = TreeSpec{};
    else if (name == "knn")
        spec.kind = KnnSpec{};
    else if (name == "forest")
        spec.kind = ForestSpec{};
    else
        throw ValidationError("unknown learner '" + name +
                              "' (expected logreg, tree, knn, or forest)");
    return spec;
}

inline std::string learner_name(const LearnerSpec& spec) {
    if (std::holds_alternative<LogRegSpec>(spec.kind)) return "logreg";
    if (std::holds_alternative<TreeSpec>(spec.kind)) return "tree";
    if (std::holds_alternative<KnnSpec>(spec.kind)) return "knn";
    return "forest";
}

namespace detail {

struct Standardizer {
    std::vector<double> mean, scale;

    // Weighted population moments; an identical-row duplicate and a doubled
    // weight produce identical statistics.
    static Standardizer fit(const Matrix& x, const std::vector<double>& w) {
        const std::size_t n = x.rows(), d = x.cols();
        Standardizer s;
        s.mean.assign(d, 0.0);
        s.scale.assign(d, 1.0);
        double total = 0.0;
        for (double wi : w) total += wi;
        for (std::size_t j = 0; j < d; ++j) {
            double sum = 0.0;
            for (std::size_t i = 0; i < n; ++i) sum += w[i] * x.at(i, j);
            const double mu = sum / total;
            double sq = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double v = x.at(i, j) - mu;
                sq += w[i] * v * v;
            }
            const double var = sq / total;
            s.mean[j] = mu;
            s.scale[j] = var > 1e-24 ? std::sqrt(var) : 1.0;
        }
        return s;
    }

    Matrix apply(const Matrix& x) const {
        Matrix out(x.rows(), x.cols());
        for (std::size_t i = 0; i < x.rows(); ++i)
            for (std::size_t j = 0; j < x.cols(); ++j)
                out.at(i, j) = (x.at(i, j) - mean[j]) / scale[j];
        return out;
    }
};

inline double sigmoid(double z) {
    z = std::clamp(z, -40.0, 40.0);
    return 1.0 / (1.0 + std::exp(-z));
}

struct LogRegModel {
    Standardizer std_;
    std::vector<double> beta;
    double intercept = 0.0;

    double score_row(const double* x) const {
        double z = intercept;
        for (std::size_t j = 0; j < beta.size(); ++j)
            z += beta[j] * (x[j] - std_.mean[j]) / std_.scale[j];
        return sigmoid(z);
    }
};

struct TreeNode {
    // leaf <=> feature < 0; split predicate: x[feature] <= threshold goes left
    std::int32_t feature = -1;
    double threshold = 0.0;
    std::int32_t left = -1, right = -1;
    double score = 0.5;
};

struct TreeModel {
    std::vector<TreeNode> nodes;

    double score_row(const double* x) const {
        std::int32_t i = 0;
        while (nodes[i].feature >= 0)
            i = x[nodes[i].feature] <= nodes[i].threshold ? nodes[i].left : nodes[i].right;
        return nodes[i].score;
    }
};

struct KnnModel {
    Standardizer std_;
    Matrix x;  // standardized training features
    std::vector<std::uint8_t> y;
    std::vector<double> w;
    std::size_t k = 5;

    double score_row(const double* raw) const {
        const std::size_t n = x.rows(), d = x.cols();
        std::vector<double> q(d);
        for (std::size_t j = 0; j < d; ++j)
            q[j] = (raw[j] - std_.mean[j]) / std_.scale[j];
        // neighbor order: squared distance, then training row index
        std::vector<std::pair<double, std::size_t>> dist(n);
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double v = x.at(i, j) - q[j];
                s += v * v;
            }
            dist[i] = {s, i};
        }
        const std::size_t kk = std::min(k, n);
        std::partial_sort(dist.begin(), dist.begin() + kk, dist.end());
        double wsum = 0.0, wpos = 0.0;
        std::size_t pos = 0;
        for (std::size_t t = 0; t < kk; ++t) {
            const std::size_t i = dist[t].second;
            wsum += w[i];
            wpos += w[i] * y[i];
            pos += y[i];
        }
        if (wsum > 0.0) return wpos / wsum;
        return static_cast<double>(pos) / static_cast<double>(kk);
    }
};

struct ForestModel {
    std::vector<TreeModel> trees;

    double score_row(const double* x) const {
        double s = 0.0;
        for (const auto& t : trees) s += t.score_row(x);
        return s / static_cast<double>(trees.size());
    }
};

struct DegenerateModel {
    double score = 0.5;  // weighted positive fraction of the training set
};

// CART with weighted Gini. Split ties break toward the lowest feature index,
// then the lowest threshold (strict-improvement scan in ascending order).
class TreeBuilder {
  public:
    TreeBuilder(const Matrix& x, const std::vector<std::uint8_t>& y,
                const std::vector<double>& w, std::size_t max_depth, double min_leaf,
                const std::vector<std::size_t>& features)
        : x_(x), y_(y), w_(w), max_depth_(max_depth), min_leaf_(min_leaf),
          features_(features) {}

    TreeModel build() {
        std::vector<std::size_t> rows(x_.rows());
        std::iota(rows.begin(), rows.end(), 0);
        TreeModel model;
        grow(model, rows, 0);
        return model;
    }

  private:
    std::int32_t grow(TreeModel& model, std::vector<std::size_t>& rows, std::size_t depth) {
        double w = 0.0, wpos = 0.0;
        for (std::size_t i : rows) {
            w += w_[i];
            wpos += w_[i] * y_[i];
        }
        const std::int32_t id = static_cast<std::int32_t>(model.nodes.size());
        model.nodes.push_back({});
        model.nodes[id].score = (wpos + 1.0) / (w + 2.0);

        const bool pure = wpos == 0.0 || wpos == w;
        if (depth >= max_depth_ || pure || w < 2.0 * min_leaf_) return id;

        std::int32_t best_feature = -1;
        double best_threshold = 0.0, best_cost = std::numeric_limits<double>::infinity();
        std::vector<std::pair<double, std::size_t>> order;
        order.reserve(rows.size());
        for (std::size_t f : features_) {
            order.clear();
            for (std::size_t i : rows) order.emplace_back(x_.at(i, f), i);
            std::sort(order.begin(), order.end());
            double wl = 0.0, wposl = 0.0;
            for (std::size_t t = 0; t + 1 < order.size(); ++t) {
                const std::size_t i = order[t].second;
                wl += w_[i];
                wposl += w_[i] * y_[i];
                if (order[t].first == order[t + 1].first) continue;  // inside a tie block
                const double wr = w - wl, wposr = wpos - wposl;
                if (wl < min_leaf_ || wr < min_leaf_) continue;
                const double cost =
                    wposl * (wl - wposl) / wl + wposr * (wr - wposr) / wr;
                if (cost < best_cost) {
                    best_cost = cost;
                    best_feature = static_cast<std::int32_t>(f);
                    best_threshold = order[t].first;
                }
            }
        }
        if (best_feature < 0) return id;

        std::vector<std::size_t> left, right;
        for (std::size_t i : rows) {
            (x_.at(i, static_cast<std::size_t>(best_feature)) <= best_threshold ? left
                                                                                : right)
                .push_back(i);
        }
        rows.clear();
        rows.shrink_to_fit();
        model.nodes[id].feature = best_feature;
        model.nodes[id].threshold = best_threshold;
        const std::int32_t l = grow(model, left, depth + 1);
        const std::int32_t r = grow(model, right, depth + 1);
        model.nodes[id].left = l;
        model.nodes[id].right = r;
        return id;
    }

    const Matrix& x_;
    const std::vector<std::uint8_t>& y_;
    const std::vector<double>& w_;
    std::size_t max_depth_;
    double min_leaf_;
    std::vector<std::size_t> features_;
};

// n draws with replacement, probability proportional to weight. One uniform
// per draw against the cumulative weight sums.
inline std::vector<std::size_t> weighted_bootstrap(const std::vector<double>& w, std::size_t n,
                                                   Rng& rng) {
    std::vector<double> cum(w.size());
    double run = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        run += w[i];
        cum[i] = run;
    }
    std::vector<std::size_t> out;
    out.reserve(n);
    for (std::size_t t = 0; t < n; ++t) {
        const double u = rng.next_double() * run;
        const auto it = std::upper_bound(cum.begin(), cum.end(), u);
        out.push_back(std::min<std::size_t>(
            static_cast<std::size_t>(it - cum.begin()), w.size() - 1));
    }
    return out;
}

}  // namespace detail

class Model {
  public:
    using State = std::variant<detail::DegenerateModel, detail::LogRegModel, detail::TreeModel,
                               detail::KnnModel, detail::ForestModel>;

    Model(State state, std::size_t dim, bool degenerate)
        : state_(std::move(state)), dim_(dim), degenerate_(degenerate) {}

    std::size_t dim() const { return dim_; }
    bool degenerate() const { return degenerate_; }

    // non-null only for a fitted logistic regression
    const detail::LogRegModel* logreg() const {
        return std::get_if<detail::LogRegModel>(&state_);
    }

    double predict_score(const double* row) const {
        return std::visit(
            [&](const auto& m) -> double {
                using T = std::decay_t<decltype(m)>;
                if constexpr (std::is_same_v<T, detail::DegenerateModel>)
                    return m.score;
                else
                    return m.score_row(row);
            },
            state_);
    }

    std::uint8_t predict_label(const double* row) const {
        return predict_score(row) >= 0.5 ? 1 : 0;
    }

  private:
    State state_;
    std::size_t dim_;
    bool degenerate_;
};

struct Predictions {
    std::vector<std::uint8_t> labels;
    std::vector<double> scores;
};

inline Model fit(const LearnerSpec& spec, const Dataset& train,
                 const std::vector<double>* weights = nullptr) {
    spec.validate();
    const std::size_t n = train.size();
    if (n == 0) throw ValidationError("fit: empty training set");
    std::vector<double> w;
    if (weights) {
        if (weights->size() != n)
            throw ValidationError("fit: weight vector length does not match training set");
        for (double wi : *weights)
            if (!(wi >= 0.0) || !std::isfinite(wi))
                throw ValidationError("fit: weights must be finite and nonnegative");
        w = *weights;
    } else {
        w.assign(n, 1.0);
    }
    double wpos = 0.0, wneg = 0.0;
    for (std::size_t i = 0; i < n; ++i) (train.labels[i] ? wpos : wneg) += w[i];
    if (wpos + wneg <= 0.0)
        throw ValidationError("fit: weights must include a strictly positive entry");
    if (wpos == 0.0 || wneg == 0.0)
        return Model(detail::DegenerateModel{wpos / (wpos + wneg)}, train.dim(), true);

    const Matrix& x = train.features;
    const std::size_t d = train.dim();

    if (const auto* ls = std::get_if<LogRegSpec>(&spec.kind)) {
        detail::LogRegModel m;
        m.std_ = detail::Standardizer::fit(x, w);
        const Matrix xs = m.std_.apply(x);
        m.beta.assign(d, 0.0);
        const double total = wpos + wneg;
        std::vector<double> grad(d);
        for (std::size_t iter = 0; iter < ls->max_iters; ++iter) {
            std::fill(grad.begin(), grad.end(), 0.0);
            double grad_b = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                double z = m.intercept;
                for (std::size_t j = 0; j < d; ++j) z += m.beta[j] * xs.at(i, j);
                const double r = w[i] * (detail::sigmoid(z) - train.labels[i]);
                grad_b += r;
                for (std::size_t j = 0; j < d; ++j) grad[j] += r * xs.at(i, j);
            }
            double gmax = std::abs(grad_b / total);
            for (std::size_t j = 0; j < d; ++j) {
                grad[j] = grad[j] / total + ls->l2 * m.beta[j];  // intercept unpenalized
                gmax = std::max(gmax, std::abs(grad[j]));
            }
            m.intercept -= ls->lr * grad_b / total;
            for (std::size_t j = 0; j < d; ++j) m.beta[j] -= ls->lr * grad[j];
            if (gmax < ls->tol) break;
        }
        return Model(std::move(m), d, false);
    }

    if (const auto* ts = std::get_if<TreeSpec>(&spec.kind)) {
        std::vector<std::size_t> feats(d);
        std::iota(feats.begin(), feats.end(), 0);
        detail::TreeBuilder builder(x, train.labels, w, ts->max_depth, ts->min_leaf, feats);
        return Model(builder.build(), d, false);
    }

    if (const auto* ks = std::get_if<KnnSpec>(&spec.kind)) {
        detail::KnnModel m;
        m.std_ = detail::Standardizer::fit(x, w);
        m.x = m.std_.apply(x);
        m.y = train.labels;
        m.w = w;
        m.k = ks->k;
        return Model(std::move(m), d, false);
    }

    const auto& fs = std::get<ForestSpec>(spec.kind);
    const std::size_t fsub =
        fs.feature_subsample ? std::min(fs.feature_subsample, d)
                             : std::max<std::size_t>(
                                   1, static_cast<std::size_t>(
                                          std::floor(std::sqrt(static_cast<double>(d)) + 0.5)));
    detail::ForestModel m;
    m.trees.reserve(fs.n_trees);
    const std::vector<double> unit(n, 1.0);
    for (std::size_t t = 0; t < fs.n_trees; ++t) {
        Rng rng(derive_seed(spec.seed, seed_stream::kFit, t));
        const std::vector<std::size_t> rows = detail::weighted_bootstrap(w, n, rng);
        const std::vector<std::size_t> feats = rng.sample_without_replacement(d, fsub);
        Matrix bx(rows.size(), d);
        std::vector<std::uint8_t> by(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            for (std::size_t j = 0; j < d; ++j) bx.at(i, j) = x.at(rows[i], j);
            by[i] = train.labels[rows[i]];
        }
        const std::vector<double> bw(rows.size(), 1.0);
        detail::TreeBuilder builder(bx, by, bw, fs.max_depth, fs.min_leaf, feats);
        m.trees.push_back(builder.build());
    }
    return Model(std::move(m), d, false);
}

inline Predictions predict_batch(const Model& model, const Dataset& eval) {
    if (eval.dim() != model.dim())
        throw ValidationError("predict: evaluation feature dimension " +
                              std::to_string(eval.dim()) + " does not match model dimension " +
                              std::to_string(model.dim()));
    Predictions out;
    out.labels.resize(eval.size());
    out.scores.resize(eval.size());
    for (std::size_t i = 0; i < eval.size(); ++i) {
        const double s = model.predict_score(eval.features.row(i));
        out.scores[i] = s;
        out.labels[i] = s >= 0.5 ? 1 : 0;
    }
    return out;
}

}  // namespace biasaudit
