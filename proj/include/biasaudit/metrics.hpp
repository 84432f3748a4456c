#pragma once

// Loss functions, per-group cost metrics, discrimination records, exact
// Mann-Whitney AUC, and sensitive-feature importance measures.
//
// Group costs are conditional means over evaluation rows; when the
// conditioning set is empty the cost carries an undefined marker instead of
// a fabricated value, and aggregation layers skip and count such records.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "biasaudit/common.hpp"
#include "biasaudit/dataset.hpp"
#include "biasaudit/learners.hpp"
#include "biasaudit/rng.hpp"

namespace biasaudit {

enum class MetricKind { FPR, FNR, EO, ZOL, SD, AUC };

inline const char* metric_name(MetricKind m) {
    switch (m) {
        case MetricKind::FPR: return "fpr";
        case MetricKind::FNR: return "fnr";
        case MetricKind::EO: return "eo";
        case MetricKind::ZOL: return "zol";
        case MetricKind::SD: return "sd";
        case MetricKind::AUC: return "auc";
    }
    return "?";
}

inline MetricKind metric_from_name(const std::string& name) {
    if (name == "fpr") return MetricKind::FPR;
    if (name == "fnr") return MetricKind::FNR;
    if (name == "eo") return MetricKind::EO;
    if (name == "zol") return MetricKind::ZOL;
    if (name == "sd") return MetricKind::SD;
    if (name == "auc") return MetricKind::AUC;
    throw ValidationError("unknown metric '" + name +
                          "' (expected fpr, fnr, eo, zol, sd, or auc)");
}

enum class LossKind { SL, AL, ZO };

inline double loss(LossKind kind, double y_hat, double y) {
    switch (kind) {
        case LossKind::SL: return (y_hat - y) * (y_hat - y);
        case LossKind::AL: return std::abs(y_hat - y);
        case LossKind::ZO:
            if (y_hat != 0.0 && y_hat != 1.0)
                throw ValidationError("zero-one loss requires a hard prediction");
            return y_hat == y ? 0.0 : 1.0;
    }
    return 0.0;
}

struct DiscriminationRecord {
    MetricKind metric = MetricKind::SD;
    MaybeDouble cost_a0, cost_a1;
    MaybeDouble disc;  // cost_a1 - cost_a0 when both defined
    std::size_t n_a0 = 0, n_a1 = 0;  // rows the cost conditions on, per group
    bool defined = false;
};

namespace detail {

struct GroupCounts {
    // indexed by group a in {0,1}
    std::int64_t m[2] = {0, 0};        // rows in group
    std::int64_t pos[2] = {0, 0};      // Y=1
    std::int64_t tp[2] = {0, 0};       // Y_hat=1, Y=1
    std::int64_t fp[2] = {0, 0};       // Y_hat=1, Y=0
    std::int64_t pred_pos[2] = {0, 0};  // Y_hat=1
    std::int64_t err[2] = {0, 0};      // Y_hat != Y
};

inline GroupCounts group_counts(const std::vector<std::uint8_t>& labels_hat,
                                const std::vector<std::uint8_t>& labels,
                                const std::vector<std::uint8_t>& sensitive) {
    GroupCounts c;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int a = sensitive[i] ? 1 : 0;
        ++c.m[a];
        c.pos[a] += labels[i];
        c.pred_pos[a] += labels_hat[i];
        if (labels_hat[i] && labels[i]) ++c.tp[a];
        if (labels_hat[i] && !labels[i]) ++c.fp[a];
        if (labels_hat[i] != labels[i]) ++c.err[a];
    }
    return c;
}

inline MaybeDouble ratio(std::int64_t num, std::int64_t den) {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace detail

// Conditional-mean cost of one group (AUC and SD have no single-group cost
// of this shape and are handled by discrimination()).
inline MaybeDouble group_cost(MetricKind metric, const std::vector<std::uint8_t>& labels_hat,
                              const std::vector<std::uint8_t>& labels,
                              const std::vector<std::uint8_t>& sensitive, std::uint8_t a) {
    if (labels_hat.size() != labels.size() || labels.size() != sensitive.size())
        throw ValidationError("group_cost: input vectors differ in length");
    const detail::GroupCounts c = detail::group_counts(labels_hat, labels, sensitive);
    const int g = a ? 1 : 0;
    switch (metric) {
        case MetricKind::FPR: return detail::ratio(c.fp[g], c.m[g] - c.pos[g]);
        case MetricKind::FNR: return detail::ratio(c.pos[g] - c.tp[g], c.pos[g]);
        case MetricKind::EO: return detail::ratio(c.tp[g], c.pos[g]);
        case MetricKind::ZOL: return detail::ratio(c.err[g], c.m[g]);
        case MetricKind::SD: return detail::ratio(c.pred_pos[g], c.m[g]);
        case MetricKind::AUC:
            throw ValidationError("group_cost: AUC is computed via discrimination()");
    }
    return std::nullopt;
}

// Probability that a uniformly random positive outranks a uniformly random
// negative, ties counted 1/2. Computed from doubled midranks so the result
// is a single integer division, identical to brute-force pair enumeration.
inline MaybeDouble auc(const std::vector<double>& scores,
                       const std::vector<std::uint8_t>& labels) {
    if (scores.size() != labels.size())
        throw ValidationError("auc: input vectors differ in length");
    const std::size_t n = scores.size();
    std::int64_t n1 = 0;
    for (std::uint8_t y : labels) n1 += y;
    const std::int64_t n0 = static_cast<std::int64_t>(n) - n1;
    if (n1 == 0 || n0 == 0) return std::nullopt;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t i, std::size_t j) { return scores[i] < scores[j]; });
    // doubled midrank of a tie block over sorted positions [i..j] is i+j+2
    std::int64_t r2_pos = 0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const std::int64_t dm = static_cast<std::int64_t>(i + j) + 2;
        for (std::size_t t = i; t <= j; ++t)
            if (labels[order[t]]) r2_pos += dm;
        i = j + 1;
    }
    const std::int64_t numer2 = r2_pos - n1 * (n1 + 1);
    return static_cast<double>(numer2) / static_cast<double>(2 * n1 * n0);
}

// Full discrimination record for one metric. EO is computed as TPR and the
// FNR difference is its negation, which keeps Disc^EO + Disc^FNR = 0 exact;
// the FNR costs themselves are reported directly, so for FNR the identity
// disc = cost_a1 - cost_a0 holds only to rounding.
inline DiscriminationRecord discrimination(MetricKind metric,
                                           const std::vector<std::uint8_t>& labels_hat,
                                           const std::vector<double>& scores,
                                           const std::vector<std::uint8_t>& labels,
                                           const std::vector<std::uint8_t>& sensitive) {
    const std::size_t n = labels.size();
    if (labels_hat.size() != n || sensitive.size() != n ||
        (metric == MetricKind::AUC && scores.size() != n))
        throw ValidationError("discrimination: input vectors differ in length");

    const detail::GroupCounts c = detail::group_counts(labels_hat, labels, sensitive);
    DiscriminationRecord rec;
    rec.metric = metric;

    auto finish = [&](MaybeDouble c0, MaybeDouble c1, std::size_t n0, std::size_t n1) {
        rec.cost_a0 = c0;
        rec.cost_a1 = c1;
        rec.n_a0 = n0;
        rec.n_a1 = n1;
        if (c0 && c1) rec.disc = *c1 - *c0;
        rec.defined = rec.disc.has_value();
    };

    switch (metric) {
        case MetricKind::FPR:
            finish(detail::ratio(c.fp[0], c.m[0] - c.pos[0]),
                   detail::ratio(c.fp[1], c.m[1] - c.pos[1]),
                   static_cast<std::size_t>(c.m[0] - c.pos[0]),
                   static_cast<std::size_t>(c.m[1] - c.pos[1]));
            break;
        case MetricKind::EO:
            finish(detail::ratio(c.tp[0], c.pos[0]), detail::ratio(c.tp[1], c.pos[1]),
                   static_cast<std::size_t>(c.pos[0]), static_cast<std::size_t>(c.pos[1]));
            break;
        case MetricKind::FNR: {
            const MaybeDouble t0 = detail::ratio(c.tp[0], c.pos[0]);
            const MaybeDouble t1 = detail::ratio(c.tp[1], c.pos[1]);
            rec.cost_a0 = detail::ratio(c.pos[0] - c.tp[0], c.pos[0]);
            rec.cost_a1 = detail::ratio(c.pos[1] - c.tp[1], c.pos[1]);
            rec.n_a0 = static_cast<std::size_t>(c.pos[0]);
            rec.n_a1 = static_cast<std::size_t>(c.pos[1]);
            if (t0 && t1) rec.disc = -(*t1 - *t0);
            rec.defined = rec.disc.has_value();
            break;
        }
        case MetricKind::ZOL:
            finish(detail::ratio(c.err[0], c.m[0]), detail::ratio(c.err[1], c.m[1]),
                   static_cast<std::size_t>(c.m[0]), static_cast<std::size_t>(c.m[1]));
            break;
        case MetricKind::SD:
            finish(detail::ratio(c.pred_pos[0], c.m[0]), detail::ratio(c.pred_pos[1], c.m[1]),
                   static_cast<std::size_t>(c.m[0]), static_cast<std::size_t>(c.m[1]));
            break;
        case MetricKind::AUC: {
            std::vector<double> s0, s1;
            std::vector<std::uint8_t> y0, y1;
            for (std::size_t i = 0; i < n; ++i) {
                if (sensitive[i]) {
                    s1.push_back(scores[i]);
                    y1.push_back(labels[i]);
                } else {
                    s0.push_back(scores[i]);
                    y0.push_back(labels[i]);
                }
            }
            finish(auc(s0, y0), auc(s1, y1), s0.size(), s1.size());
            break;
        }
    }
    return rec;
}

// Mean increase in evaluation zero-one loss when the feature column is
// independently permuted, averaged over `repeats` permutations and clamped
// at zero (a permutation can decrease the loss by chance).
inline double permutation_importance(const Model& model, const Dataset& eval,
                                     std::size_t feature_index, std::size_t repeats,
                                     std::uint64_t seed) {
    if (feature_index >= eval.dim())
        throw ValidationError("permutation_importance: feature index out of range");
    if (repeats == 0) throw ValidationError("permutation_importance: repeats must be >= 1");
    const std::size_t n = eval.size();
    const Predictions base = predict_batch(model, eval);
    std::int64_t base_err = 0;
    for (std::size_t i = 0; i < n; ++i) base_err += base.labels[i] != eval.labels[i];
    const double base_zol = static_cast<double>(base_err) / static_cast<double>(n);

    std::vector<double> column(n);
    for (std::size_t i = 0; i < n; ++i) column[i] = eval.features.at(i, feature_index);
    std::vector<double> row(eval.dim());
    double total = 0.0;
    for (std::size_t r = 0; r < repeats; ++r) {
        Rng rng(derive_seed(seed, seed_stream::kImportance, r));
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        rng.shuffle(perm);
        std::int64_t err = 0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < eval.dim(); ++j) row[j] = eval.features.at(i, j);
            row[feature_index] = column[perm[i]];
            const std::uint8_t lab = model.predict_score(row.data()) >= 0.5 ? 1 : 0;
            err += lab != eval.labels[i];
        }
        total += static_cast<double>(err) / static_cast<double>(n);
    }
    return std::max(0.0, total / static_cast<double>(repeats) - base_zol);
}

// Exact additive attribution of a linear margin: per feature, the mean over
// evaluation rows of |w_j (x_j - mean_j)| with w_j the model's weight on the
// raw (pre-standardization) feature.
inline std::vector<double> linear_attribution(const Model& model, const Dataset& eval) {
    const detail::LogRegModel* lr = model.logreg();
    if (!lr)
        throw ValidationError("linear_attribution: model is not a logistic regression");
    if (eval.dim() != model.dim())
        throw ValidationError("linear_attribution: feature dimension mismatch");
    const std::size_t n = eval.size(), d = eval.dim();
    std::vector<double> mean(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) mean[j] += eval.features.at(i, j);
    for (std::size_t j = 0; j < d; ++j) mean[j] /= static_cast<double>(n);
    std::vector<double> attr(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j)
            attr[j] += std::abs(eval.features.at(i, j) - mean[j]);
    for (std::size_t j = 0; j < d; ++j) {
        const double w = lr->beta[j] / lr->std_.scale[j];
        attr[j] = std::abs(w) * attr[j] / static_cast<double>(n);
    }
    return attr;
}

}  // namespace biasaudit
