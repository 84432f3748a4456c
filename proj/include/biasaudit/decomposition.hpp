#pragma once

// Replicate prediction tables, pointwise and group-level loss
// decompositions, and the size/representation bias estimators built on top
// of them.
//
// The working assumption throughout is zero noise: the observed label is
// taken to be the optimal prediction, so every table's loss splits into a
// bias part (main prediction vs label) and a net-variance part (replicate
// scatter around the main prediction, sign-flipped where the main
// prediction is already wrong).
//
// Two modes:
//   LabelMode: main prediction = per-point majority label (exact half vote
//              goes to 1, the same tie rule the learners use); bias is 0/1;
//              net variance = (1-2*bias) * disagreement fraction. Mean
//              replicate zero-one loss = bias + net variance, an integer
//              identity.
//   ScoreMode: main prediction = per-point mean score; bias = squared error
//              of the mean; net variance = mean squared deviation from the
//              mean. Mean replicate squared loss = bias + variance.

#include <cstdint>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "biasaudit/common.hpp"
#include "biasaudit/csv.hpp"
#include "biasaudit/dataset.hpp"
#include "biasaudit/learners.hpp"
#include "biasaudit/metrics.hpp"

namespace biasaudit {

enum class DecompMode { Label, Score };

inline const char* decomp_mode_name(DecompMode m) {
    return m == DecompMode::Label ? "label" : "score";
}

struct PredictionTable {
    DecompMode mode = DecompMode::Label;
    std::vector<std::int64_t> eval_ids;             // length n
    std::vector<std::uint8_t> labels;               // length n, the zero-noise optimum
    std::vector<std::vector<std::uint8_t>> pred_labels;  // k rows of length n
    std::vector<std::vector<double>> pred_scores;        // k rows of length n

    std::size_t n() const { return labels.size(); }
    std::size_t k() const {
        return mode == DecompMode::Label ? pred_labels.size() : pred_scores.size();
    }

    void validate() const {
        const std::size_t points = n();
        if (eval_ids.size() != points)
            throw ValidationError("prediction table: id column length mismatch");
        for (std::uint8_t y : labels)
            if (y > 1) throw ValidationError("prediction table: label outside {0,1}");
        const auto& active_k =
            mode == DecompMode::Label ? pred_labels.size() : pred_scores.size();
        if (active_k == 0)
            throw ValidationError("prediction table: needs at least one replicate row");
        for (const auto& row : pred_labels) {
            if (row.size() != points)
                throw ValidationError("prediction table: replicate row length mismatch");
            for (std::uint8_t p : row)
                if (p > 1)
                    throw ValidationError("prediction table: prediction outside {0,1}");
        }
        for (const auto& row : pred_scores) {
            if (row.size() != points)
                throw ValidationError("prediction table: replicate row length mismatch");
            for (double s : row)
                if (!(s >= 0.0 && s <= 1.0))
                    throw ValidationError("prediction table: score outside [0,1]");
        }
        if (!pred_labels.empty() && !pred_scores.empty() &&
            pred_labels.size() != pred_scores.size())
            throw ValidationError("prediction table: label and score row counts differ");
    }
};

// Evaluates each model once on the shared eval set. Both hard labels and
// scores are retained so one table serves either mode.
inline PredictionTable build_table(const std::vector<Model>& models, const Dataset& eval,
                                   DecompMode mode) {
    if (models.empty()) throw ValidationError("build_table: no models given");
    PredictionTable table;
    table.mode = mode;
    table.eval_ids = eval.row_ids;
    table.labels = eval.labels;
    table.pred_labels.reserve(models.size());
    table.pred_scores.reserve(models.size());
    for (const Model& m : models) {
        Predictions p = predict_batch(m, eval);
        table.pred_labels.push_back(std::move(p.labels));
        table.pred_scores.push_back(std::move(p.scores));
    }
    return table;
}

inline std::vector<double> main_prediction(const PredictionTable& table) {
    table.validate();
    const std::size_t n = table.n(), k = table.k();
    std::vector<double> main(n);
    if (table.mode == DecompMode::Label) {
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t votes = 0;
            for (std::size_t r = 0; r < k; ++r) votes += table.pred_labels[r][i];
            main[i] = 2 * votes >= k ? 1.0 : 0.0;
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            double sum = 0.0;
            for (std::size_t r = 0; r < k; ++r) sum += table.pred_scores[r][i];
            main[i] = sum / static_cast<double>(k);
        }
    }
    return main;
}

struct PointDecomposition {
    DecompMode mode = DecompMode::Label;
    std::vector<double> main;
    std::vector<double> noise;  // identically zero under the zero-noise assumption
    std::vector<double> bias;
    std::vector<double> variance;
    std::vector<double> net_variance;
    std::vector<double> mean_loss;  // per-point mean replicate loss (ZO or SL)
};

inline PointDecomposition decompose_points(const PredictionTable& table) {
    table.validate();
    const std::size_t n = table.n(), k = table.k();
    PointDecomposition out;
    out.mode = table.mode;
    out.main.resize(n);
    out.noise.assign(n, 0.0);
    out.bias.resize(n);
    out.variance.resize(n);
    out.net_variance.resize(n);
    out.mean_loss.resize(n);
    const double dk = static_cast<double>(k);
    if (table.mode == DecompMode::Label) {
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t votes = 0;
            for (std::size_t r = 0; r < k; ++r) votes += table.pred_labels[r][i];
            const bool main = 2 * votes >= k;
            const bool bias = main != (table.labels[i] != 0);
            const std::size_t disagree = main ? k - votes : votes;
            const std::size_t errors = table.labels[i] ? k - votes : votes;
            out.main[i] = main ? 1.0 : 0.0;
            out.bias[i] = bias ? 1.0 : 0.0;
            out.variance[i] = static_cast<double>(disagree) / dk;
            out.net_variance[i] = bias ? -out.variance[i] : out.variance[i];
            out.mean_loss[i] = static_cast<double>(errors) / dk;
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            double sum = 0.0;
            for (std::size_t r = 0; r < k; ++r) sum += table.pred_scores[r][i];
            const double main = sum / dk;
            double sq = 0.0, lo = 0.0;
            for (std::size_t r = 0; r < k; ++r) {
                const double s = table.pred_scores[r][i];
                sq += (s - main) * (s - main);
                lo += (s - table.labels[i]) * (s - table.labels[i]);
            }
            const double b = (main - table.labels[i]) * (main - table.labels[i]);
            out.main[i] = main;
            out.bias[i] = b;
            out.variance[i] = sq / dk;
            out.net_variance[i] = out.variance[i];
            out.mean_loss[i] = lo / dk;
        }
    }
    return out;
}

struct GroupAggregate {
    std::size_t count = 0;
    MaybeDouble noise, bias, net_variance, loss;
    MaybeDouble residual;  // |loss - (noise + bias + net_variance)|
};

struct DecompositionReport {
    DecompMode mode = DecompMode::Label;
    std::vector<std::int64_t> eval_ids;  // echo of the table, for pairing checks
    GroupAggregate group[2];             // index 0 = a0, 1 = a1
    MaybeDouble delta_noise, delta_bias, delta_net_variance;  // a1 - a0
};

inline DecompositionReport aggregate_groups(const PointDecomposition& points,
                                            const std::vector<std::uint8_t>& sensitive,
                                            std::vector<std::int64_t> eval_ids = {}) {
    const std::size_t n = points.bias.size();
    if (sensitive.size() != n)
        throw ValidationError("aggregate_groups: sensitive vector length mismatch");
    DecompositionReport rep;
    rep.mode = points.mode;
    rep.eval_ids = std::move(eval_ids);
    double sum_b[2] = {0, 0}, sum_v[2] = {0, 0}, sum_l[2] = {0, 0};
    std::size_t count[2] = {0, 0};
    for (std::size_t i = 0; i < n; ++i) {
        const int a = sensitive[i] ? 1 : 0;
        sum_b[a] += points.bias[i];
        sum_v[a] += points.net_variance[i];
        sum_l[a] += points.mean_loss[i];
        ++count[a];
    }
    for (int a = 0; a < 2; ++a) {
        rep.group[a].count = count[a];
        if (count[a] == 0) continue;
        const double m = static_cast<double>(count[a]);
        rep.group[a].noise = 0.0;
        rep.group[a].bias = sum_b[a] / m;
        rep.group[a].net_variance = sum_v[a] / m;
        rep.group[a].loss = sum_l[a] / m;
        rep.group[a].residual = std::abs(*rep.group[a].loss - (*rep.group[a].noise +
                                                               *rep.group[a].bias +
                                                               *rep.group[a].net_variance));
    }
    if (count[0] && count[1]) {
        rep.delta_noise = 0.0;
        rep.delta_bias = *rep.group[1].bias - *rep.group[0].bias;
        rep.delta_net_variance = *rep.group[1].net_variance - *rep.group[0].net_variance;
    }
    return rep;
}

// Disparity of the ensemble's expected loss: loss_a1 - loss_a0. By the
// decomposition this equals delta_bias + delta_net_variance up to the
// recorded residuals.
inline MaybeDouble ensemble_loss_disc(const DecompositionReport& rep) {
    if (!rep.group[0].loss || !rep.group[1].loss) return std::nullopt;
    return *rep.group[1].loss - *rep.group[0].loss;
}

// Metric discrimination of the table's main prediction (hard labels via the
// shared 0.5 tie rule; the main prediction itself serves as the score).
inline DiscriminationRecord table_discrimination(const PredictionTable& table,
                                                 MetricKind metric,
                                                 const std::vector<std::uint8_t>& sensitive) {
    const std::vector<double> main = main_prediction(table);
    std::vector<std::uint8_t> hard(main.size());
    for (std::size_t i = 0; i < main.size(); ++i) hard[i] = main[i] >= 0.5 ? 1 : 0;
    return discrimination(metric, hard, main, table.labels, sensitive);
}

// Difference of two discrimination records of the same metric: the bias of
// measuring at the probe configuration instead of at the reference.
inline MaybeDouble discrimination_shift(const DiscriminationRecord& probe,
                                        const DiscriminationRecord& reference) {
    if (probe.metric != reference.metric)
        throw ValidationError("discrimination shift: metric mismatch");
    if (!probe.disc || !reference.disc) return std::nullopt;
    return *probe.disc - *reference.disc;
}

// Size bias of a discrimination estimate: value at sample size m minus the
// value at the largest available size M.
inline MaybeDouble ssb_estimate(const DiscriminationRecord& at_m,
                                const DiscriminationRecord& at_largest) {
    return discrimination_shift(at_m, at_largest);
}

// Representation bias: value at a group split minus the value at the
// population split.
inline MaybeDouble urb_estimate(const DiscriminationRecord& at_split,
                                const DiscriminationRecord& at_population) {
    return discrimination_shift(at_split, at_population);
}

struct ShiftDecomposition {
    MaybeDouble bias_term;      // (B1m - B1M) - (B0m - B0M)
    MaybeDouble variance_term;  // same with net variance
    MaybeDouble total;          // bias_term + variance_term
};

// Splits the change in loss disparity between two ensembles (size m vs the
// reference size M, or a group split vs the population split) into a bias
// part and a net-variance part. Their sum matches the direct difference of
// the two ensembles' loss disparities up to the recorded residuals.
inline ShiftDecomposition ssb_decomposition(const DecompositionReport& at_probe,
                                            const DecompositionReport& at_reference) {
    if (at_probe.mode != at_reference.mode)
        throw ValidationError("shift decomposition: reports use different modes");
    if (!at_probe.eval_ids.empty() && !at_reference.eval_ids.empty() &&
        at_probe.eval_ids != at_reference.eval_ids)
        throw ValidationError("shift decomposition: reports come from different eval sets");
    for (int a = 0; a < 2; ++a)
        if (at_probe.group[a].count != at_reference.group[a].count)
            throw ValidationError("shift decomposition: group sizes differ between reports");
    ShiftDecomposition out;
    if (!at_probe.delta_bias || !at_reference.delta_bias) return out;
    out.bias_term = *at_probe.delta_bias - *at_reference.delta_bias;
    out.variance_term = *at_probe.delta_net_variance - *at_reference.delta_net_variance;
    out.total = *out.bias_term + *out.variance_term;
    return out;
}

// ---------------------------------------------------------------------------
// CSV persistence. Layout, one evaluation point per row:
//   eval_id,y,sensitive,mode,pred_0..pred_{k-1},score_0..score_{k-1}
// The mode column repeats the table mode on every row; either replicate
// block may be absent, but the block the mode needs must be present.

inline void write_prediction_table(std::ostream& os, const PredictionTable& table,
                                   const std::vector<std::uint8_t>& sensitive) {
    table.validate();
    if (sensitive.size() != table.n())
        throw ValidationError("prediction table: sensitive vector length mismatch");
    std::vector<std::string> header = {"eval_id", "y", "sensitive", "mode"};
    for (std::size_t r = 0; r < table.pred_labels.size(); ++r)
        header.push_back("pred_" + std::to_string(r));
    for (std::size_t r = 0; r < table.pred_scores.size(); ++r)
        header.push_back("score_" + std::to_string(r));
    write_csv_row(os, header);
    for (std::size_t i = 0; i < table.n(); ++i) {
        std::vector<std::string> row;
        row.push_back(std::to_string(table.eval_ids[i]));
        row.push_back(std::to_string(static_cast<int>(table.labels[i])));
        row.push_back(std::to_string(static_cast<int>(sensitive[i])));
        row.push_back(decomp_mode_name(table.mode));
        for (const auto& preds : table.pred_labels)
            row.push_back(std::to_string(static_cast<int>(preds[i])));
        for (const auto& scores : table.pred_scores)
            row.push_back(format_double(scores[i]));
        write_csv_row(os, row);
    }
}

struct LoadedTable {
    PredictionTable table;
    std::vector<std::uint8_t> sensitive;
};

inline LoadedTable read_prediction_table(std::istream& is) {
    const CsvTable csv = parse_csv(is);
    const std::size_t id_col = csv.column_index("eval_id");
    const std::size_t y_col = csv.column_index("y");
    const std::size_t a_col = csv.column_index("sensitive");
    const std::size_t mode_col = csv.column_index("mode");
    std::vector<std::size_t> pred_cols, score_cols;
    for (std::size_t r = 0;; ++r) {
        const std::string name = "pred_" + std::to_string(r);
        if (!csv.has_column(name)) break;
        pred_cols.push_back(csv.column_index(name));
    }
    for (std::size_t r = 0;; ++r) {
        const std::string name = "score_" + std::to_string(r);
        if (!csv.has_column(name)) break;
        score_cols.push_back(csv.column_index(name));
    }
    if (csv.rows.empty())
        throw ValidationError("prediction table: no data rows");

    auto parse_bit = [](const std::string& raw, const char* what) -> std::uint8_t {
        if (raw == "0") return 0;
        if (raw == "1") return 1;
        throw ValidationError(std::string("prediction table: ") + what + " value '" + raw +
                              "' is not 0/1");
    };

    LoadedTable out;
    const std::string mode_raw = csv.rows.front()[mode_col];
    if (mode_raw == "label")
        out.table.mode = DecompMode::Label;
    else if (mode_raw == "score")
        out.table.mode = DecompMode::Score;
    else
        throw ValidationError("prediction table: unknown mode '" + mode_raw + "'");
    out.table.pred_labels.resize(pred_cols.size());
    out.table.pred_scores.resize(score_cols.size());

    for (const auto& row : csv.rows) {
        if (row.size() != csv.header.size())
            throw ValidationError("prediction table: ragged csv row");
        if (row[mode_col] != mode_raw)
            throw ValidationError("prediction table: mode column is not constant");
        out.table.eval_ids.push_back(std::stoll(row[id_col]));
        out.table.labels.push_back(parse_bit(row[y_col], "label"));
        out.sensitive.push_back(parse_bit(row[a_col], "sensitive"));
        for (std::size_t r = 0; r < pred_cols.size(); ++r)
            out.table.pred_labels[r].push_back(parse_bit(row[pred_cols[r]], "prediction"));
        for (std::size_t r = 0; r < score_cols.size(); ++r) {
            const double s = std::stod(row[score_cols[r]]);
            if (!(s >= 0.0 && s <= 1.0))
                throw ValidationError("prediction table: score outside [0,1]");
            out.table.pred_scores[r].push_back(s);
        }
    }
    out.table.validate();
    return out;
}

}  // namespace biasaudit
