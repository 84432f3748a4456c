#pragma once

// Sweep orchestration: size sweeps, group-split sweeps, paired mitigation
// sweeps, and growing-group augmentation sweeps, all over a shared seeded
// replicate grid.
//
// Seeding layout (master_seed = config.master_seed):
//   holdout split        derive_seed(master_seed, kHoldout, 0)
//   replicate (i, r)     derive_seed(master_seed, i, r)      i = sweep index
//   augmentation series  derive_seed(master_seed, 0, r)      nested across sizes
//   learner seed         = the replicate seed (augmentation: further mixed
//                          with the size index via derive_seed(seed, kFit, i))
// Replicates run concurrently; every worker writes only its own slot and all
// aggregation walks slots in index order, so results are independent of the
// thread count.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "biasaudit/common.hpp"
#include "biasaudit/dataset.hpp"
#include "biasaudit/decomposition.hpp"
#include "biasaudit/learners.hpp"
#include "biasaudit/metrics.hpp"
#include "biasaudit/mitigation.hpp"
#include "biasaudit/parallel.hpp"
#include "biasaudit/rng.hpp"
#include "biasaudit/sampling.hpp"

namespace biasaudit {

enum class ExperimentKind { Ssb, Urb, Mitigation, Augmentation };

inline const char* experiment_name(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::Ssb: return "ssb";
        case ExperimentKind::Urb: return "urb";
        case ExperimentKind::Mitigation: return "mitigation";
        case ExperimentKind::Augmentation: return "augmentation";
    }
    return "?";
}

inline ExperimentKind experiment_from_name(const std::string& name) {
    if (name == "ssb") return ExperimentKind::Ssb;
    if (name == "urb") return ExperimentKind::Urb;
    if (name == "mitigation") return ExperimentKind::Mitigation;
    if (name == "augmentation") return ExperimentKind::Augmentation;
    throw ValidationError("unknown experiment '" + name + "'");
}

struct EvalSpec {
    enum class Mode { Holdout, Full, Cv } mode = Mode::Holdout;
    double holdout_fraction = 0.5;
    // cross-validation uses 3 folds of the replicate's own training sample
};

struct RebalanceSpec {
    double rate_a1 = 0.5;
    double rate_a0 = 0.5;
};

struct DataConfig {
    enum class Source { Synthetic, Csv } source = Source::Synthetic;
    SyntheticSpec synthetic;
    std::uint64_t synthetic_seed = 0;
    std::string csv_path;
    DataSchema schema;
    std::optional<RebalanceSpec> rebalance;
};

enum class MitigationKind { None, Reweighing };

struct ExperimentConfig {
    ExperimentKind experiment = ExperimentKind::Ssb;
    DataConfig data;
    LearnerSpec learner;
    std::string learner_name_ = "logreg";
    std::vector<MetricKind> metrics;
    // sweep axes (which one applies depends on the experiment)
    std::vector<std::size_t> sizes;      // ssb; mitigation in size mode
    std::vector<double> splits;          // urb; mitigation in split mode
    std::size_t split_m = 1000;          // fixed total size for split sweeps
    std::vector<std::size_t> growing_sizes;  // augmentation
    std::uint8_t fixed_group = 1;
    std::size_t fixed_n = 100;
    bool selective = false;
    std::size_t repeats = 30;  // augmentation default is 50, set at parse time
    MitigationKind mitigation = MitigationKind::None;
    EvalSpec eval;
    std::uint64_t master_seed = 0;
    std::string out;

    void validate() const {
        if (metrics.empty()) throw ValidationError("config: metric set must be nonempty");
        if (repeats < 1) throw ValidationError("config: repeats must be >= 1");
        switch (experiment) {
            case ExperimentKind::Ssb:
                if (sizes.empty()) throw ValidationError("config: ssb needs a sizes list");
                break;
            case ExperimentKind::Urb:
                if (splits.empty()) throw ValidationError("config: urb needs a splits list");
                break;
            case ExperimentKind::Mitigation:
                if (sizes.empty() == splits.empty())
                    throw ValidationError(
                        "config: mitigation needs exactly one of sizes or splits");
                break;
            case ExperimentKind::Augmentation:
                if (growing_sizes.empty())
                    throw ValidationError("config: augmentation needs growing sizes");
                break;
        }
        for (std::size_t m : sizes)
            if (m < 2) throw ValidationError("config: sample sizes must be >= 2");
        for (double f : splits)
            if (!(f > 0.0 && f < 1.0))
                throw ValidationError("config: split fractions must lie strictly in (0,1)");
        if (!growing_sizes.empty()) {
            std::size_t prev = 0;
            for (std::size_t s : growing_sizes) {
                if (s <= prev)
                    throw ValidationError(
                        "config: growing sizes must be strictly increasing positive integers");
                prev = s;
            }
        }
        if (experiment == ExperimentKind::Urb && split_m < 2)
            throw ValidationError("config: split sweep size must be >= 2");
        if (!(eval.holdout_fraction > 0.0 && eval.holdout_fraction < 1.0) &&
            eval.mode == EvalSpec::Mode::Holdout)
            throw ValidationError("config: holdout fraction must lie strictly in (0,1)");
        learner.validate();
    }
};

struct Summary {
    MaybeDouble mean, stddev, ci_lo, ci_hi;
    std::size_t n_defined = 0;
};

// Mean, sample standard deviation, and 95% normal confidence interval of the
// defined entries; undefined entries are skipped and reflected in n_defined.
inline Summary summarize(const std::vector<MaybeDouble>& values) {
    Summary s;
    double sum = 0.0;
    for (const auto& v : values) {
        if (!v) continue;
        sum += *v;
        ++s.n_defined;
    }
    if (s.n_defined == 0) return s;
    const double n = static_cast<double>(s.n_defined);
    const double mean = sum / n;
    s.mean = mean;
    if (s.n_defined >= 2) {
        double sq = 0.0;
        for (const auto& v : values) {
            if (!v) continue;
            const double d = *v - mean;
            sq += d * d;
        }
        const double sd = std::sqrt(sq / (n - 1.0));
        s.stddev = sd;
        const double half = 1.959963984540054 * sd / std::sqrt(n);
        s.ci_lo = mean - half;
        s.ci_hi = mean + half;
    }
    return s;
}

struct MetricPoint {
    Summary disc;                       // across replicate models
    MaybeDouble mean_cost_a0, mean_cost_a1;
    MaybeDouble main_pred_disc;         // disc of the ensemble main prediction
    MaybeDouble shift_vs_reference;     // SSB / URB value for this index
};

struct IndexResult {
    double index_value = 0.0;  // m, f1, or growing size
    std::size_t degenerate_models = 0;
    std::map<MetricKind, MetricPoint> metrics;
    // LabelMode ensemble decomposition of this index (holdout/full eval only)
    MaybeDouble delta_bias, delta_net_variance, residual_a0, residual_a1;
    // sensitive-feature importance (augmentation sweeps)
    MaybeDouble importance_permutation, importance_linear;
};

struct SweepResult {
    ExperimentConfig config;
    std::string data_provenance;
    std::size_t reference_index = 0;
    std::vector<IndexResult> series;
    std::vector<IndexResult> baseline_series;  // unmitigated arm of paired runs
};

namespace detail {

struct RunContext {
    Dataset population;
    Dataset pool;  // rows available to the samplers
    Dataset eval;  // fixed evaluation set (unused in cv mode)
    double population_f1 = 0.5;
};

inline Dataset materialize_population(const DataConfig& data) {
    Dataset population = data.source == DataConfig::Source::Synthetic
                             ? generate_synthetic(data.synthetic, data.synthetic_seed)
                             : load_csv(data.csv_path, data.schema);
    if (data.rebalance)
        population = rebalance_outcome_rates(population, data.rebalance->rate_a1,
                                             data.rebalance->rate_a0, data.synthetic_seed);
    return population;
}

inline RunContext make_context(const ExperimentConfig& cfg) {
    RunContext ctx;
    ctx.population = materialize_population(cfg.data);
    ctx.population_f1 = group_stats(ctx.population).group_fraction_a1;
    if (cfg.eval.mode == EvalSpec::Mode::Holdout) {
        const std::size_t n = ctx.population.size();
        const std::size_t n_eval =
            round_half_up(cfg.eval.holdout_fraction * static_cast<double>(n));
        if (n_eval == 0 || n_eval >= n)
            throw ValidationError("holdout split leaves an empty side");
        Rng rng(derive_seed(cfg.master_seed, seed_stream::kHoldout, 0));
        const std::vector<std::size_t> eval_rows = rng.sample_without_replacement(n, n_eval);
        std::vector<char> in_eval(n, 0);
        for (std::size_t i : eval_rows) in_eval[i] = 1;
        std::vector<std::size_t> pool_rows;
        pool_rows.reserve(n - n_eval);
        for (std::size_t i = 0; i < n; ++i)
            if (!in_eval[i]) pool_rows.push_back(i);
        ctx.eval = ctx.population.subset(eval_rows);
        ctx.pool = ctx.population.subset(pool_rows);
    } else {
        ctx.pool = ctx.population;
        ctx.eval = ctx.population;  // ignored in cv mode
    }
    return ctx;
}

struct RepOutcome {
    std::map<MetricKind, DiscriminationRecord> records;
    std::vector<std::uint8_t> pred_labels;  // on the shared eval set
    std::vector<double> pred_scores;
    bool degenerate = false;
    MaybeDouble importance_permutation, importance_linear;
};

// Fits on `train` (optionally reweighed) and evaluates either on the shared
// eval set or by 3-fold cross-validation on the training rows themselves.
inline RepOutcome evaluate_replicate(const ExperimentConfig& cfg, const RunContext& ctx,
                                     const Dataset& train, std::uint64_t fit_seed,
                                     std::uint64_t cv_seed,
                                     const std::vector<MetricKind>& metrics) {
    RepOutcome out;
    LearnerSpec spec = cfg.learner;
    spec.seed = fit_seed;

    auto fit_weighted = [&](const Dataset& ds) {
        if (cfg.mitigation == MitigationKind::Reweighing) {
            const ReweighingWeights w = reweighing_weights(ds);
            return fit(spec, ds, &w.row_weights);
        }
        return fit(spec, ds);
    };

    if (cfg.eval.mode == EvalSpec::Mode::Cv) {
        const std::size_t n = train.size();
        if (n < 3) throw ValidationError("cross-validation needs at least 3 training rows");
        Rng rng(derive_seed(cv_seed, seed_stream::kCrossValidation, 0));
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(order);
        std::vector<std::uint8_t> labels_hat(n);
        std::vector<double> scores(n);
        bool degenerate = false;
        for (int fold = 0; fold < 3; ++fold) {
            std::vector<std::size_t> fit_rows, held_rows;
            for (std::size_t j = 0; j < n; ++j)
                (static_cast<int>(j % 3) == fold ? held_rows : fit_rows).push_back(order[j]);
            std::sort(fit_rows.begin(), fit_rows.end());
            const Dataset sub = train.subset(fit_rows);
            const Model model = fit_weighted(sub);
            degenerate = degenerate || model.degenerate();
            const Dataset held = train.subset(held_rows);
            const Predictions p = predict_batch(model, held);
            for (std::size_t j = 0; j < held_rows.size(); ++j) {
                labels_hat[held_rows[j]] = p.labels[j];
                scores[held_rows[j]] = p.scores[j];
            }
        }
        out.degenerate = degenerate;
        for (MetricKind m : metrics)
            out.records[m] = discrimination(m, labels_hat, scores, train.labels, train.sensitive);
        return out;
    }

    const Model model = fit_weighted(train);
    out.degenerate = model.degenerate();
    Predictions p = predict_batch(model, ctx.eval);
    for (MetricKind m : metrics)
        out.records[m] = discrimination(m, p.labels, p.scores, ctx.eval.labels,
                                        ctx.eval.sensitive);
    out.pred_labels = std::move(p.labels);
    out.pred_scores = std::move(p.scores);

    if (cfg.experiment == ExperimentKind::Augmentation &&
        ctx.eval.sensitive_feature_index >= 0) {
        const std::size_t sidx = static_cast<std::size_t>(ctx.eval.sensitive_feature_index);
        out.importance_permutation = permutation_importance(model, ctx.eval, sidx, 5, fit_seed);
        if (const auto* lr = model.logreg(); lr != nullptr)
            out.importance_linear = linear_attribution(model, ctx.eval)[sidx];
    }
    return out;
}

// Aggregates one sweep index's replicate outcomes into an IndexResult
// (without the shift column, which needs the whole sweep).
inline IndexResult aggregate_index(const ExperimentConfig& cfg, const RunContext& ctx,
                                   double index_value,
                                   const std::vector<RepOutcome>& reps) {
    IndexResult res;
    res.index_value = index_value;
    for (const RepOutcome& rep : reps) res.degenerate_models += rep.degenerate;

    const bool shared_eval = cfg.eval.mode != EvalSpec::Mode::Cv;
    std::optional<PredictionTable> table;
    if (shared_eval) {
        PredictionTable t;
        t.mode = DecompMode::Label;
        t.eval_ids = ctx.eval.row_ids;
        t.labels = ctx.eval.labels;
        for (const RepOutcome& rep : reps) {
            t.pred_labels.push_back(rep.pred_labels);
            t.pred_scores.push_back(rep.pred_scores);
        }
        table = std::move(t);
    }

    for (MetricKind m : cfg.metrics) {
        MetricPoint point;
        std::vector<MaybeDouble> discs, costs0, costs1;
        for (const RepOutcome& rep : reps) {
            const DiscriminationRecord& r = rep.records.at(m);
            discs.push_back(r.disc);
            costs0.push_back(r.cost_a0);
            costs1.push_back(r.cost_a1);
        }
        point.disc = summarize(discs);
        point.mean_cost_a0 = summarize(costs0).mean;
        point.mean_cost_a1 = summarize(costs1).mean;
        if (table) {
            const DiscriminationRecord main =
                table_discrimination(*table, m, ctx.eval.sensitive);
            point.main_pred_disc = main.disc;
        }
        res.metrics[m] = point;
    }

    if (table) {
        const DecompositionReport rep =
            aggregate_groups(decompose_points(*table), ctx.eval.sensitive, table->eval_ids);
        res.delta_bias = rep.delta_bias;
        res.delta_net_variance = rep.delta_net_variance;
        res.residual_a0 = rep.group[0].residual;
        res.residual_a1 = rep.group[1].residual;
    }

    std::vector<MaybeDouble> perm, lin;
    for (const RepOutcome& rep : reps) {
        perm.push_back(rep.importance_permutation);
        lin.push_back(rep.importance_linear);
    }
    res.importance_permutation = summarize(perm).mean;
    res.importance_linear = summarize(lin).mean;
    return res;
}

// Fills shift_vs_reference: main-prediction disc at each index minus the
// main-prediction disc at the reference index (exactly 0 at the reference).
inline void apply_reference(std::vector<IndexResult>& series, std::size_t reference) {
    for (IndexResult& idx : series) {
        for (auto& [metric, point] : idx.metrics) {
            const MetricPoint& ref = series[reference].metrics.at(metric);
            if (point.main_pred_disc && ref.main_pred_disc)
                point.shift_vs_reference = *point.main_pred_disc - *ref.main_pred_disc;
        }
    }
}

// One sweep over sized or ratio samples; `arm_mitigation` lets the paired
// mitigation runner reuse identical seeds for both arms.
inline std::vector<IndexResult> run_sweep_arm(const ExperimentConfig& cfg,
                                              const RunContext& ctx,
                                              MitigationKind arm_mitigation) {
    ExperimentConfig arm = cfg;
    arm.mitigation = arm_mitigation;
    const bool split_mode = !cfg.splits.empty();
    const std::size_t n_indices = split_mode ? cfg.splits.size() : cfg.sizes.size();
    std::vector<IndexResult> series;
    series.reserve(n_indices);
    for (std::size_t i = 0; i < n_indices; ++i) {
        std::vector<RepOutcome> reps(cfg.repeats);
        parallel_for(cfg.repeats, [&](std::size_t r) {
            const std::uint64_t seed = derive_seed(cfg.master_seed, i, r);
            const Dataset train =
                split_mode ? sample_ratio(ctx.pool, cfg.split_m, cfg.splits[i], seed)
                           : sample_sized(ctx.pool, cfg.sizes[i], seed);
            reps[r] = evaluate_replicate(arm, ctx, train, seed, seed, cfg.metrics);
        });
        const double value = split_mode ? cfg.splits[i] : static_cast<double>(cfg.sizes[i]);
        series.push_back(aggregate_index(arm, ctx, value, reps));
    }
    return series;
}

inline std::size_t reference_for(const ExperimentConfig& cfg, const RunContext& ctx) {
    if (!cfg.splits.empty()) {
        // split nearest the population's group fraction; first wins on ties
        std::size_t best = 0;
        double best_gap = std::abs(cfg.splits[0] - ctx.population_f1);
        for (std::size_t i = 1; i < cfg.splits.size(); ++i) {
            const double gap = std::abs(cfg.splits[i] - ctx.population_f1);
            if (gap < best_gap) {
                best = i;
                best_gap = gap;
            }
        }
        return best;
    }
    // largest size in the sweep
    std::size_t best = 0;
    for (std::size_t i = 1; i < cfg.sizes.size(); ++i)
        if (cfg.sizes[i] > cfg.sizes[best]) best = i;
    return best;
}

}  // namespace detail

inline SweepResult run_ssb(const ExperimentConfig& cfg) {
    cfg.validate();
    const detail::RunContext ctx = detail::make_context(cfg);
    SweepResult result;
    result.config = cfg;
    result.data_provenance = ctx.population.provenance;
    result.series = detail::run_sweep_arm(cfg, ctx, cfg.mitigation);
    result.reference_index = detail::reference_for(cfg, ctx);
    detail::apply_reference(result.series, result.reference_index);
    return result;
}

inline SweepResult run_urb(const ExperimentConfig& cfg) {
    return run_ssb(cfg);  // the sweep axis is chosen by sizes vs splits
}

// Paired design: the unmitigated arm reruns the identical replicate grid, so
// arm differences are mitigation effects, not sampling noise.
inline SweepResult run_mitigation(const ExperimentConfig& cfg) {
    cfg.validate();
    const detail::RunContext ctx = detail::make_context(cfg);
    SweepResult result;
    result.config = cfg;
    result.data_provenance = ctx.population.provenance;
    result.series = detail::run_sweep_arm(cfg, ctx, MitigationKind::Reweighing);
    result.baseline_series = detail::run_sweep_arm(cfg, ctx, MitigationKind::None);
    result.reference_index = detail::reference_for(cfg, ctx);
    detail::apply_reference(result.series, result.reference_index);
    detail::apply_reference(result.baseline_series, result.reference_index);
    return result;
}

inline SweepResult run_augmentation(const ExperimentConfig& cfg) {
    cfg.validate();
    const detail::RunContext ctx = detail::make_context(cfg);
    const std::size_t n_sizes = cfg.growing_sizes.size();

    // grid[r] holds the whole series of replicate r (samples are nested
    // within a replicate, so the series is drawn in one piece)
    std::vector<std::vector<detail::RepOutcome>> grid(cfg.repeats);
    parallel_for(cfg.repeats, [&](std::size_t r) {
        const std::uint64_t seed = derive_seed(cfg.master_seed, 0, r);
        const std::vector<Dataset> series =
            growing_group_series(ctx.pool, cfg.fixed_group, cfg.fixed_n, cfg.growing_sizes,
                                 cfg.selective, seed);
        grid[r].resize(n_sizes);
        for (std::size_t i = 0; i < n_sizes; ++i) {
            const std::uint64_t fit_seed = derive_seed(seed, seed_stream::kFit, i);
            grid[r][i] =
                detail::evaluate_replicate(cfg, ctx, series[i], fit_seed, seed, cfg.metrics);
        }
    });

    SweepResult result;
    result.config = cfg;
    result.data_provenance = ctx.population.provenance;
    for (std::size_t i = 0; i < n_sizes; ++i) {
        std::vector<detail::RepOutcome> reps;
        reps.reserve(cfg.repeats);
        for (std::size_t r = 0; r < cfg.repeats; ++r) reps.push_back(grid[r][i]);
        result.series.push_back(detail::aggregate_index(
            cfg, ctx, static_cast<double>(cfg.growing_sizes[i]), reps));
    }
    result.reference_index = n_sizes - 1;  // the most balanced endpoint
    detail::apply_reference(result.series, result.reference_index);
    return result;
}

inline SweepResult run_experiment(const ExperimentConfig& cfg) {
    switch (cfg.experiment) {
        case ExperimentKind::Ssb: return run_ssb(cfg);
        case ExperimentKind::Urb: return run_urb(cfg);
        case ExperimentKind::Mitigation: return run_mitigation(cfg);
        case ExperimentKind::Augmentation: return run_augmentation(cfg);
    }
    throw ValidationError("unreachable experiment kind");
}

}  // namespace biasaudit
