#pragma once

// Structured config parsing and normalization. The schema is strict:
// unknown keys are rejected so typos fail loudly, and the normalized config
// (every field explicit) is echoed into result files for provenance.

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "biasaudit/common.hpp"
#include "biasaudit/experiments.hpp"

namespace biasaudit {

namespace detail {

using nlohmann::json;

inline void reject_unknown(const json& j, const std::set<std::string>& allowed,
                           const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw ValidationError("config: unknown key '" + it.key() + "' in " + where);
}

inline const json& require(const json& j, const std::string& key, const std::string& where) {
    auto it = j.find(key);
    if (it == j.end())
        throw ValidationError("config: missing required key '" + key + "' in " + where);
    return *it;
}

template <class T>
inline T as(const json& j, const std::string& key, const std::string& where) {
    try {
        return j.get<T>();
    } catch (const json::exception&) {
        throw ValidationError("config: key '" + key + "' in " + where +
                              " has the wrong type");
    }
}

template <class T>
inline T get_or(const json& j, const std::string& key, const std::string& where, T fallback) {
    auto it = j.find(key);
    if (it == j.end()) return fallback;
    return as<T>(*it, key, where);
}

inline DataSchema parse_schema(const json& j) {
    if (!j.is_object()) throw ValidationError("config: data.schema must be an object");
    reject_unknown(j,
                   {"label", "positive_label", "sensitive", "privileged_value", "features",
                    "include_sensitive_feature"},
                   "data.schema");
    DataSchema schema;
    schema.label_column = as<std::string>(require(j, "label", "data.schema"), "label", "data.schema");
    schema.positive_label = as<std::string>(require(j, "positive_label", "data.schema"),
                                            "positive_label", "data.schema");
    schema.sensitive_column =
        as<std::string>(require(j, "sensitive", "data.schema"), "sensitive", "data.schema");
    schema.privileged_value = as<std::string>(require(j, "privileged_value", "data.schema"),
                                              "privileged_value", "data.schema");
    schema.include_sensitive_as_feature =
        get_or<bool>(j, "include_sensitive_feature", "data.schema", true);
    const json& feats = require(j, "features", "data.schema");
    if (!feats.is_array() || feats.empty())
        throw ValidationError("config: data.schema.features must be a nonempty array");
    for (const json& f : feats) {
        reject_unknown(f, {"name", "kind"}, "data.schema.features[]");
        FeatureSpec spec;
        spec.name = as<std::string>(require(f, "name", "feature"), "name", "feature");
        const std::string kind = get_or<std::string>(f, "kind", "feature", "numeric");
        if (kind == "numeric")
            spec.kind = FeatureKind::Numeric;
        else if (kind == "categorical")
            spec.kind = FeatureKind::Categorical;
        else
            throw ValidationError("config: feature kind '" + kind +
                                  "' must be numeric or categorical");
        schema.feature_columns.push_back(spec);
    }
    return schema;
}

inline DataConfig parse_data(const json& j, std::uint64_t master_seed) {
    if (!j.is_object()) throw ValidationError("config: data must be an object");
    DataConfig data;
    const std::string source = get_or<std::string>(j, "source", "data", "synthetic");
    if (source == "synthetic") {
        reject_unknown(j,
                       {"source", "n0", "n1", "pos_rate_a0", "pos_rate_a1", "d", "signal",
                        "seed", "rebalance"},
                       "data");
        data.source = DataConfig::Source::Synthetic;
        data.synthetic.n0 = get_or<std::size_t>(j, "n0", "data", data.synthetic.n0);
        data.synthetic.n1 = get_or<std::size_t>(j, "n1", "data", data.synthetic.n1);
        data.synthetic.pos_rate_a0 =
            get_or<double>(j, "pos_rate_a0", "data", data.synthetic.pos_rate_a0);
        data.synthetic.pos_rate_a1 =
            get_or<double>(j, "pos_rate_a1", "data", data.synthetic.pos_rate_a1);
        data.synthetic.d = get_or<std::size_t>(j, "d", "data", data.synthetic.d);
        data.synthetic.signal = get_or<double>(j, "signal", "data", data.synthetic.signal);
        data.synthetic_seed = get_or<std::uint64_t>(j, "seed", "data", master_seed);
    } else if (source == "csv") {
        reject_unknown(j, {"source", "path", "schema", "seed", "rebalance"}, "data");
        data.source = DataConfig::Source::Csv;
        data.csv_path = as<std::string>(require(j, "path", "data"), "path", "data");
        data.schema = parse_schema(require(j, "schema", "data"));
        data.synthetic_seed = get_or<std::uint64_t>(j, "seed", "data", master_seed);
    } else {
        throw ValidationError("config: data.source must be synthetic or csv");
    }
    if (auto it = j.find("rebalance"); it != j.end()) {
        reject_unknown(*it, {"rate_a1", "rate_a0"}, "data.rebalance");
        RebalanceSpec rb;
        rb.rate_a1 = as<double>(require(*it, "rate_a1", "data.rebalance"), "rate_a1",
                                "data.rebalance");
        rb.rate_a0 = as<double>(require(*it, "rate_a0", "data.rebalance"), "rate_a0",
                                "data.rebalance");
        data.rebalance = rb;
    }
    return data;
}

inline LearnerSpec parse_learner(const json& j, std::string& name_out) {
    if (!j.is_object()) throw ValidationError("config: learner must be an object");
    const std::string name = get_or<std::string>(j, "name", "learner", "logreg");
    LearnerSpec spec = make_learner(name);
    name_out = name;
    if (auto* l = std::get_if<LogRegSpec>(&spec.kind)) {
        reject_unknown(j, {"name", "lr", "l2", "max_iters", "tol"}, "learner");
        l->lr = get_or<double>(j, "lr", "learner", l->lr);
        l->l2 = get_or<double>(j, "l2", "learner", l->l2);
        l->max_iters = get_or<std::size_t>(j, "max_iters", "learner", l->max_iters);
        l->tol = get_or<double>(j, "tol", "learner", l->tol);
    } else if (auto* t = std::get_if<TreeSpec>(&spec.kind)) {
        reject_unknown(j, {"name", "max_depth", "min_leaf"}, "learner");
        t->max_depth = get_or<std::size_t>(j, "max_depth", "learner", t->max_depth);
        t->min_leaf = get_or<double>(j, "min_leaf", "learner", t->min_leaf);
    } else if (auto* k = std::get_if<KnnSpec>(&spec.kind)) {
        reject_unknown(j, {"name", "k"}, "learner");
        k->k = get_or<std::size_t>(j, "k", "learner", k->k);
    } else {
        auto& f = std::get<ForestSpec>(spec.kind);
        reject_unknown(j, {"name", "n_trees", "max_depth", "min_leaf", "feature_subsample"},
                       "learner");
        f.n_trees = get_or<std::size_t>(j, "n_trees", "learner", f.n_trees);
        f.max_depth = get_or<std::size_t>(j, "max_depth", "learner", f.max_depth);
        f.min_leaf = get_or<double>(j, "min_leaf", "learner", f.min_leaf);
        f.feature_subsample =
            get_or<std::size_t>(j, "feature_subsample", "learner", f.feature_subsample);
    }
    return spec;
}

}  // namespace detail

inline std::vector<MetricKind> all_metrics() {
    return {MetricKind::FPR, MetricKind::FNR, MetricKind::EO,
            MetricKind::ZOL, MetricKind::SD, MetricKind::AUC};
}

inline ExperimentConfig parse_config(const nlohmann::json& j) {
    using detail::as;
    using detail::get_or;
    using detail::require;
    if (!j.is_object()) throw ValidationError("config: document must be a JSON object");
    detail::reject_unknown(
        j, {"experiment", "data", "learner", "metrics", "sizes", "splits", "split_m",
            "growing_sizes", "fixed_group", "fixed_n", "selective", "repeats", "mitigation",
            "eval", "master_seed", "out"},
        "the top level");

    ExperimentConfig cfg;
    cfg.experiment = experiment_from_name(
        as<std::string>(require(j, "experiment", "the top level"), "experiment", "config"));
    cfg.master_seed = get_or<std::uint64_t>(j, "master_seed", "config", 0);
    cfg.data = detail::parse_data(require(j, "data", "the top level"), cfg.master_seed);
    if (auto it = j.find("learner"); it != j.end())
        cfg.learner = detail::parse_learner(*it, cfg.learner_name_);
    else
        cfg.learner = make_learner(cfg.learner_name_);

    if (auto it = j.find("metrics"); it != j.end()) {
        if (!it->is_array()) throw ValidationError("config: metrics must be an array");
        for (const auto& m : *it)
            cfg.metrics.push_back(
                metric_from_name(as<std::string>(m, "metrics[]", "config")));
    } else {
        cfg.metrics = all_metrics();
    }

    cfg.sizes = get_or<std::vector<std::size_t>>(j, "sizes", "config", {});
    cfg.splits = get_or<std::vector<double>>(j, "splits", "config", {});
    cfg.split_m = get_or<std::size_t>(j, "split_m", "config", 1000);
    cfg.growing_sizes = get_or<std::vector<std::size_t>>(j, "growing_sizes", "config", {});
    const std::string fixed_group = get_or<std::string>(j, "fixed_group", "config", "a1");
    if (fixed_group == "a0")
        cfg.fixed_group = 0;
    else if (fixed_group == "a1")
        cfg.fixed_group = 1;
    else
        throw ValidationError("config: fixed_group must be a0 or a1");
    cfg.fixed_n = get_or<std::size_t>(j, "fixed_n", "config", 100);
    cfg.selective = get_or<bool>(j, "selective", "config", false);
    cfg.repeats = get_or<std::size_t>(
        j, "repeats", "config",
        cfg.experiment == ExperimentKind::Augmentation ? std::size_t{50} : std::size_t{30});

    const std::string mitigation = get_or<std::string>(j, "mitigation", "config", "none");
    if (mitigation == "none")
        cfg.mitigation = MitigationKind::None;
    else if (mitigation == "reweighing")
        cfg.mitigation = MitigationKind::Reweighing;
    else
        throw ValidationError("config: mitigation must be none or reweighing");

    if (auto it = j.find("eval"); it != j.end()) {
        detail::reject_unknown(*it, {"mode", "holdout_fraction"}, "eval");
        const std::string mode = get_or<std::string>(*it, "mode", "eval", "holdout");
        if (mode == "holdout")
            cfg.eval.mode = EvalSpec::Mode::Holdout;
        else if (mode == "full")
            cfg.eval.mode = EvalSpec::Mode::Full;
        else if (mode == "cv")
            cfg.eval.mode = EvalSpec::Mode::Cv;
        else
            throw ValidationError("config: eval.mode must be holdout, full, or cv");
        cfg.eval.holdout_fraction =
            get_or<double>(*it, "holdout_fraction", "eval", cfg.eval.holdout_fraction);
    }
    cfg.out = get_or<std::string>(j, "out", "config", "");
    cfg.validate();
    return cfg;
}

inline nlohmann::json config_to_json(const ExperimentConfig& cfg) {
    nlohmann::json j;
    j["experiment"] = experiment_name(cfg.experiment);
    j["master_seed"] = cfg.master_seed;

    nlohmann::json data;
    if (cfg.data.source == DataConfig::Source::Synthetic) {
        data["source"] = "synthetic";
        data["n0"] = cfg.data.synthetic.n0;
        data["n1"] = cfg.data.synthetic.n1;
        data["pos_rate_a0"] = cfg.data.synthetic.pos_rate_a0;
        data["pos_rate_a1"] = cfg.data.synthetic.pos_rate_a1;
        data["d"] = cfg.data.synthetic.d;
        data["signal"] = cfg.data.synthetic.signal;
    } else {
        data["source"] = "csv";
        data["path"] = cfg.data.csv_path;
        nlohmann::json schema;
        schema["label"] = cfg.data.schema.label_column;
        schema["positive_label"] = cfg.data.schema.positive_label;
        schema["sensitive"] = cfg.data.schema.sensitive_column;
        schema["privileged_value"] = cfg.data.schema.privileged_value;
        schema["include_sensitive_feature"] = cfg.data.schema.include_sensitive_as_feature;
        nlohmann::json feats = nlohmann::json::array();
        for (const auto& f : cfg.data.schema.feature_columns) {
            feats.push_back({{"name", f.name},
                             {"kind", f.kind == FeatureKind::Numeric ? "numeric"
                                                                     : "categorical"}});
        }
        schema["features"] = feats;
        data["schema"] = schema;
    }
    data["seed"] = cfg.data.synthetic_seed;
    if (cfg.data.rebalance) {
        data["rebalance"] = {{"rate_a1", cfg.data.rebalance->rate_a1},
                             {"rate_a0", cfg.data.rebalance->rate_a0}};
    }
    j["data"] = data;

    nlohmann::json learner;
    learner["name"] = cfg.learner_name_;
    if (const auto* l = std::get_if<LogRegSpec>(&cfg.learner.kind)) {
        learner["lr"] = l->lr;
        learner["l2"] = l->l2;
        learner["max_iters"] = l->max_iters;
        learner["tol"] = l->tol;
    } else if (const auto* t = std::get_if<TreeSpec>(&cfg.learner.kind)) {
        learner["max_depth"] = t->max_depth;
        learner["min_leaf"] = t->min_leaf;
    } else if (const auto* k = std::get_if<KnnSpec>(&cfg.learner.kind)) {
        learner["k"] = k->k;
    } else {
        const auto& f = std::get<ForestSpec>(cfg.learner.kind);
        learner["n_trees"] = f.n_trees;
        learner["max_depth"] = f.max_depth;
        learner["min_leaf"] = f.min_leaf;
        learner["feature_subsample"] = f.feature_subsample;
    }
    j["learner"] = learner;

    nlohmann::json metrics = nlohmann::json::array();
    for (MetricKind m : cfg.metrics) metrics.push_back(metric_name(m));
    j["metrics"] = metrics;

    j["sizes"] = cfg.sizes;
    j["splits"] = cfg.splits;
    j["split_m"] = cfg.split_m;
    j["growing_sizes"] = cfg.growing_sizes;
    j["fixed_group"] = cfg.fixed_group ? "a1" : "a0";
    j["fixed_n"] = cfg.fixed_n;
    j["selective"] = cfg.selective;
    j["repeats"] = cfg.repeats;
    j["mitigation"] = cfg.mitigation == MitigationKind::None ? "none" : "reweighing";
    nlohmann::json eval;
    switch (cfg.eval.mode) {
        case EvalSpec::Mode::Holdout: eval["mode"] = "holdout"; break;
        case EvalSpec::Mode::Full: eval["mode"] = "full"; break;
        case EvalSpec::Mode::Cv: eval["mode"] = "cv"; break;
    }
    eval["holdout_fraction"] = cfg.eval.holdout_fraction;
    j["eval"] = eval;
    j["out"] = cfg.out;
    return j;
}

}  // namespace biasaudit
