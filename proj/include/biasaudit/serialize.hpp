#pragma once

// Result persistence: a JSON document (schema_version "1") and a flat CSV
// with one row per series x index x metric. Undefined values serialize as
// JSON null / empty CSV cells. Numbers in CSV carry 17 significant digits;
// the JSON writer emits shortest round-trip forms. Both deserialize to the
// identical double.
//
// started_at honors SOURCE_DATE_EPOCH so runs can be made byte-reproducible
// end to end.

#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <sstream>
#include <string>

#include "json.hpp"

#include "biasaudit/config.hpp"
#include "biasaudit/csv.hpp"
#include "biasaudit/experiments.hpp"

namespace biasaudit {

inline std::string started_at_iso() {
    std::time_t t;
    if (const char* env = std::getenv("SOURCE_DATE_EPOCH")) {
        char* end = nullptr;
        const long long v = std::strtoll(env, &end, 10);
        if (!end || *end != '\0')
            throw ValidationError("SOURCE_DATE_EPOCH must be an integer");
        t = static_cast<std::time_t>(v);
    } else {
        t = std::time(nullptr);
    }
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

namespace detail {

inline nlohmann::json maybe_json(const MaybeDouble& v) {
    if (!v) return nullptr;
    return *v;
}

inline nlohmann::json index_to_json(const IndexResult& idx) {
    nlohmann::json j;
    j["index"] = idx.index_value;
    j["degenerate_models"] = idx.degenerate_models;
    nlohmann::json metrics;
    for (const auto& [kind, point] : idx.metrics) {
        nlohmann::json m;
        m["mean_disc"] = maybe_json(point.disc.mean);
        m["std_disc"] = maybe_json(point.disc.stddev);
        m["ci_lo"] = maybe_json(point.disc.ci_lo);
        m["ci_hi"] = maybe_json(point.disc.ci_hi);
        m["n_defined"] = point.disc.n_defined;
        m["mean_cost_a0"] = maybe_json(point.mean_cost_a0);
        m["mean_cost_a1"] = maybe_json(point.mean_cost_a1);
        m["main_pred_disc"] = maybe_json(point.main_pred_disc);
        m["shift_vs_reference"] = maybe_json(point.shift_vs_reference);
        metrics[metric_name(kind)] = m;
    }
    j["metrics"] = metrics;
    j["decomposition"] = {{"delta_bias", maybe_json(idx.delta_bias)},
                          {"delta_net_variance", maybe_json(idx.delta_net_variance)},
                          {"residual_a0", maybe_json(idx.residual_a0)},
                          {"residual_a1", maybe_json(idx.residual_a1)}};
    j["importance"] = {{"permutation", maybe_json(idx.importance_permutation)},
                       {"linear", maybe_json(idx.importance_linear)}};
    return j;
}

inline std::string maybe_cell(const MaybeDouble& v) {
    return v ? format_double(*v) : std::string{};
}

}  // namespace detail

inline nlohmann::json result_to_json(const SweepResult& result) {
    nlohmann::json j;
    j["schema_version"] = "1";
    j["started_at"] = started_at_iso();
    j["config"] = config_to_json(result.config);
    j["data_provenance"] = result.data_provenance;
    j["reference_index"] = result.reference_index;
    nlohmann::json series = nlohmann::json::array();
    for (const IndexResult& idx : result.series) series.push_back(detail::index_to_json(idx));
    j["series"] = series;
    if (!result.baseline_series.empty()) {
        nlohmann::json baseline = nlohmann::json::array();
        for (const IndexResult& idx : result.baseline_series)
            baseline.push_back(detail::index_to_json(idx));
        j["baseline_series"] = baseline;
    }
    return j;
}

inline std::string result_to_csv(const SweepResult& result) {
    std::ostringstream os;
    write_csv_row(os, {"series", "index", "metric", "mean_disc", "std_disc", "ci_lo", "ci_hi",
                       "n_defined", "mean_cost_a0", "mean_cost_a1", "main_pred_disc",
                       "shift_vs_reference", "delta_bias", "delta_net_variance",
                       "residual_a0", "residual_a1", "importance_permutation",
                       "importance_linear", "degenerate_models"});
    auto emit = [&](const char* arm, const std::vector<IndexResult>& series) {
        for (const IndexResult& idx : series) {
            for (const auto& [kind, point] : idx.metrics) {
                write_csv_row(
                    os,
                    {arm, format_double(idx.index_value), metric_name(kind),
                     detail::maybe_cell(point.disc.mean), detail::maybe_cell(point.disc.stddev),
                     detail::maybe_cell(point.disc.ci_lo), detail::maybe_cell(point.disc.ci_hi),
                     std::to_string(point.disc.n_defined),
                     detail::maybe_cell(point.mean_cost_a0),
                     detail::maybe_cell(point.mean_cost_a1),
                     detail::maybe_cell(point.main_pred_disc),
                     detail::maybe_cell(point.shift_vs_reference),
                     detail::maybe_cell(idx.delta_bias),
                     detail::maybe_cell(idx.delta_net_variance),
                     detail::maybe_cell(idx.residual_a0), detail::maybe_cell(idx.residual_a1),
                     detail::maybe_cell(idx.importance_permutation),
                     detail::maybe_cell(idx.importance_linear),
                     std::to_string(idx.degenerate_models)});
            }
        }
    };
    emit("main", result.series);
    if (!result.baseline_series.empty()) emit("baseline", result.baseline_series);
    return os.str();
}

}  // namespace biasaudit
