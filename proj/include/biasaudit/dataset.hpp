#pragma once

// Dataset ingestion and construction.
//
// A Dataset is the immutable universe every sampling protocol draws from:
// an encoded feature matrix, binary labels, a binary sensitive attribute,
// and stable row ids. Categorical features are one-hot encoded; numeric
// features are standardized with the statistics of the ingested data (the
// statistics are retained on the Dataset). Rows with missing values in any
// used column are dropped and counted in the provenance string.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "biasaudit/common.hpp"
#include "biasaudit/csv.hpp"
#include "biasaudit/rng.hpp"

namespace biasaudit {

enum class FeatureKind { Numeric, Categorical };

struct FeatureSpec {
    std::string name;
    FeatureKind kind = FeatureKind::Numeric;
};

struct DataSchema {
    std::string label_column;
    std::string positive_label;
    std::string sensitive_column;
    std::string privileged_value;  // raw value mapped to group a1
    std::vector<FeatureSpec> feature_columns;
    bool include_sensitive_as_feature = true;

    void validate() const {
        if (feature_columns.empty())
            throw ValidationError("schema: at least one feature column required");
        std::set<std::string> seen;
        for (const auto& f : feature_columns) {
            if (f.name == label_column)
                throw ValidationError("schema: label column '" + label_column +
                                      "' also listed as a feature");
            if (f.name == sensitive_column)
                throw ValidationError("schema: sensitive column '" + sensitive_column +
                                      "' also listed as a feature");
            if (!seen.insert(f.name).second)
                throw ValidationError("schema: duplicate feature column '" + f.name + "'");
        }
    }
};

struct GroupStats {
    std::size_t m0 = 0;
    std::size_t m1 = 0;
    MaybeDouble pos_rate_a0;  // undefined when the group is empty
    MaybeDouble pos_rate_a1;
    double group_fraction_a1 = 0.0;  // m1 / (m0 + m1)
};

struct Dataset {
    Matrix features;                    // n x d, finite entries only
    std::vector<std::uint8_t> labels;   // values in {0,1}
    std::vector<std::uint8_t> sensitive;  // 0 = a0, 1 = a1
    std::vector<std::int64_t> row_ids;  // stable identifiers
    std::vector<std::int64_t> source_row_ids;  // lineage; equals row_ids for originals
    std::vector<std::string> feature_names;
    // -1 when the sensitive attribute is not among the features
    std::ptrdiff_t sensitive_feature_index = -1;
    // Standardization statistics of the ingested numeric columns (empty for
    // columns that were not standardized).
    std::vector<double> standardize_mean;
    std::vector<double> standardize_scale;
    std::string provenance;

    std::size_t size() const { return labels.size(); }
    std::size_t dim() const { return features.cols(); }

    void validate() const {
        const std::size_t n = labels.size();
        if (features.rows() != n || sensitive.size() != n || row_ids.size() != n ||
            source_row_ids.size() != n)
            throw ValidationError("dataset: parallel vectors disagree on length");
        if (!feature_names.empty() && feature_names.size() != features.cols())
            throw ValidationError("dataset: feature name count mismatch");
        for (std::uint8_t y : labels)
            if (y > 1) throw ValidationError("dataset: label outside {0,1}");
        for (std::uint8_t a : sensitive)
            if (a > 1) throw ValidationError("dataset: sensitive value outside {a0,a1}");
        for (double v : features.data())
            if (!std::isfinite(v)) throw ValidationError("dataset: non-finite feature value");
    }

    Dataset subset(const std::vector<std::size_t>& rows) const {
        Dataset out;
        out.features = Matrix(rows.size(), features.cols());
        out.labels.reserve(rows.size());
        out.sensitive.reserve(rows.size());
        out.row_ids.reserve(rows.size());
        out.source_row_ids.reserve(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const std::size_t r = rows[i];
            for (std::size_t c = 0; c < features.cols(); ++c)
                out.features.at(i, c) = features.at(r, c);
            out.labels.push_back(labels[r]);
            out.sensitive.push_back(sensitive[r]);
            out.row_ids.push_back(row_ids[r]);
            out.source_row_ids.push_back(source_row_ids[r]);
        }
        out.feature_names = feature_names;
        out.sensitive_feature_index = sensitive_feature_index;
        out.standardize_mean = standardize_mean;
        out.standardize_scale = standardize_scale;
        out.provenance = provenance;
        return out;
    }

    std::vector<std::size_t> rows_in_group(std::uint8_t a) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < size(); ++i)
            if (sensitive[i] == a) out.push_back(i);
        return out;
    }
};

inline GroupStats group_stats(const Dataset& ds) {
    GroupStats gs;
    std::size_t pos0 = 0, pos1 = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (ds.sensitive[i] == 1) {
            ++gs.m1;
            pos1 += ds.labels[i];
        } else {
            ++gs.m0;
            pos0 += ds.labels[i];
        }
    }
    if (gs.m0 > 0) gs.pos_rate_a0 = static_cast<double>(pos0) / static_cast<double>(gs.m0);
    if (gs.m1 > 0) gs.pos_rate_a1 = static_cast<double>(pos1) / static_cast<double>(gs.m1);
    const std::size_t n = gs.m0 + gs.m1;
    gs.group_fraction_a1 = n ? static_cast<double>(gs.m1) / static_cast<double>(n) : 0.0;
    return gs;
}

namespace detail {

inline bool is_missing(const std::string& raw) {
    return raw.empty() || raw == "?";
}

inline std::string strip(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

// Maps the realized raw values of a binary column to {0,1}. Any realized
// value other than `one_value` plus at most one alternative is a validation
// error listing the offenders.
inline std::map<std::string, std::uint8_t> binary_mapping(
    const std::set<std::string>& realized, const std::string& one_value,
    const std::string& column) {
    std::set<std::string> zeros;
    for (const auto& v : realized)
        if (v != one_value) zeros.insert(v);
    if (zeros.size() > 1) {
        std::string msg = "column '" + column + "' is not binary; values besides '" +
                          one_value + "':";
        for (const auto& v : zeros) msg += " '" + v + "'";
        throw ValidationError(msg);
    }
    std::map<std::string, std::uint8_t> mapping;
    for (const auto& v : realized) mapping[v] = (v == one_value) ? 1 : 0;
    return mapping;
}

}  // namespace detail

// Loads and encodes a CSV file according to the schema. Numeric features are
// standardized to zero mean / unit variance with statistics computed from the
// loaded rows; categorical features become one column per realized category
// (named "col=value", categories in sorted order). When the schema asks for
// it, the sensitive attribute is appended as a raw 0/1 feature column.
inline Dataset load_csv(const std::string& path, const DataSchema& schema) {
    schema.validate();
    const CsvTable table = read_csv_file(path);

    const std::size_t label_idx = table.column_index(schema.label_column);
    const std::size_t sens_idx = table.column_index(schema.sensitive_column);
    std::vector<std::size_t> feat_idx;
    for (const auto& f : schema.feature_columns) feat_idx.push_back(table.column_index(f.name));

    // Pass 1: drop rows with missing values in any used column.
    std::vector<std::size_t> kept;
    std::size_t dropped = 0;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        if (row.size() != table.header.size())
            throw ValidationError("csv row " + std::to_string(r + 2) + " has " +
                                  std::to_string(row.size()) + " fields, header has " +
                                  std::to_string(table.header.size()));
        bool missing = detail::is_missing(detail::strip(row[label_idx])) ||
                       detail::is_missing(detail::strip(row[sens_idx]));
        for (std::size_t c : feat_idx)
            missing = missing || detail::is_missing(detail::strip(row[c]));
        if (missing) {
            ++dropped;
        } else {
            kept.push_back(r);
        }
    }
    if (kept.empty()) throw ValidationError("no usable rows in " + path);

    // Pass 2: realized values for binary mappings and categorical vocabularies.
    std::set<std::string> label_vals, sens_vals;
    std::vector<std::set<std::string>> categories(feat_idx.size());
    for (std::size_t r : kept) {
        const auto& row = table.rows[r];
        label_vals.insert(detail::strip(row[label_idx]));
        sens_vals.insert(detail::strip(row[sens_idx]));
        for (std::size_t j = 0; j < feat_idx.size(); ++j)
            if (schema.feature_columns[j].kind == FeatureKind::Categorical)
                categories[j].insert(detail::strip(row[feat_idx[j]]));
    }
    const auto label_map =
        detail::binary_mapping(label_vals, schema.positive_label, schema.label_column);
    const auto sens_map =
        detail::binary_mapping(sens_vals, schema.privileged_value, schema.sensitive_column);

    // Encoded column layout.
    std::vector<std::string> names;
    struct EncodedCol {
        std::size_t src;                 // index into feat_idx
        bool numeric;
        std::string category;            // for one-hot columns
    };
    std::vector<EncodedCol> cols;
    for (std::size_t j = 0; j < feat_idx.size(); ++j) {
        if (schema.feature_columns[j].kind == FeatureKind::Numeric) {
            cols.push_back({j, true, ""});
            names.push_back(schema.feature_columns[j].name);
        } else {
            for (const auto& cat : categories[j]) {
                cols.push_back({j, false, cat});
                names.push_back(schema.feature_columns[j].name + "=" + cat);
            }
        }
    }
    std::ptrdiff_t sens_feature = -1;
    if (schema.include_sensitive_as_feature) {
        sens_feature = static_cast<std::ptrdiff_t>(cols.size());
        names.push_back(schema.sensitive_column);
    }

    Dataset ds;
    const std::size_t n = kept.size();
    const std::size_t d = cols.size() + (sens_feature >= 0 ? 1 : 0);
    ds.features = Matrix(n, d);
    ds.labels.resize(n);
    ds.sensitive.resize(n);
    ds.row_ids.resize(n);
    ds.source_row_ids.resize(n);
    ds.feature_names = names;
    ds.sensitive_feature_index = sens_feature;

    for (std::size_t i = 0; i < n; ++i) {
        const auto& row = table.rows[kept[i]];
        ds.labels[i] = label_map.at(detail::strip(row[label_idx]));
        ds.sensitive[i] = sens_map.at(detail::strip(row[sens_idx]));
        ds.row_ids[i] = static_cast<std::int64_t>(i);
        ds.source_row_ids[i] = static_cast<std::int64_t>(i);
        for (std::size_t c = 0; c < cols.size(); ++c) {
            const std::string raw = detail::strip(row[feat_idx[cols[c].src]]);
            if (cols[c].numeric) {
                try {
                    std::size_t pos = 0;
                    const double v = std::stod(raw, &pos);
                    if (pos != raw.size() || !std::isfinite(v))
                        throw ValidationError("");
                    ds.features.at(i, c) = v;
                } catch (const std::exception&) {
                    throw ValidationError("non-numeric value '" + raw + "' in numeric column '" +
                                          schema.feature_columns[cols[c].src].name + "'");
                }
            } else {
                ds.features.at(i, c) = (raw == cols[c].category) ? 1.0 : 0.0;
            }
        }
        if (sens_feature >= 0)
            ds.features.at(i, static_cast<std::size_t>(sens_feature)) = ds.sensitive[i];
    }

    // Standardize numeric columns in place; retain the statistics.
    ds.standardize_mean.assign(d, 0.0);
    ds.standardize_scale.assign(d, 1.0);
    for (std::size_t c = 0; c < cols.size(); ++c) {
        if (!cols[c].numeric) continue;
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) sum += ds.features.at(i, c);
        const double mean = sum / static_cast<double>(n);
        double sq = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double v = ds.features.at(i, c) - mean;
            sq += v * v;
        }
        // sample variance so the standardized column has sample variance 1
        const double var = n > 1 ? sq / static_cast<double>(n - 1) : 0.0;
        const double scale = var > 1e-24 ? std::sqrt(var) : 1.0;
        for (std::size_t i = 0; i < n; ++i)
            ds.features.at(i, c) = (ds.features.at(i, c) - mean) / scale;
        ds.standardize_mean[c] = mean;
        ds.standardize_scale[c] = scale;
    }

    std::ostringstream prov;
    prov << "load_csv(" << path << "): " << n << " rows kept, " << dropped
         << " rows dropped for missing values";
    ds.provenance = prov.str();
    ds.validate();
    return ds;
}

// Constructs a maximal-size controlled-imbalance version of the dataset:
// per group g with P positives, N negatives and target rate r, the output
// keeps n_g = floor(min(P/r, N/(1-r))) rows with round(r * n_g) positives,
// subsampled uniformly without replacement.
inline Dataset rebalance_outcome_rates(const Dataset& ds, double target_rate_a1,
                                       double target_rate_a0, std::uint64_t seed) {
    auto plan_group = [](std::size_t positives, std::size_t negatives, double rate,
                         const char* group) -> std::pair<std::size_t, std::size_t> {
        if (rate < 0.0 || rate > 1.0)
            throw ValidationError(std::string("rebalance: rate for ") + group +
                                  " outside [0,1]");
        if (rate == 1.0) {
            if (positives == 0)
                throw ValidationError(std::string("rebalance: rate 1 for ") + group +
                                      " requires at least one positive row");
            return {positives, 0};
        }
        if (rate == 0.0) {
            if (negatives == 0)
                throw ValidationError(std::string("rebalance: rate 0 for ") + group +
                                      " requires at least one negative row");
            return {0, negatives};
        }
        if (positives == 0 || negatives == 0)
            throw ValidationError(std::string("rebalance: group ") + group +
                                  " lacks both outcome classes for an interior target rate");
        const double cap = std::min(static_cast<double>(positives) / rate,
                                    static_cast<double>(negatives) / (1.0 - rate));
        const std::size_t n_g = static_cast<std::size_t>(std::floor(cap));
        const std::size_t pos = static_cast<std::size_t>(
            std::floor(rate * static_cast<double>(n_g) + 0.5));
        return {pos, n_g - pos};
    };

    std::vector<std::size_t> keep;
    double realized[2] = {0.0, 0.0};
    for (std::uint8_t a : {std::uint8_t{0}, std::uint8_t{1}}) {
        std::vector<std::size_t> pos_rows, neg_rows;
        for (std::size_t i = 0; i < ds.size(); ++i) {
            if (ds.sensitive[i] != a) continue;
            (ds.labels[i] ? pos_rows : neg_rows).push_back(i);
        }
        const double rate = a ? target_rate_a1 : target_rate_a0;
        const auto [want_pos, want_neg] =
            plan_group(pos_rows.size(), neg_rows.size(), rate, a ? "a1" : "a0");
        Rng rng(derive_seed(seed, seed_stream::kRebalance, a));
        for (std::size_t k : rng.sample_without_replacement(pos_rows.size(), want_pos))
            keep.push_back(pos_rows[k]);
        for (std::size_t k : rng.sample_without_replacement(neg_rows.size(), want_neg))
            keep.push_back(neg_rows[k]);
        const std::size_t n_g = want_pos + want_neg;
        realized[a] = n_g ? static_cast<double>(want_pos) / static_cast<double>(n_g) : 0.0;
    }
    std::sort(keep.begin(), keep.end());
    Dataset out = ds.subset(keep);
    std::ostringstream prov;
    prov << ds.provenance << (ds.provenance.empty() ? "" : "; ")
         << "rebalance(targets a1=" << target_rate_a1 << " a0=" << target_rate_a0
         << ", realized a1=" << realized[1] << " a0=" << realized[0] << ")";
    out.provenance = prov.str();
    return out;
}

struct SyntheticSpec {
    std::size_t n0 = 1000;
    std::size_t n1 = 1000;
    double pos_rate_a0 = 0.5;
    double pos_rate_a1 = 0.5;
    std::size_t d = 4;       // Gaussian feature count (sensitive column is appended)
    double signal = 1.0;     // distance between the class-conditional means
};

// Synthetic population: per-group Bernoulli labels at the stated rates and
// class-conditional Gaussian features N(mu_y, I) with ||mu_1 - mu_0|| equal
// to `signal`, so label recoverability scales with `signal`. The sensitive
// attribute is appended as a raw 0/1 feature column (the learners are meant
// to be able to use it, mirroring the CSV ingestion default).
inline Dataset generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
    if (spec.n0 == 0 || spec.n1 == 0)
        throw ValidationError("generate_synthetic: group counts must be >= 1");
    if (spec.pos_rate_a0 < 0 || spec.pos_rate_a0 > 1 || spec.pos_rate_a1 < 0 ||
        spec.pos_rate_a1 > 1)
        throw ValidationError("generate_synthetic: rates must lie in [0,1]");

    const std::size_t n = spec.n0 + spec.n1;
    const std::size_t d = spec.d + 1;
    const double shift = spec.d ? spec.signal / (2.0 * std::sqrt(static_cast<double>(spec.d)))
                                : 0.0;

    Dataset ds;
    ds.features = Matrix(n, d);
    ds.labels.resize(n);
    ds.sensitive.resize(n);
    ds.row_ids.resize(n);
    ds.source_row_ids.resize(n);
    for (std::size_t j = 0; j < spec.d; ++j)
        ds.feature_names.push_back("x" + std::to_string(j));
    ds.feature_names.push_back("sensitive");
    ds.sensitive_feature_index = static_cast<std::ptrdiff_t>(spec.d);

    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint8_t a = i < spec.n0 ? 0 : 1;
        const double rate = a ? spec.pos_rate_a1 : spec.pos_rate_a0;
        const std::uint8_t y = rng.bernoulli(rate) ? 1 : 0;
        const double mu = y ? shift : -shift;
        for (std::size_t j = 0; j < spec.d; ++j)
            ds.features.at(i, j) = mu + rng.normal();
        ds.features.at(i, spec.d) = a;
        ds.labels[i] = y;
        ds.sensitive[i] = a;
        ds.row_ids[i] = static_cast<std::int64_t>(i);
        ds.source_row_ids[i] = static_cast<std::int64_t>(i);
    }
    std::ostringstream prov;
    prov << "synthetic(n0=" << spec.n0 << ",n1=" << spec.n1 << ",rates=" << spec.pos_rate_a0
         << "/" << spec.pos_rate_a1 << ",d=" << spec.d << ",signal=" << spec.signal
         << ",seed=" << seed << ")";
    ds.provenance = prov.str();
    return ds;
}

}  // namespace biasaudit
