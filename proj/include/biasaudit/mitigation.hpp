#pragma once

// Pre-processing mitigation: reweighing, plus the data-augmentation
// primitives (random oversampling and synthetic interpolation) that the
// growing-group experiments compare against.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "biasaudit/common.hpp"
#include "biasaudit/dataset.hpp"
#include "biasaudit/rng.hpp"

namespace biasaudit {

// Weights that make the sensitive attribute and the label empirically
// independent: weight(a,y) = P(A=a) P(Y=y) / P(A=a, Y=y), plugged in with
// dataset frequencies. The integer counts behind every cell are retained so
// the factorization n * sum_{rows in (a,y)} w = n_a * n_y can be checked in
// exact arithmetic.
struct ReweighingWeights {
    double weight[2][2] = {{0, 0}, {0, 0}};      // [a][y]
    bool degenerate[2][2] = {{false, false}, {false, false}};  // empty joint cell
    std::int64_t cell_count[2][2] = {{0, 0}, {0, 0}};
    std::int64_t group_count[2] = {0, 0};
    std::int64_t label_count[2] = {0, 0};
    std::int64_t total = 0;
    std::vector<double> row_weights;
};

inline ReweighingWeights reweighing_weights(const Dataset& ds) {
    if (ds.size() == 0) throw ValidationError("reweighing: empty dataset");
    ReweighingWeights w;
    w.total = static_cast<std::int64_t>(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const int a = ds.sensitive[i] ? 1 : 0;
        const int y = ds.labels[i] ? 1 : 0;
        ++w.cell_count[a][y];
        ++w.group_count[a];
        ++w.label_count[y];
    }
    for (int a = 0; a < 2; ++a) {
        for (int y = 0; y < 2; ++y) {
            if (w.cell_count[a][y] == 0) {
                w.degenerate[a][y] = true;
                continue;
            }
            // (n_a/n)(n_y/n) / (n_ay/n) = n_a n_y / (n n_ay)
            w.weight[a][y] =
                static_cast<double>(w.group_count[a]) * static_cast<double>(w.label_count[y]) /
                (static_cast<double>(w.total) * static_cast<double>(w.cell_count[a][y]));
        }
    }
    w.row_weights.resize(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i)
        w.row_weights[i] = w.weight[ds.sensitive[i] ? 1 : 0][ds.labels[i] ? 1 : 0];
    return w;
}

// Duplicates rows uniformly with replacement within each (group, label)
// cell until the cell reaches its target count. Original rows are kept
// unchanged; duplicates get fresh row_ids and point their lineage at the
// duplicated row.
inline Dataset oversample_random(const Dataset& ds, const std::size_t target[2][2],
                                 std::uint64_t seed) {
    std::vector<std::size_t> cell_rows[2][2];
    for (std::size_t i = 0; i < ds.size(); ++i)
        cell_rows[ds.sensitive[i] ? 1 : 0][ds.labels[i] ? 1 : 0].push_back(i);

    std::vector<std::size_t> extra;
    for (int a = 0; a < 2; ++a) {
        for (int y = 0; y < 2; ++y) {
            const std::size_t have = cell_rows[a][y].size();
            const std::size_t want = target[a][y];
            if (want < have)
                throw ValidationError("oversample: target for cell (a" + std::to_string(a) +
                                      ",y" + std::to_string(y) + ") is below its current count");
            if (want == have) continue;
            if (have == 0)
                throw ValidationError("oversample: cell (a" + std::to_string(a) + ",y" +
                                      std::to_string(y) + ") is empty but has a positive target");
            Rng rng(derive_seed(seed, seed_stream::kAugment, static_cast<std::uint64_t>(a * 2 + y)));
            for (std::size_t t = have; t < want; ++t)
                extra.push_back(cell_rows[a][y][rng.below(have)]);
        }
    }

    Dataset out = ds.subset([&] {
        std::vector<std::size_t> rows(ds.size());
        std::iota(rows.begin(), rows.end(), 0);
        rows.insert(rows.end(), extra.begin(), extra.end());
        return rows;
    }());
    std::int64_t next_id = 0;
    for (std::int64_t id : ds.row_ids) next_id = std::max(next_id, id + 1);
    for (std::size_t i = ds.size(); i < out.size(); ++i) {
        out.source_row_ids[i] = ds.row_ids[extra[i - ds.size()]];
        out.row_ids[i] = next_id++;
    }
    std::ostringstream prov;
    prov << ds.provenance << (ds.provenance.empty() ? "" : "; ") << "oversample(+"
         << extra.size() << " rows)";
    out.provenance = prov.str();
    return out;
}

// Synthetic minority-cell rows by convex interpolation: each new row is
// seed + t * (neighbor - seed) with the neighbor uniform among the seed
// row's k nearest same-cell rows and t uniform in [0,1]. Interpolation acts
// on the encoded feature space as-is; one-hot coordinates are not snapped
// back to {0,1}.
inline Dataset smote(const Dataset& ds, std::uint8_t cell_a, std::uint8_t cell_y,
                     std::size_t n_new, std::size_t k, std::uint64_t seed) {
    if (k == 0) throw ValidationError("smote: k must be >= 1");
    std::vector<std::size_t> cell;
    for (std::size_t i = 0; i < ds.size(); ++i)
        if ((ds.sensitive[i] != 0) == (cell_a != 0) && (ds.labels[i] != 0) == (cell_y != 0))
            cell.push_back(i);
    if (cell.size() < k + 1)
        throw ValidationError("smote: cell has " + std::to_string(cell.size()) +
                              " rows; interpolation with k=" + std::to_string(k) +
                              " needs at least " + std::to_string(k + 1));

    const std::size_t d = ds.dim();
    // k nearest same-cell rows per cell row, ordered by (distance^2, index)
    std::vector<std::vector<std::size_t>> neighbors(cell.size());
    std::vector<std::pair<double, std::size_t>> dist;
    for (std::size_t i = 0; i < cell.size(); ++i) {
        dist.clear();
        for (std::size_t j = 0; j < cell.size(); ++j) {
            if (j == i) continue;
            double s = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
                const double v = ds.features.at(cell[i], c) - ds.features.at(cell[j], c);
                s += v * v;
            }
            dist.emplace_back(s, j);
        }
        std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
        for (std::size_t t = 0; t < k; ++t) neighbors[i].push_back(dist[t].second);
    }

    Dataset out = ds;
    out.features = Matrix(ds.size() + n_new, d);
    for (std::size_t i = 0; i < ds.size(); ++i)
        for (std::size_t c = 0; c < d; ++c) out.features.at(i, c) = ds.features.at(i, c);
    std::int64_t next_id = 0;
    for (std::int64_t id : ds.row_ids) next_id = std::max(next_id, id + 1);

    Rng rng(derive_seed(seed, seed_stream::kAugment, 0));
    for (std::size_t s = 0; s < n_new; ++s) {
        const std::size_t i = rng.below(cell.size());
        const std::size_t j = neighbors[i][rng.below(k)];
        const double t = rng.next_double();
        const std::size_t row = ds.size() + s;
        for (std::size_t c = 0; c < d; ++c) {
            const double a = ds.features.at(cell[i], c);
            const double b = ds.features.at(cell[j], c);
            out.features.at(row, c) = a + t * (b - a);
        }
        out.labels.push_back(cell_y ? 1 : 0);
        out.sensitive.push_back(cell_a ? 1 : 0);
        out.row_ids.push_back(next_id++);
        out.source_row_ids.push_back(ds.row_ids[cell[i]]);
    }
    std::ostringstream prov;
    prov << ds.provenance << (ds.provenance.empty() ? "" : "; ") << "smote(+" << n_new
         << " rows in cell a" << int(cell_a ? 1 : 0) << "/y" << int(cell_y ? 1 : 0) << ")";
    out.provenance = prov.str();
    return out;
}

}  // namespace biasaudit
