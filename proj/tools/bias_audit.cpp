// Command-line front end for the bias audit library.
//
// Exit codes: 0 success; 1 validation error (message on stderr, no output
// written); 2 runtime failure (partial output files removed).

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "biasaudit/config.hpp"
#include "biasaudit/decomposition.hpp"
#include "biasaudit/experiments.hpp"
#include "biasaudit/serialize.hpp"

namespace {

using biasaudit::ValidationError;

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> repeats;
    std::optional<std::string> out;
    std::optional<std::string> learner;
    std::optional<std::string> metrics;  // comma list
    std::optional<std::string> sizes;    // a:b:step or comma list
    std::optional<std::string> splits;   // comma list
    std::string format = "json";
};

std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream is(s);
    while (std::getline(is, item, ',')) out.push_back(item);
    return out;
}

nlohmann::json parse_sizes_flag(const std::string& raw) {
    nlohmann::json sizes = nlohmann::json::array();
    if (raw.find(':') != std::string::npos) {
        unsigned long long a = 0, b = 0, step = 0;
        char extra = 0;
        if (std::sscanf(raw.c_str(), "%llu:%llu:%llu%c", &a, &b, &step, &extra) != 3 ||
            step == 0 || a > b)
            throw ValidationError("--sizes expects a:b:step with step >= 1 and a <= b, got '" +
                                  raw + "'");
        for (unsigned long long m = a; m <= b; m += step) sizes.push_back(m);
    } else {
        for (const std::string& tok : split_commas(raw)) {
            try {
                std::size_t pos = 0;
                const unsigned long long v = std::stoull(tok, &pos);
                if (pos != tok.size()) throw std::invalid_argument(tok);
                sizes.push_back(v);
            } catch (const std::exception&) {
                throw ValidationError("--sizes list contains a bad token '" + tok + "'");
            }
        }
    }
    return sizes;
}

nlohmann::json load_config_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open config file '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("config file '" + path + "' is not valid JSON: " + e.what());
    }
    return j;
}

nlohmann::json patched_config(const std::string& config_path, const std::string& experiment,
                              const Overrides& ov) {
    nlohmann::json j = load_config_file(config_path);
    if (!j.is_object()) throw ValidationError("config: document must be a JSON object");
    if (j.contains("experiment") && j["experiment"] != experiment)
        throw ValidationError("config file is for experiment '" +
                              j["experiment"].get<std::string>() +
                              "', but the subcommand expects '" + experiment + "'");
    j["experiment"] = experiment;
    if (ov.seed) {
        // a data seed that defaulted to the old master seed follows the override
        if (j.contains("data") && j["data"].is_object() && !j["data"].contains("seed"))
            j["data"]["seed"] = *ov.seed;
        j["master_seed"] = *ov.seed;
    }
    if (ov.repeats) j["repeats"] = *ov.repeats;
    if (ov.out) j["out"] = *ov.out;
    if (ov.learner) j["learner"] = {{"name", *ov.learner}};
    if (ov.metrics) {
        nlohmann::json metrics = nlohmann::json::array();
        for (const std::string& tok : split_commas(*ov.metrics)) metrics.push_back(tok);
        j["metrics"] = metrics;
    }
    if (ov.sizes) j["sizes"] = parse_sizes_flag(*ov.sizes);
    if (ov.splits) {
        nlohmann::json splits = nlohmann::json::array();
        for (const std::string& tok : split_commas(*ov.splits)) {
            try {
                std::size_t pos = 0;
                const double v = std::stod(tok, &pos);
                if (pos != tok.size()) throw std::invalid_argument(tok);
                splits.push_back(v);
            } catch (const std::exception&) {
                throw ValidationError("--splits list contains a bad token '" + tok + "'");
            }
        }
        j["splits"] = splits;
    }
    return j;
}

std::string csv_sibling_path(const std::string& json_path) {
    const std::string suffix = ".json";
    if (json_path.size() > suffix.size() &&
        json_path.compare(json_path.size() - suffix.size(), suffix.size(), suffix) == 0)
        return json_path.substr(0, json_path.size() - suffix.size()) + ".csv";
    return json_path + ".csv";
}

// Files are registered before their first byte lands so a failed write is
// cleaned up along with everything already emitted.
struct OutputSet {
    std::vector<std::string> written;

    void write(const std::string& path, const std::string& content) {
        written.push_back(path);
        std::ofstream os(path, std::ios::binary);
        if (!os) throw std::runtime_error("cannot open output file '" + path + "'");
        os << content;
        os.flush();
        if (!os.good()) throw std::runtime_error("failed writing output file '" + path + "'");
    }

    void remove_all() {
        for (const std::string& path : written) std::remove(path.c_str());
    }
};

void emit_result(const biasaudit::SweepResult& result, const std::string& format,
                 OutputSet& outputs) {
    const std::string& out = result.config.out;
    if (out.empty())
        throw ValidationError("no output path given (use --out or the config's out field)");
    if (format == "json") {
        outputs.write(out, biasaudit::result_to_json(result).dump(2) + "\n");
    } else if (format == "csv") {
        outputs.write(out, biasaudit::result_to_csv(result));
    } else if (format == "both") {
        outputs.write(out, biasaudit::result_to_json(result).dump(2) + "\n");
        outputs.write(csv_sibling_path(out), biasaudit::result_to_csv(result));
    } else {
        throw ValidationError("--format must be json, csv, or both");
    }
}

int run_experiment_command(const std::string& config_path, const std::string& experiment,
                           const Overrides& ov, OutputSet& outputs) {
    const nlohmann::json j = patched_config(config_path, experiment, ov);
    const biasaudit::ExperimentConfig cfg = biasaudit::parse_config(j);
    if (cfg.out.empty())
        throw ValidationError("no output path given (use --out or the config's out field)");
    if (ov.format != "json" && ov.format != "csv" && ov.format != "both")
        throw ValidationError("--format must be json, csv, or both");
    const biasaudit::SweepResult result = biasaudit::run_experiment(cfg);
    emit_result(result, ov.format, outputs);
    return 0;
}

std::vector<std::uint8_t> read_sensitive_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open sensitive file '" + path + "'");
    std::vector<std::uint8_t> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line == "0")
            out.push_back(0);
        else if (line == "1")
            out.push_back(1);
        else
            throw ValidationError("sensitive file line '" + line + "' is not 0 or 1");
    }
    if (out.empty()) throw ValidationError("sensitive file '" + path + "' is empty");
    return out;
}

biasaudit::LoadedTable load_table(const std::string& table_path,
                                  const std::string& sensitive_path,
                                  const std::string& mode) {
    std::ifstream in(table_path, std::ios::binary);
    if (!in) throw ValidationError("cannot open table file '" + table_path + "'");
    biasaudit::LoadedTable loaded = biasaudit::read_prediction_table(in);
    if (!sensitive_path.empty()) {
        loaded.sensitive = read_sensitive_file(sensitive_path);
        if (loaded.sensitive.size() != loaded.table.n())
            throw ValidationError("sensitive file has " +
                                  std::to_string(loaded.sensitive.size()) +
                                  " entries, table has " + std::to_string(loaded.table.n()));
    }
    if (mode == "label")
        loaded.table.mode = biasaudit::DecompMode::Label;
    else if (mode == "score")
        loaded.table.mode = biasaudit::DecompMode::Score;
    else if (!mode.empty())
        throw ValidationError("--mode must be label or score");
    loaded.table.validate();
    return loaded;
}

nlohmann::json maybe_json(const biasaudit::MaybeDouble& v) {
    if (!v) return nullptr;
    return *v;
}

int run_decompose(const std::string& table_path, const std::string& sensitive_path,
                  const std::string& mode, const std::string& out_path, OutputSet& outputs) {
    const biasaudit::LoadedTable loaded = load_table(table_path, sensitive_path, mode);
    const biasaudit::DecompositionReport report = biasaudit::aggregate_groups(
        biasaudit::decompose_points(loaded.table), loaded.sensitive, loaded.table.eval_ids);

    nlohmann::json j;
    j["schema_version"] = "1";
    j["started_at"] = biasaudit::started_at_iso();
    j["mode"] = biasaudit::decomp_mode_name(report.mode);
    j["replicates"] = loaded.table.k();
    j["points"] = loaded.table.n();
    for (int a = 0; a < 2; ++a) {
        nlohmann::json g;
        const biasaudit::GroupAggregate& agg = report.group[a];
        g["count"] = agg.count;
        g["noise"] = maybe_json(agg.noise);
        g["bias"] = maybe_json(agg.bias);
        g["net_variance"] = maybe_json(agg.net_variance);
        g["loss"] = maybe_json(agg.loss);
        g["residual"] = maybe_json(agg.residual);
        j["groups"][a ? "a1" : "a0"] = g;
    }
    j["deltas"] = {{"noise", maybe_json(report.delta_noise)},
                   {"bias", maybe_json(report.delta_bias)},
                   {"net_variance", maybe_json(report.delta_net_variance)}};
    const std::string doc = j.dump(2) + "\n";
    if (out_path.empty())
        std::cout << doc;
    else
        outputs.write(out_path, doc);
    return 0;
}

int run_metrics(const std::string& table_path, const std::string& sensitive_path,
                const std::string& mode, const std::string& metric_list,
                const std::string& out_path, OutputSet& outputs) {
    const biasaudit::LoadedTable loaded = load_table(table_path, sensitive_path, mode);
    std::vector<biasaudit::MetricKind> metrics;
    if (metric_list.empty()) {
        metrics = biasaudit::all_metrics();
    } else {
        for (const std::string& tok : split_commas(metric_list))
            metrics.push_back(biasaudit::metric_from_name(tok));
    }
    const std::size_t k = loaded.table.k();
    const bool have_labels = !loaded.table.pred_labels.empty();
    const bool have_scores = !loaded.table.pred_scores.empty();

    nlohmann::json j;
    j["schema_version"] = "1";
    j["started_at"] = biasaudit::started_at_iso();
    j["replicates"] = k;
    j["points"] = loaded.table.n();
    for (biasaudit::MetricKind m : metrics) {
        const bool needs_scores = m == biasaudit::MetricKind::AUC;
        nlohmann::json entry;
        if ((needs_scores && !have_scores) || (!needs_scores && !have_labels)) {
            entry["error"] = needs_scores ? "table has no score rows" : "table has no label rows";
            j["metrics"][biasaudit::metric_name(m)] = entry;
            continue;
        }
        const biasaudit::DiscriminationRecord main =
            biasaudit::table_discrimination(loaded.table, m, loaded.sensitive);
        entry["main_pred"] = {{"cost_a0", maybe_json(main.cost_a0)},
                              {"cost_a1", maybe_json(main.cost_a1)},
                              {"disc", maybe_json(main.disc)},
                              {"n_a0", main.n_a0},
                              {"n_a1", main.n_a1}};
        std::vector<biasaudit::MaybeDouble> discs;
        for (std::size_t r = 0; r < k; ++r) {
            std::vector<std::uint8_t> labels_hat;
            std::vector<double> scores;
            if (have_labels) labels_hat = loaded.table.pred_labels[r];
            if (have_scores)
                scores = loaded.table.pred_scores[r];
            else
                scores.assign(loaded.table.n(), 0.0);
            if (!have_labels) {
                labels_hat.resize(loaded.table.n());
                for (std::size_t i = 0; i < loaded.table.n(); ++i)
                    labels_hat[i] = scores[i] >= 0.5 ? 1 : 0;
            }
            discs.push_back(biasaudit::discrimination(m, labels_hat, scores,
                                                      loaded.table.labels, loaded.sensitive)
                                .disc);
        }
        const biasaudit::Summary s = biasaudit::summarize(discs);
        entry["replicates"] = {{"mean_disc", maybe_json(s.mean)},
                               {"std_disc", maybe_json(s.stddev)},
                               {"n_defined", s.n_defined}};
        j["metrics"][biasaudit::metric_name(m)] = entry;
    }
    const std::string doc = j.dump(2) + "\n";
    if (out_path.empty())
        std::cout << doc;
    else
        outputs.write(out_path, doc);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Audit how training-set size and group representation distort "
                 "discrimination measurements"};
    app.require_subcommand(1);

    Overrides ov;
    std::string config_path;
    std::string table_path, sensitive_path, table_mode, metric_list, out_path;

    auto add_experiment = [&](const std::string& name, const std::string& help) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config_path, "config file (JSON)")->required();
        sub->add_option("--seed", ov.seed, "master seed override");
        sub->add_option("--repeats", ov.repeats, "replicates per sweep index");
        sub->add_option("--out", ov.out, "output path override");
        sub->add_option("--learner", ov.learner, "learner override (logreg|tree|knn|forest)");
        sub->add_option("--metrics", ov.metrics, "comma-separated metric list");
        sub->add_option("--sizes", ov.sizes, "sizes override: a:b:step or comma list");
        sub->add_option("--splits", ov.splits, "comma-separated split fractions");
        sub->add_option("--format", ov.format, "output format: json, csv, or both")
            ->default_val("json");
        return sub;
    };

    CLI::App* ssb = add_experiment("ssb", "sweep training-set sizes");
    CLI::App* urb = add_experiment("urb", "sweep group-split fractions at fixed size");
    CLI::App* mitigate =
        add_experiment("mitigate", "paired reweighing sweep (mitigated vs baseline)");
    CLI::App* augment = add_experiment("augment", "grow one group against a fixed other");

    CLI::App* decompose =
        app.add_subcommand("decompose", "bias/variance decomposition of a prediction table");
    decompose->add_option("--table", table_path, "prediction table CSV")->required();
    decompose->add_option("--sensitive", sensitive_path,
                          "file with one 0/1 group value per line (overrides the table)");
    decompose->add_option("--mode", table_mode, "force label or score mode");
    decompose->add_option("--out", out_path, "output path (default: stdout)");

    CLI::App* metrics =
        app.add_subcommand("metrics", "discrimination records of a prediction table");
    metrics->add_option("--table", table_path, "prediction table CSV")->required();
    metrics->add_option("--sensitive", sensitive_path,
                        "file with one 0/1 group value per line (overrides the table)");
    metrics->add_option("--mode", table_mode, "force label or score mode");
    metrics->add_option("--metrics", metric_list, "comma-separated metric list");
    metrics->add_option("--out", out_path, "output path (default: stdout)");

    CLI::App* validate =
        app.add_subcommand("validate-config", "parse a config and print its normalized form");
    validate->add_option("--config", config_path, "config file (JSON)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    OutputSet outputs;
    try {
        if (ssb->parsed()) return run_experiment_command(config_path, "ssb", ov, outputs);
        if (urb->parsed()) return run_experiment_command(config_path, "urb", ov, outputs);
        if (mitigate->parsed())
            return run_experiment_command(config_path, "mitigation", ov, outputs);
        if (augment->parsed())
            return run_experiment_command(config_path, "augmentation", ov, outputs);
        if (decompose->parsed())
            return run_decompose(table_path, sensitive_path, table_mode, out_path, outputs);
        if (metrics->parsed())
            return run_metrics(table_path, sensitive_path, table_mode, metric_list, out_path,
                               outputs);
        if (validate->parsed()) {
            const nlohmann::json j = load_config_file(config_path);
            const biasaudit::ExperimentConfig cfg = biasaudit::parse_config(j);
            std::cout << biasaudit::config_to_json(cfg).dump(2) << "\n";
            return 0;
        }
        throw ValidationError("no subcommand given");
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        outputs.remove_all();
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "failure: " << e.what() << "\n";
        outputs.remove_all();
        return 2;
    }
}
