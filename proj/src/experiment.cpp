#include "opfreq/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include "opfreq/csv.hpp"
#include "opfreq/disasm.hpp"
#include "opfreq/error.hpp"

namespace opfreq {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Stream ids for seeds derived from the experiment seed. Keyed by enum value, so a
// cell's result does not depend on which other cells are selected.
constexpr std::uint64_t adasyn_stream = 10;
constexpr std::uint64_t ae_stream = 100;
constexpr std::uint64_t dnn_stream = 1000;
constexpr std::uint64_t rf_stream = 2000;

void reject_unknown(const json& j, std::initializer_list<std::string_view> known, std::string_view where) {
    if (!j.is_object()) {
        throw error(errc::parse_error, std::string(where) + " must be a JSON object");
    }
    for (const auto& [key, value] : j.items()) {
        if (std::ranges::find(known, key) == known.end()) {
            throw error(errc::parse_error, "unknown key '" + key + "' in " + std::string(where));
        }
    }
}

void read_train_fields(const json& j, nn::train_config& c) {
    c.epochs = j.value("epochs", c.epochs);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.dropout_rate = j.value("dropout_rate", c.dropout_rate);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.epsilon = j.value("epsilon", c.epsilon);
}

json train_fields(const nn::train_config& c) {
    return {{"epochs", c.epochs},   {"learning_rate", c.learning_rate}, {"batch_size", c.batch_size},
            {"dropout_rate", c.dropout_rate}, {"beta1", c.beta1},       {"beta2", c.beta2},
            {"epsilon", c.epsilon}};
}

fs::path resolve(const fs::path& base, const std::string& p) {
    fs::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw error(errc::input_not_found, "cannot write " + path.string());
    }
    out << text;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(1) + "\n"); }

json read_json(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw error(errc::input_not_found, "cannot read " + path.string());
    }
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw error(errc::parse_error, path.string() + ": " + e.what());
    }
}

std::string fixed4(const std::optional<double>& v, std::string_view missing) {
    if (!v) {
        return std::string(missing);
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", *v);
    return buf;
}

std::size_t display_width(std::string_view s) {
    return static_cast<std::size_t>(std::ranges::count_if(s, [](char c) { return (c & 0xC0) != 0x80; }));
}

template <typename T>
std::vector<T> canonical_order(std::vector<T> items) {
    std::ranges::sort(items);
    items.erase(std::unique(items.begin(), items.end()), items.end());
    return items;
}

json network_checkpoint(const nn::network& net, const nn::train_config& config, classifier_kind c, regime r) {
    auto j = nn::to_json(net);
    j["classifier"] = display_name(c);
    j["regime"] = display_name(r);
    j["train_config"] = nn::to_json(config);
    return j;
}

} // namespace

experiment_config::experiment_config() {
    for (auto c : all_classifiers) {
        if (c != classifier_kind::rf) {
            dnn_widths[c] = nn::default_dnn_widths(dnn_layers(c));
        }
    }
}

void experiment_config::validate() const {
    const bool listings = malware_dir.has_value() || benign_dir.has_value();
    if (listings == features_csv.has_value()) {
        throw error(errc::invalid_params, "give either malware_dir + benign_dir or features_csv, not both");
    }
    if (listings && !(malware_dir && benign_dir)) {
        throw error(errc::invalid_params, "listing input needs both malware_dir and benign_dir");
    }
    validate_settings();
}

void experiment_config::validate_settings() const {
    if (!seed) {
        throw error(errc::invalid_params, "a seed is required (config \"seed\" or --seed)");
    }
    if (!(adasyn_beta >= 0.0 && adasyn_beta <= 1.0) || adasyn_k < 1) {
        throw error(errc::invalid_params, "ADASYN needs k >= 1 and beta in [0, 1]");
    }
    if (!(vt_threshold >= 0.0)) {
        throw error(errc::invalid_params, "vt_threshold must be non-negative");
    }
    if (ae_code_dim < 1) {
        throw error(errc::invalid_params, "autoencoder code_dim must be positive");
    }
    if (regimes.empty() || classifiers.empty()) {
        throw error(errc::invalid_params, "at least one regime and one classifier are required");
    }
    ae_train.validate();
    dnn_train.validate();
    rf.validate();
    for (auto c : classifiers) {
        if (c != classifier_kind::rf) {
            const auto w = widths_for(c);
            if (w.empty() || w.back() != 1 || std::ranges::find(w, 0) != w.end()) {
                throw error(errc::invalid_params, std::string(display_name(c)) + " widths must be positive and end in 1");
            }
        }
    }
}

std::uint64_t experiment_config::required_seed() const {
    if (!seed) {
        throw error(errc::invalid_params, "a seed is required");
    }
    return *seed;
}

std::vector<std::size_t> experiment_config::widths_for(classifier_kind c) const {
    auto it = dnn_widths.find(c);
    return it == dnn_widths.end() ? nn::default_dnn_widths(dnn_layers(c)) : it->second;
}

experiment_config config_from_json(const json& j, const fs::path& base_dir) {
    experiment_config c;
    try {
        reject_unknown(j,
                       {"malware_dir", "benign_dir", "features_csv", "seed", "adasyn", "vt_threshold", "autoencoder",
                        "dnn", "random_forest", "out_dir", "regimes", "classifiers"},
                       "config");
        if (j.contains("malware_dir")) c.malware_dir = resolve(base_dir, j.at("malware_dir").get<std::string>());
        if (j.contains("benign_dir")) c.benign_dir = resolve(base_dir, j.at("benign_dir").get<std::string>());
        if (j.contains("features_csv")) c.features_csv = resolve(base_dir, j.at("features_csv").get<std::string>());
        if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("out_dir")) c.out_dir = resolve(base_dir, j.at("out_dir").get<std::string>());
        c.vt_threshold = j.value("vt_threshold", c.vt_threshold);

        if (j.contains("adasyn")) {
            const auto& a = j.at("adasyn");
            reject_unknown(a, {"k", "beta", "before_split"}, "adasyn");
            c.adasyn_k = a.value("k", c.adasyn_k);
            c.adasyn_beta = a.value("beta", c.adasyn_beta);
            c.adasyn_before_split = a.value("before_split", c.adasyn_before_split);
        }
        if (j.contains("autoencoder")) {
            const auto& a = j.at("autoencoder");
            reject_unknown(a,
                           {"code_dim", "ae3_hidden", "epochs", "learning_rate", "batch_size", "dropout_rate", "beta1",
                            "beta2", "epsilon"},
                           "autoencoder");
            c.ae_code_dim = a.value("code_dim", c.ae_code_dim);
            c.ae3_hidden = a.value("ae3_hidden", c.ae3_hidden);
            read_train_fields(a, c.ae_train);
        }
        if (j.contains("dnn")) {
            const auto& d = j.at("dnn");
            reject_unknown(d,
                           {"epochs", "learning_rate", "batch_size", "dropout_rate", "beta1", "beta2", "epsilon",
                            "widths"},
                           "dnn");
            read_train_fields(d, c.dnn_train);
            if (d.contains("widths")) {
                for (const auto& [name, widths] : d.at("widths").items()) {
                    const auto kind = parse_classifier(name);
                    if (kind == classifier_kind::rf) {
                        throw error(errc::parse_error, "RF has no widths");
                    }
                    c.dnn_widths[kind] = widths.get<std::vector<std::size_t>>();
                }
            }
        }
        if (j.contains("random_forest")) {
            const auto& r = j.at("random_forest");
            reject_unknown(r, {"n_trees", "max_features", "min_samples_split", "max_depth", "bootstrap"},
                           "random_forest");
            c.rf = rf::rf_config_from_json(r);
        }
        if (j.contains("regimes")) {
            c.regimes.clear();
            for (const auto& r : j.at("regimes")) {
                c.regimes.push_back(parse_regime(r.get<std::string>()));
            }
        }
        if (j.contains("classifiers")) {
            c.classifiers.clear();
            for (const auto& k : j.at("classifiers")) {
                c.classifiers.push_back(parse_classifier(k.get<std::string>()));
            }
        }
    } catch (const json::exception& e) {
        throw error(errc::parse_error, std::string("config: ") + e.what());
    }
    return c;
}

json to_json(const experiment_config& c) {
    json j;
    if (c.malware_dir) j["malware_dir"] = c.malware_dir->string();
    if (c.benign_dir) j["benign_dir"] = c.benign_dir->string();
    if (c.features_csv) j["features_csv"] = c.features_csv->string();
    if (c.seed) j["seed"] = *c.seed;
    j["adasyn"] = {{"k", c.adasyn_k}, {"beta", c.adasyn_beta}, {"before_split", c.adasyn_before_split}};
    j["vt_threshold"] = c.vt_threshold;
    auto ae = train_fields(c.ae_train);
    ae["code_dim"] = c.ae_code_dim;
    ae["ae3_hidden"] = c.ae3_hidden;
    j["autoencoder"] = ae;
    auto dnn = train_fields(c.dnn_train);
    json widths = json::object();
    for (auto k : all_classifiers) {
        if (k != classifier_kind::rf) {
            widths[std::string(display_name(k))] = c.widths_for(k);
        }
    }
    dnn["widths"] = widths;
    j["dnn"] = dnn;
    auto rf = rf::to_json(c.rf);
    rf.erase("seed");
    j["random_forest"] = rf;
    j["out_dir"] = c.out_dir.string();
    json regimes = json::array();
    for (auto r : c.regimes) regimes.push_back(display_name(r));
    j["regimes"] = regimes;
    json classifiers = json::array();
    for (auto k : c.classifiers) classifiers.push_back(display_name(k));
    j["classifiers"] = classifiers;
    return j;
}

const result_row* result_table::find(regime r, classifier_kind c) const {
    auto it = std::ranges::find_if(rows, [&](const result_row& row) { return row.features == r && row.classifier == c; });
    return it == rows.end() ? nullptr : &*it;
}

std::string render_table(const result_table& table, table_format format) {
    std::ostringstream out;
    if (format == table_format::csv) {
        out << "Classifiers,Features,Acc,TPR,TNR,PPV\n";
        for (const auto& row : table.rows) {
            const auto& m = row.metrics;
            csv::write_row(out, {std::string(display_name(row.classifier)), std::string(display_name(row.features)),
                                 fixed4(m.accuracy, ""), fixed4(m.tpr, ""), fixed4(m.tnr, ""), fixed4(m.ppv, "")});
        }
        return out.str();
    }

    const std::string dash = "—";
    std::vector<std::vector<std::string>> cells{{"Classifiers", "Features", "Acc.", "TPR", "TNR", "PPV"}};
    for (const auto& row : table.rows) {
        const auto& m = row.metrics;
        cells.push_back({std::string(display_name(row.classifier)), std::string(display_name(row.features)),
                         fixed4(m.accuracy, dash), fixed4(m.tpr, dash), fixed4(m.tnr, dash), fixed4(m.ppv, dash)});
    }
    std::vector<std::size_t> widths(6, 0);
    for (const auto& line : cells) {
        for (std::size_t i = 0; i < line.size(); ++i) {
            widths[i] = std::max(widths[i], display_width(line[i]));
        }
    }
    std::size_t rule_width = 0;
    for (auto w : widths) {
        rule_width += w + 2;
    }
    const std::string rule(rule_width - 2, '-');
    for (std::size_t r = 0; r < cells.size(); ++r) {
        if (r == 1 || (r > 1 && table.rows[r - 1].features != table.rows[r - 2].features)) {
            out << rule << '\n';
        }
        std::string line;
        for (std::size_t i = 0; i < cells[r].size(); ++i) {
            line += cells[r][i];
            if (i + 1 < cells[r].size()) {
                line += std::string(widths[i] - display_width(cells[r][i]) + 2, ' ');
            }
        }
        out << line << '\n';
    }
    return out.str();
}

json to_json(const result_table& table) {
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    json rows = json::array();
    for (const auto& row : table.rows) {
        rows.push_back({
            {"classifier", display_name(row.classifier)},
            {"features", display_name(row.features)},
            {"accuracy", opt(row.metrics.accuracy)},
            {"tpr", opt(row.metrics.tpr)},
            {"tnr", opt(row.metrics.tnr)},
            {"ppv", opt(row.metrics.ppv)},
            {"fpr", opt(row.metrics.fpr)},
            {"tp", row.counts.tp},
            {"tn", row.counts.tn},
            {"fp", row.counts.fp},
            {"fn", row.counts.fn},
        });
    }
    return {{"rows", rows}};
}

std::string describe_rf_dnn_gap(const result_table& table) {
    std::ostringstream out;
    for (auto r : all_regimes) {
        const auto* rf_row = table.find(r, classifier_kind::rf);
        const result_row* best = nullptr;
        for (const auto& row : table.rows) {
            if (row.features == r && row.classifier != classifier_kind::rf && row.metrics.accuracy &&
                (!best || *row.metrics.accuracy > *best->metrics.accuracy)) {
                best = &row;
            }
        }
        if (!rf_row || !best || !rf_row->metrics.accuracy) {
            continue;
        }
        const double gap = *rf_row->metrics.accuracy - *best->metrics.accuracy;
        char buf[160];
        std::snprintf(buf, sizeof buf, "%-6s RF %.4f vs best DNN %.4f (%s): gap %+.4f%s\n",
                      std::string(display_name(r)).c_str(), *rf_row->metrics.accuracy, *best->metrics.accuracy,
                      std::string(display_name(best->classifier)).c_str(), gap,
                      gap > 0 ? "  (RF ahead)" : gap < 0 ? "  (DNN ahead)" : "  (tie)");
        out << buf;
    }
    return out.str();
}

loaded_input load_input(const experiment_config& config) {
    if (config.features_csv) {
        std::ifstream in(*config.features_csv, std::ios::binary);
        if (!in) {
            throw error(errc::input_not_found, "feature CSV not found: " + config.features_csv->string());
        }
        return {read_dataset_csv(in), std::nullopt};
    }
    if (!config.malware_dir || !config.benign_dir) {
        throw error(errc::invalid_params, "no input configured");
    }
    const auto listings = ingest_listing_dirs(*config.malware_dir, *config.benign_dir);
    std::vector<opcode_sequence> sequences;
    std::vector<int> labels;
    for (const auto& l : listings) {
        sequences.push_back(l.sequence);
        labels.push_back(l.label);
    }
    auto master = build_master_list(sequences);
    std::vector<opcode_histogram> histograms;
    for (const auto& s : sequences) {
        histograms.push_back(histogram(s, master));
    }
    auto data = dataset_from_histograms(histograms, labels, master);
    return {std::move(data), std::move(master)};
}

result_table run_grid(const labeled_dataset& train, const labeled_dataset& test, const experiment_config& config,
                      const fs::path& out_dir) {
    config.validate_settings();
    const auto seed = config.required_seed();
    if (test.feature_names != train.feature_names) {
        throw error(errc::dimension_mismatch, "train and test columns differ");
    }
    fs::create_directories(out_dir / "models");

    result_table table;
    json regime_dims = json::array();
    const auto regimes = canonical_order(config.regimes);
    const auto classifiers = canonical_order(config.classifiers);
    const auto targets = nn::labels_as_targets(train.labels);

    for (auto r : regimes) {
        const auto r_id = static_cast<std::uint64_t>(r);
        regime_settings settings;
        settings.vt_threshold = config.vt_threshold;
        settings.code_dim = config.ae_code_dim;
        settings.ae3_hidden = config.ae3_hidden;
        settings.ae_train = config.ae_train;
        settings.seed = derive_seed(seed, ae_stream + r_id);
        const auto transform = fit_regime(r, train, settings);
        transform.save(out_dir / "regimes" / slug(r));
        regime_dims.push_back({{"regime", display_name(r)}, {"dims", transform.dims()}});

        const auto model_dir = out_dir / "models" / slug(r);
        fs::create_directories(model_dir);
        const auto rf_train = transform.rf_view(train);
        const auto rf_test = transform.rf_view(test);
        const bool any_dnn = std::ranges::any_of(classifiers, [](auto c) { return c != classifier_kind::rf; });
        const auto dnn_train = any_dnn ? transform.dnn_view(train) : labeled_dataset{};
        const auto dnn_test = any_dnn ? transform.dnn_view(test) : labeled_dataset{};

        for (auto c : classifiers) {
            std::vector<int> predicted;
            const auto c_id = static_cast<std::uint64_t>(c);
            if (c == classifier_kind::rf) {
                auto rf_config = config.rf;
                rf_config.seed = derive_seed(seed, rf_stream + r_id);
                const auto model = rf::fit(rf_train, rf_config);
                write_json(model_dir / "rf.json", rf::to_json(model));
                predicted = rf::predict(model, rf_test.features);
            } else {
                auto tc = config.dnn_train;
                tc.loss = nn::loss_kind::bce;
                tc.seed = derive_seed(seed, dnn_stream + 10 * r_id + c_id);
                const auto widths = config.widths_for(c);
                auto trained =
                    nn::train(nn::build_dnn(dnn_train.dims(), widths, tc.seed), dnn_train.features, targets, tc);
                write_json(model_dir / (std::string(slug(c)) + ".json"), network_checkpoint(trained.net, tc, c, r));
                std::ofstream loss(model_dir / (std::string(slug(c)) + "_loss.csv"), std::ios::binary);
                nn::write_loss_history_csv(loss, trained.loss_history);
                predicted = nn::classify(nn::predict(trained.net, dnn_test.features));
            }
            const auto counts = confusion(predicted, test.labels);
            table.rows.push_back({c, r, counts, compute_metrics(counts)});
        }
    }

    write_json(out_dir / "regimes.json", regime_dims);
    write_text(out_dir / "results.csv", render_table(table, table_format::csv));
    write_text(out_dir / "results.txt", render_table(table, table_format::text));
    write_json(out_dir / "results.json", to_json(table));
    return table;
}

result_table run_experiment(const experiment_config& config) {
    config.validate();
    const auto seed = config.required_seed();
    const auto input = load_input(config);
    if (input.data.dims() == 0) {
        throw error(errc::empty_feature_set, "input has no features");
    }

    const auto& out_dir = config.out_dir;
    fs::create_directories(out_dir);
    auto snapshot = to_json(config);
    snapshot["preprocessing"] = {
        {"rf_input", "raw counts (None, VT) or autoencoder codes (AE)"},
        {"dnn_input", "min-max scaled, fitted on train (None, VT); raw autoencoder codes (AE)"},
        {"autoencoder_input", "min-max scaled, fitted on train"},
        {"variance", "population, strict > threshold, fitted on balanced train"},
        {"adasyn_order", config.adasyn_before_split ? "before_split" : "after_split"},
    };
    write_json(out_dir / "config.json", snapshot);
    {
        std::ofstream csv_out(out_dir / "dataset.csv", std::ios::binary);
        write_dataset_csv(csv_out, input.data);
    }
    if (input.master) {
        std::ofstream master_out(out_dir / "master_list.txt", std::ios::binary);
        write_master_list(master_out, *input.master);
    }

    const auto adasyn_seed = derive_seed(seed, adasyn_stream);
    split_pair parts;
    adasyn_result balanced;
    if (config.adasyn_before_split) {
        balanced = adasyn(input.data, config.adasyn_k, config.adasyn_beta, adasyn_seed);
        parts = split(balanced.data, seed);
    } else {
        parts = split(input.data, seed);
        balanced = adasyn(parts.train, config.adasyn_k, config.adasyn_beta, adasyn_seed);
    }
    const auto& train = config.adasyn_before_split ? parts.train : balanced.data;

    auto manifest = split_manifest(parts);
    json synthetic = json::array();
    for (std::size_t i = 0; i < balanced.origins.size(); ++i) {
        const auto& o = balanced.origins[i];
        const auto& base = config.adasyn_before_split ? input.data : parts.train;
        synthetic.push_back({{"id", balanced.data.source_ids[base.size() + i]},
                             {"base", base.source_ids[o.base_row]},
                             {"neighbor", base.source_ids[o.neighbor_row]},
                             {"lambda", o.lambda}});
    }
    manifest["adasyn"] = {{"order", config.adasyn_before_split ? "before_split" : "after_split"},
                          {"k", config.adasyn_k},
                          {"beta", config.adasyn_beta},
                          {"minority_label", balanced.minority_label},
                          {"generated", balanced.origins.size()},
                          {"synthetic", synthetic}};
    write_json(out_dir / "split.json", manifest);

    return run_grid(train, parts.test, config, out_dir);
}

result_table score_run(const fs::path& run_dir, const labeled_dataset& data) {
    data.validate();
    const auto snapshot = read_json(run_dir / "config.json");
    std::vector<regime> regimes;
    for (const auto& r : snapshot.at("regimes")) {
        regimes.push_back(parse_regime(r.get<std::string>()));
    }
    std::vector<classifier_kind> classifiers;
    for (const auto& c : snapshot.at("classifiers")) {
        classifiers.push_back(parse_classifier(c.get<std::string>()));
    }

    result_table table;
    for (auto r : canonical_order(regimes)) {
        const auto transform = regime_transform::load(run_dir / "regimes" / slug(r));
        const auto aligned = align_columns(data, transform.input_features);
        const auto model_dir = run_dir / "models" / slug(r);
        for (auto c : canonical_order(classifiers)) {
            std::vector<int> predicted;
            const auto model = read_json(model_dir / (std::string(slug(c)) + ".json"));
            if (c == classifier_kind::rf) {
                predicted = rf::predict(rf::forest_from_json(model), transform.rf_view(aligned).features);
            } else {
                predicted =
                    nn::classify(nn::predict(nn::network_from_json(model), transform.dnn_view(aligned).features));
            }
            const auto counts = confusion(predicted, data.labels);
            table.rows.push_back({c, r, counts, compute_metrics(counts)});
        }
    }
    return table;
}

} // namespace opfreq
