// opfreq: opcode-frequency malware classification experiments.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "opfreq/dataset.hpp"
#include "opfreq/disasm.hpp"
#include "opfreq/error.hpp"
#include "opfreq/experiment.hpp"
#include "opfreq/synthetic.hpp"

namespace fs = std::filesystem;
using namespace opfreq;

namespace {

constexpr int exit_input = 2;
constexpr int exit_degenerate = 3;

int exit_code_for(errc code) {
    switch (code) {
    case errc::input_not_found:
    case errc::parse_error:
    case errc::malformed_line:
    case errc::invalid_params:
        return exit_input;
    case errc::insufficient_class:
    case errc::degenerate_minority:
    case errc::empty_feature_set:
    case errc::empty_dataset:
    case errc::empty_master:
    case errc::empty_matrix:
    case errc::invalid_dims:
    case errc::empty_input:
        return exit_degenerate;
    default:
        return 1;
    }
}

table_format parse_format(const std::string& s) {
    if (s == "csv") return table_format::csv;
    if (s == "text") return table_format::text;
    throw error(errc::invalid_params, "unknown format '" + s + "' (csv or text)");
}

labeled_dataset read_csv_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw error(errc::input_not_found, "cannot read " + path.string());
    }
    return read_dataset_csv(in);
}

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw error(errc::input_not_found, "cannot write " + path.string());
    }
    return out;
}

struct ingest_args {
    std::string malware, benign, out, master;
};

void do_ingest(const ingest_args& a) {
    experiment_config c;
    c.malware_dir = a.malware;
    c.benign_dir = a.benign;
    const auto input = load_input(c);
    auto out = open_out(a.out);
    write_dataset_csv(out, input.data);
    if (!a.master.empty()) {
        auto m = open_out(a.master);
        write_master_list(m, *input.master);
    }
    std::cerr << "ingested " << input.data.size() << " listings (" << input.data.count(malware_label)
              << " malware, " << input.data.count(benign_label) << " benign), " << input.data.dims()
              << " opcodes\n";
}

struct synth_args {
    std::size_t n_malware = 300, n_benign = 100, dims = 60;
    double separation = 0.8;
    std::uint64_t seed = 0;
    std::string out;
};

void do_synth(const synth_args& a) {
    const auto data = generate_synthetic_corpus(a.n_malware, a.n_benign, a.dims, a.separation, a.seed);
    auto out = open_out(a.out);
    write_dataset_csv(out, data);
}

struct run_args {
    std::string config, out, format = "text", features, malware, benign, regimes, classifiers;
    std::optional<std::uint64_t> seed;
    bool adasyn_before_split = false;
};

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> items;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, ',');) {
        if (!item.empty()) items.push_back(item);
    }
    return items;
}

void do_run(const run_args& a) {
    experiment_config c;
    if (!a.config.empty()) {
        const fs::path path(a.config);
        std::ifstream in(path, std::ios::binary);
        if (!in) {
            throw error(errc::input_not_found, "cannot read config " + path.string());
        }
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            throw error(errc::parse_error, "config " + path.string() + ": " + e.what());
        }
        c = config_from_json(j, path.parent_path());
    }
    // Command-line values override the config file.
    if (a.seed) c.seed = a.seed;
    if (!a.out.empty()) c.out_dir = a.out;
    if (!a.features.empty()) {
        c.features_csv = a.features;
        c.malware_dir.reset();
        c.benign_dir.reset();
    }
    if (!a.malware.empty() || !a.benign.empty()) {
        if (!a.malware.empty()) c.malware_dir = a.malware;
        if (!a.benign.empty()) c.benign_dir = a.benign;
        if (a.features.empty()) c.features_csv.reset();
    }
    if (a.adasyn_before_split) c.adasyn_before_split = true;
    if (!a.regimes.empty()) {
        c.regimes.clear();
        for (const auto& r : split_list(a.regimes)) c.regimes.push_back(parse_regime(r));
    }
    if (!a.classifiers.empty()) {
        c.classifiers.clear();
        for (const auto& k : split_list(a.classifiers)) c.classifiers.push_back(parse_classifier(k));
    }
    const auto format = parse_format(a.format);
    const auto table = run_experiment(c);
    std::cout << render_table(table, format);
    const auto gap = describe_rf_dnn_gap(table);
    if (!gap.empty()) {
        std::cerr << gap;
    }
}

struct score_args {
    std::string run, data, format = "text";
};

void do_score(const score_args& a) {
    const auto format = parse_format(a.format);
    const auto table = score_run(a.run, read_csv_file(a.data));
    std::cout << render_table(table, format);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Opcode-frequency malware classification: ingest listings, run the classifier grid, score runs"};
    app.require_subcommand(1);

    ingest_args ia;
    auto* ingest = app.add_subcommand("ingest", "Turn objdump listings into an opcode-count feature CSV");
    ingest->add_option("--malware", ia.malware, "Directory of malware listings")->required();
    ingest->add_option("--benign", ia.benign, "Directory of benign listings")->required();
    ingest->add_option("--out", ia.out, "Output feature CSV")->required();
    ingest->add_option("--master", ia.master, "Also write the master opcode list here");

    synth_args sa;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic opcode-count corpus");
    synth->add_option("--n-malware", sa.n_malware, "Malware rows")->capture_default_str();
    synth->add_option("--n-benign", sa.n_benign, "Benign rows")->capture_default_str();
    synth->add_option("--dims", sa.dims, "Opcode vocabulary size")->capture_default_str();
    synth->add_option("--separation", sa.separation, "Class separation in [0, 1]")->capture_default_str();
    synth->add_option("--seed", sa.seed, "Random seed")->required();
    synth->add_option("--out", sa.out, "Output feature CSV")->required();

    run_args ra;
    auto* run = app.add_subcommand("run", "Run the regime x classifier grid and print the result table");
    run->add_option("--config", ra.config, "JSON experiment config");
    run->add_option("--seed", ra.seed, "Master seed (required here or in the config)");
    run->add_option("--out", ra.out, "Run directory for artifacts");
    run->add_option("--format", ra.format, "Table format: text or csv")->capture_default_str();
    run->add_option("--features", ra.features, "Feature CSV input (instead of listings)");
    run->add_option("--malware", ra.malware, "Directory of malware listings");
    run->add_option("--benign", ra.benign, "Directory of benign listings");
    run->add_option("--regimes", ra.regimes, "Comma-separated subset: none,vt,ae1l,ae3l");
    run->add_option("--classifiers", ra.classifiers, "Comma-separated subset: rf,dnn2l,dnn4l,dnn7l");
    run->add_flag("--adasyn-before-split", ra.adasyn_before_split, "Oversample before splitting (leaks synthetics into test)");

    score_args sc;
    auto* score = app.add_subcommand("score", "Score a finished run on another feature CSV without retraining");
    score->add_option("--run", sc.run, "Run directory")->required();
    score->add_option("--data", sc.data, "Feature CSV to score")->required();
    score->add_option("--format", sc.format, "Table format: text or csv")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : exit_input;
    }

    try {
        if (*ingest) do_ingest(ia);
        else if (*synth) do_synth(sa);
        else if (*run) do_run(ra);
        else if (*score) do_score(sc);
    } catch (const error& e) {
        std::cerr << "opfreq: " << e.what() << '\n';
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "opfreq: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
