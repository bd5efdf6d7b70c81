#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "opfreq/dataset.hpp"
#include "opfreq/forest.hpp"
#include "opfreq/metrics.hpp"
#include "opfreq/nn.hpp"
#include "opfreq/regime.hpp"

namespace opfreq {

struct experiment_config {
    // Exactly one input mode: listing directories, or a prebuilt feature CSV.
    std::optional<std::filesystem::path> malware_dir;
    std::optional<std::filesystem::path> benign_dir;
    std::optional<std::filesystem::path> features_csv;

    std::optional<std::uint64_t> seed;

    std::size_t adasyn_k = 5;
    double adasyn_beta = 1.0;
    bool adasyn_before_split = false; // leaky order; off by default

    double vt_threshold = 0.1;

    std::size_t ae_code_dim = 32;
    std::vector<std::size_t> ae3_hidden; // empty: derived from the input width
    nn::train_config ae_train = default_ae_train_config();

    nn::train_config dnn_train;
    std::map<classifier_kind, std::vector<std::size_t>> dnn_widths;

    rf::rf_config rf;

    std::filesystem::path out_dir = "run";

    std::vector<regime> regimes{std::begin(all_regimes), std::end(all_regimes)};
    std::vector<classifier_kind> classifiers{std::begin(all_classifiers), std::end(all_classifiers)};

    experiment_config();

    /// Throws error(invalid_params) for a missing seed, an ambiguous input mode, or bad values.
    void validate() const;
    /// Same checks minus the input mode, for callers that supply data directly.
    void validate_settings() const;
    std::uint64_t required_seed() const;
    std::vector<std::size_t> widths_for(classifier_kind c) const;
};

/// Unknown keys are rejected at every level. Relative paths resolve against `base_dir`.
experiment_config config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::json to_json(const experiment_config& c);

struct result_row {
    classifier_kind classifier = classifier_kind::rf;
    regime features = regime::none;
    confusion_counts counts;
    metrics_report metrics;
};

/// Rows ordered regime-major, classifier-minor.
struct result_table {
    std::vector<result_row> rows;

    const result_row* find(regime r, classifier_kind c) const;
};

enum class table_format { csv, text };

/// Classifiers | Features | Acc | TPR | TNR | PPV, four decimals. Undefined metrics are
/// an empty CSV cell or an em dash in text.
std::string render_table(const result_table& table, table_format format);
nlohmann::json to_json(const result_table& table);

/// RF accuracy minus the best DNN accuracy, per regime, as printable lines.
std::string describe_rf_dnn_gap(const result_table& table);

struct loaded_input {
    labeled_dataset data;
    std::optional<master_opcode_list> master;
};

/// Reads listings (building the master list) or a feature CSV.
loaded_input load_input(const experiment_config& config);

/// Fits every regime on `train`, trains every classifier, scores on `test`, and writes all
/// artifacts below `out_dir`. `train` should already be balanced.
result_table run_grid(const labeled_dataset& train, const labeled_dataset& test, const experiment_config& config,
                      const std::filesystem::path& out_dir);

/// ingest -> split 2:1 -> ADASYN(train) -> run_grid, persisting the config snapshot, the
/// input dataset, the split manifest and the result tables under config.out_dir.
result_table run_experiment(const experiment_config& config);

/// Re-scores a finished run directory on new data, without retraining. Data columns are
/// aligned by name to the run's input features.
result_table score_run(const std::filesystem::path& run_dir, const labeled_dataset& data);

} // namespace opfreq
