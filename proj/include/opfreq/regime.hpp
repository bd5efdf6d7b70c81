#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>
#include <vector>

#include "opfreq/autoencoder.hpp"
#include "opfreq/dataset.hpp"
#include "opfreq/feature_select.hpp"

namespace opfreq {

/// Feature sets compared by the experiment grid.
enum class regime { none, vt, ae_1l, ae_3l };

/// Classifiers compared by the experiment grid.
enum class classifier_kind { rf, dnn_2l, dnn_4l, dnn_7l };

inline constexpr regime all_regimes[] = {regime::none, regime::vt, regime::ae_1l, regime::ae_3l};
inline constexpr classifier_kind all_classifiers[] = {classifier_kind::rf, classifier_kind::dnn_2l,
                                                      classifier_kind::dnn_4l, classifier_kind::dnn_7l};

std::string_view display_name(regime r);          // "None", "VT", "AE 1L", "AE 3L"
std::string_view slug(regime r);                  // "none", "vt", "ae1l", "ae3l"
std::string_view display_name(classifier_kind c); // "RF", "DNN 2L", ...
std::string_view slug(classifier_kind c);         // "rf", "dnn2l", ...

/// Accepts display names or slugs, ignoring case, spaces, dashes and underscores.
regime parse_regime(std::string_view text);
classifier_kind parse_classifier(std::string_view text);

/// Number of weight layers of a DNN classifier (0 for RF).
int dnn_layers(classifier_kind c);

struct regime_settings {
    double vt_threshold = 0.1;
    std::size_t code_dim = 32;
    std::vector<std::size_t> ae3_hidden;
    nn::train_config ae_train = default_ae_train_config();
    std::uint64_t seed = 0;
};

/// Train-fitted feature derivation for one regime.
///
/// RF sees raw counts (None), masked raw counts (VT) or autoencoder codes (AE).
/// DNNs see the min-max scaled version of the first two and the raw codes of the AE regimes.
struct regime_transform {
    regime kind = regime::none;
    std::vector<std::string> input_features;
    std::vector<std::string> output_features;
    std::optional<feature_mask> mask;
    std::optional<min_max_scaler> ae_scaler;
    std::optional<autoencoder> ae;
    std::optional<min_max_scaler> dnn_scaler;
    std::vector<double> ae_loss_history;

    std::size_t dims() const noexcept { return output_features.size(); }

    labeled_dataset rf_view(const labeled_dataset& raw) const;
    labeled_dataset dnn_view(const labeled_dataset& raw) const;

    void save(const std::filesystem::path& dir) const;
    static regime_transform load(const std::filesystem::path& dir);
};

/// Fits every transform of `kind` on `train` only.
/// Throws error(empty_feature_set) when the variance threshold keeps no column.
regime_transform fit_regime(regime kind, const labeled_dataset& train, const regime_settings& settings);

} // namespace opfreq
