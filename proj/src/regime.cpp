#include "opfreq/regime.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include "opfreq/error.hpp"

namespace opfreq {
namespace {

std::string normalize_name(std::string_view text) {
    std::string out;
    for (char c : text) {
        if (c != ' ' && c != '-' && c != '_') {
            out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        }
    }
    return out;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw error(errc::input_not_found, "cannot write " + path.string());
    }
    out << j.dump(1) << '\n';
}

nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw error(errc::input_not_found, "cannot read " + path.string());
    }
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw error(errc::parse_error, path.string() + ": " + e.what());
    }
}

} // namespace

std::string_view display_name(regime r) {
    switch (r) {
    case regime::none: return "None";
    case regime::vt: return "VT";
    case regime::ae_1l: return "AE 1L";
    case regime::ae_3l: return "AE 3L";
    }
    return "None";
}

std::string_view slug(regime r) {
    switch (r) {
    case regime::none: return "none";
    case regime::vt: return "vt";
    case regime::ae_1l: return "ae1l";
    case regime::ae_3l: return "ae3l";
    }
    return "none";
}

std::string_view display_name(classifier_kind c) {
    switch (c) {
    case classifier_kind::rf: return "RF";
    case classifier_kind::dnn_2l: return "DNN 2L";
    case classifier_kind::dnn_4l: return "DNN 4L";
    case classifier_kind::dnn_7l: return "DNN 7L";
    }
    return "RF";
}

std::string_view slug(classifier_kind c) {
    switch (c) {
    case classifier_kind::rf: return "rf";
    case classifier_kind::dnn_2l: return "dnn2l";
    case classifier_kind::dnn_4l: return "dnn4l";
    case classifier_kind::dnn_7l: return "dnn7l";
    }
    return "rf";
}

regime parse_regime(std::string_view text) {
    const auto key = normalize_name(text);
    for (auto r : all_regimes) {
        if (key == slug(r)) {
            return r;
        }
    }
    throw error(errc::invalid_params, "unknown feature regime '" + std::string(text) + "'");
}

classifier_kind parse_classifier(std::string_view text) {
    const auto key = normalize_name(text);
    for (auto c : all_classifiers) {
        if (key == slug(c)) {
            return c;
        }
    }
    throw error(errc::invalid_params, "unknown classifier '" + std::string(text) + "'");
}

int dnn_layers(classifier_kind c) {
    switch (c) {
    case classifier_kind::rf: return 0;
    case classifier_kind::dnn_2l: return 2;
    case classifier_kind::dnn_4l: return 4;
    case classifier_kind::dnn_7l: return 7;
    }
    return 0;
}

labeled_dataset regime_transform::rf_view(const labeled_dataset& raw) const {
    if (raw.feature_names != input_features) {
        throw error(errc::dimension_mismatch, "data columns differ from the columns the transform was fitted on");
    }
    labeled_dataset out;
    switch (kind) {
    case regime::none: out = raw; break;
    case regime::vt: out = apply_mask(*mask, raw); break;
    case regime::ae_1l:
    case regime::ae_3l:
        out.features = encode(*ae, ae_scaler->transform(raw.features));
        out.labels = raw.labels;
        out.source_ids = raw.source_ids;
        out.feature_names = output_features;
        break;
    }
    return out;
}

labeled_dataset regime_transform::dnn_view(const labeled_dataset& raw) const {
    auto view = rf_view(raw);
    if (dnn_scaler) {
        view.features = dnn_scaler->transform(view.features);
    }
    return view;
}

regime_transform fit_regime(regime kind, const labeled_dataset& train, const regime_settings& settings) {
    train.validate();
    if (train.size() == 0) {
        throw error(errc::empty_dataset, "no training rows");
    }
    if (train.dims() == 0) {
        throw error(errc::empty_feature_set, "training data has no features");
    }
    regime_transform t;
    t.kind = kind;
    t.input_features = train.feature_names;
    switch (kind) {
    case regime::none:
        t.output_features = train.feature_names;
        t.dnn_scaler = min_max_scaler::fit(train.features);
        break;
    case regime::vt: {
        t.mask = fit_mask(train.features, settings.vt_threshold);
        if (t.mask->kept() == 0) {
            throw error(errc::empty_feature_set, "variance threshold " + std::to_string(settings.vt_threshold) +
                                                     " removed every feature");
        }
        auto masked = apply_mask(*t.mask, train);
        t.output_features = masked.feature_names;
        t.dnn_scaler = min_max_scaler::fit(masked.features);
        break;
    }
    case regime::ae_1l:
    case regime::ae_3l: {
        t.ae_scaler = min_max_scaler::fit(train.features);
        ae_config config;
        config.kind = kind == regime::ae_1l ? ae_kind::one_layer : ae_kind::three_layer;
        config.input_dim = train.dims();
        config.code_dim = settings.code_dim;
        if (kind == regime::ae_3l) {
            config.hidden = settings.ae3_hidden;
        }
        config.train = settings.ae_train;
        config.train.seed = settings.seed;
        auto trained = train_ae(build_ae(config, settings.seed), t.ae_scaler->transform(train.features), config.train);
        t.ae = std::move(trained.ae);
        t.ae_loss_history = std::move(trained.loss_history);
        t.output_features = code_feature_names(settings.code_dim);
        break;
    }
    }
    return t;
}

void regime_transform::save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    write_json(dir / "transform.json", {
                                           {"regime", display_name(kind)},
                                           {"dims", dims()},
                                           {"input_features", input_features},
                                           {"output_features", output_features},
                                       });
    if (mask) {
        write_json(dir / "mask.json", mask_to_json(*mask, input_features));
    }
    if (ae_scaler) {
        write_json(dir / "ae_scaler.json", ae_scaler->to_json());
    }
    if (ae) {
        write_json(dir / "autoencoder.json", to_json(*ae));
        std::ofstream loss(dir / "ae_loss.csv", std::ios::binary);
        nn::write_loss_history_csv(loss, ae_loss_history);
    }
    if (dnn_scaler) {
        write_json(dir / "dnn_scaler.json", dnn_scaler->to_json());
    }
}

regime_transform regime_transform::load(const std::filesystem::path& dir) {
    const auto meta = read_json(dir / "transform.json");
    regime_transform t;
    t.kind = parse_regime(meta.at("regime").get<std::string>());
    t.input_features = meta.at("input_features").get<std::vector<std::string>>();
    t.output_features = meta.at("output_features").get<std::vector<std::string>>();
    if (std::filesystem::exists(dir / "mask.json")) {
        t.mask = mask_from_json(read_json(dir / "mask.json"));
    }
    if (std::filesystem::exists(dir / "ae_scaler.json")) {
        t.ae_scaler = min_max_scaler::from_json(read_json(dir / "ae_scaler.json"));
    }
    if (std::filesystem::exists(dir / "autoencoder.json")) {
        t.ae = autoencoder_from_json(read_json(dir / "autoencoder.json"));
    }
    if (std::filesystem::exists(dir / "dnn_scaler.json")) {
        t.dnn_scaler = min_max_scaler::from_json(read_json(dir / "dnn_scaler.json"));
    }
    const bool complete = (t.kind == regime::vt) == t.mask.has_value() &&
                          (t.kind == regime::ae_1l || t.kind == regime::ae_3l) == (t.ae && t.ae_scaler);
    if (!complete) {
        throw error(errc::parse_error, "transform directory " + dir.string() + " is missing artifacts");
    }
    return t;
}

} // namespace opfreq
