#include "opfreq/autoencoder.hpp"

#include <algorithm>
#include <cmath>

#include "opfreq/error.hpp"

namespace opfreq {

std::string_view to_string(ae_kind kind) { return kind == ae_kind::one_layer ? "AE-1L" : "AE-3L"; }

nn::train_config default_ae_train_config() {
    nn::train_config c;
    c.loss = nn::loss_kind::mse;
    c.dropout_rate = 0.0;
    return c;
}

std::vector<std::size_t> default_ae3_hidden(std::size_t input_dim, std::size_t code_dim) {
    std::vector<std::size_t> widths;
    const double ratio = static_cast<double>(code_dim) / static_cast<double>(input_dim);
    std::size_t previous = input_dim;
    for (int step = 1; step <= 2; ++step) {
        const double target = static_cast<double>(input_dim) * std::pow(ratio, step / 3.0);
        const auto rounded = static_cast<std::size_t>(std::exp2(std::round(std::log2(target))));
        previous = std::clamp(rounded, code_dim, std::max(previous, code_dim));
        widths.push_back(previous);
    }
    return widths;
}

autoencoder build_ae(const ae_config& config, std::uint64_t seed) {
    if (config.code_dim == 0 || config.code_dim >= config.input_dim) {
        throw error(errc::invalid_dims, "code_dim " + std::to_string(config.code_dim) +
                                            " must be positive and below input_dim " +
                                            std::to_string(config.input_dim));
    }
    std::vector<std::size_t> encoder{config.input_dim};
    if (config.kind == ae_kind::three_layer) {
        auto hidden = config.hidden.empty() ? default_ae3_hidden(config.input_dim, config.code_dim) : config.hidden;
        if (hidden.size() != 2 || std::ranges::any_of(hidden, [](std::size_t w) { return w == 0; })) {
            throw error(errc::invalid_dims, "AE-3L needs exactly two positive intermediate widths");
        }
        encoder.insert(encoder.end(), hidden.begin(), hidden.end());
    } else if (!config.hidden.empty()) {
        throw error(errc::invalid_dims, "AE-1L takes no intermediate widths");
    }
    encoder.push_back(config.code_dim);

    std::vector<nn::layer_spec> specs;
    for (std::size_t i = 0; i + 1 < encoder.size(); ++i) {
        specs.push_back({encoder[i], encoder[i + 1], nn::activation::elu});
    }
    const std::size_t bottleneck = specs.size() - 1;
    for (std::size_t i = encoder.size() - 1; i > 0; --i) {
        const bool last = i == 1;
        specs.push_back({encoder[i], encoder[i - 1], last ? nn::activation::linear : nn::activation::elu});
    }
    return {nn::network::initialized(specs, seed), bottleneck, config.kind};
}

ae_train_result train_ae(autoencoder ae, const matrix& features, nn::train_config config) {
    if (features.rows() == 0) {
        throw error(errc::empty_dataset, "autoencoder needs training rows");
    }
    config.loss = nn::loss_kind::mse;
    auto result = nn::train(std::move(ae.net), features, features, config);
    ae.net = std::move(result.net);
    return {std::move(ae), std::move(result.loss_history)};
}

matrix encode(const autoencoder& ae, const matrix& features) {
    return nn::forward_until(ae.net, features, ae.bottleneck);
}

std::vector<std::string> code_feature_names(std::size_t code_dim) {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < code_dim; ++i) {
        names.push_back("code_" + std::to_string(i));
    }
    return names;
}

nlohmann::json to_json(const autoencoder& ae) {
    auto j = nn::to_json(ae.net);
    j["kind"] = to_string(ae.kind);
    j["bottleneck_layer"] = ae.bottleneck;
    return j;
}

autoencoder autoencoder_from_json(const nlohmann::json& j) {
    autoencoder ae;
    ae.net = nn::network_from_json(j);
    const auto kind = j.at("kind").get<std::string>();
    if (kind != "AE-1L" && kind != "AE-3L") {
        throw error(errc::parse_error, "unknown autoencoder kind '" + kind + "'");
    }
    ae.kind = kind == "AE-1L" ? ae_kind::one_layer : ae_kind::three_layer;
    ae.bottleneck = j.at("bottleneck_layer").get<std::size_t>();
    if (ae.bottleneck >= ae.net.depth()) {
        throw error(errc::parse_error, "bottleneck layer out of range");
    }
    return ae;
}

} // namespace opfreq
