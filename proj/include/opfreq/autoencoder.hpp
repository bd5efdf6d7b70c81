#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "opfreq/nn.hpp"

namespace opfreq {

enum class ae_kind { one_layer, three_layer };

std::string_view to_string(ae_kind kind);

/// Training defaults for autoencoders: MSE reconstruction, no dropout.
nn::train_config default_ae_train_config();

struct ae_config {
    ae_kind kind = ae_kind::one_layer;
    std::size_t input_dim = 0;
    std::size_t code_dim = 32;
    std::vector<size_t> hidden; // AE-3L intermediate widths; empty selects the default
    nn::train_config train = default_ae_train_config();
};

/// AE-3L intermediate widths: geometric steps from input_dim down to code_dim, each
/// rounded to the nearest power of two and kept within [code_dim, previous width].
/// 1613 -> {512, 128} for a 32-wide code.
std::vector<std::size_t> default_ae3_hidden(std::size_t input_dim, std::size_t code_dim);

struct autoencoder {
    nn::network net;
    std::size_t bottleneck = 0; // index of the code layer
    ae_kind kind = ae_kind::one_layer;

    std::size_t code_dim() const { return net.layers()[bottleneck].spec.out_dim; }
    bool operator==(const autoencoder&) const = default;
};

/// Encoder of 1 or 3 ELU layers ending at code_dim, then the mirrored decoder whose
/// last layer is linear. Throws error(invalid_dims) unless code_dim < input_dim.
autoencoder build_ae(const ae_config& config, std::uint64_t seed);

struct ae_train_result {
    autoencoder ae;
    std::vector<double> loss_history;
};

/// Reconstruction training: targets are the inputs themselves. Loss is forced to MSE.
ae_train_result train_ae(autoencoder ae, const matrix& features, nn::train_config config);

/// Bottleneck activations, dropout off.
matrix encode(const autoencoder& ae, const matrix& features);

std::vector<std::string> code_feature_names(std::size_t code_dim);

nlohmann::json to_json(const autoencoder& ae);
autoencoder autoencoder_from_json(const nlohmann::json& j);

} // namespace opfreq
