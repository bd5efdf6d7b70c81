#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "opfreq/matrix.hpp"
#include "opfreq/rng.hpp"

namespace opfreq::nn {

enum class activation { elu, sigmoid, linear };
enum class loss_kind { bce, mse };

std::string_view to_string(activation a);
activation activation_from_string(std::string_view s);
std::string_view to_string(loss_kind l);
loss_kind loss_from_string(std::string_view s);

inline constexpr double bce_epsilon = 1e-7;

double elu(double x);
/// Numerically stable logistic function.
double sigmoid(double x);
/// Binary cross-entropy with q clamped to [1e-7, 1 - 1e-7].
double bce_loss(double y, double q);

/// Mean over samples of the per-sample mean over output units.
double batch_loss(loss_kind loss, const matrix& outputs, const matrix& targets);

struct layer_spec {
    std::size_t in_dim = 0;
    std::size_t out_dim = 0;
    activation act = activation::linear;

    bool operator==(const layer_spec&) const = default;
};

struct dense_layer {
    layer_spec spec;
    matrix weights; // out_dim x in_dim
    std::vector<double> bias;

    bool operator==(const dense_layer&) const = default;
};

class network {
  public:
    network() = default;

    /// Zero weights and biases. Throws error(invalid_dims) for zero dims or a broken chain.
    explicit network(const std::vector<layer_spec>& specs);

    /// Seeded uniform init: He-style limit sqrt(6/in) for ELU layers, Xavier-style
    /// sqrt(6/(in+out)) otherwise. Biases start at zero.
    static network initialized(const std::vector<layer_spec>& specs, std::uint64_t seed);

    std::vector<dense_layer>& layers() noexcept { return layers_; }
    const std::vector<dense_layer>& layers() const noexcept { return layers_; }
    std::size_t depth() const noexcept { return layers_.size(); }
    std::size_t input_dim() const { return layers_.front().spec.in_dim; }
    std::size_t output_dim() const { return layers_.back().spec.out_dim; }
    std::vector<layer_spec> specs() const;

    bool operator==(const network&) const = default;

  private:
    std::vector<dense_layer> layers_;
};

/// k weight layers: k-1 ELU hidden layers then a sigmoid prediction layer.
/// `widths` lists every layer's output width and must end in 1.
network build_dnn(std::size_t input_dim, std::span<const std::size_t> widths, std::uint64_t seed);

/// Hidden widths used for the 2-, 4- and 7-layer classifiers.
std::vector<std::size_t> default_dnn_widths(int layers);

struct train_config {
    std::size_t batch_size = 64;
    double dropout_rate = 0.1;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::size_t epochs = 50;
    loss_kind loss = loss_kind::bce;
    std::uint64_t seed = 0;

    /// Throws error(invalid_params) when a field is out of range.
    void validate() const;

    bool operator==(const train_config&) const = default;
};

nlohmann::json to_json(const train_config& c);
train_config train_config_from_json(const nlohmann::json& j);

/// Per-layer values recorded by a forward pass. post[i] already includes dropout.
struct forward_trace {
    std::vector<matrix> pre;
    std::vector<matrix> post;
    std::vector<matrix> masks; // empty matrix when layer i had no dropout

    const matrix& output() const { return post.back(); }
};

/// Inference pass, no dropout.
forward_trace forward(const network& net, const matrix& batch);

/// Training pass: inverted dropout after every ELU layer except the last layer.
forward_trace forward(const network& net, const matrix& batch, double dropout_rate, rng& dropout_rng);

/// Stops after layer `last_layer` (inclusive), no dropout.
matrix forward_until(const network& net, const matrix& batch, std::size_t last_layer);

struct gradients {
    std::vector<matrix> weights;
    std::vector<std::vector<double>> bias;

    static gradients zeros_like(const network& net);
};

/// Exact gradients of batch_loss(loss, output, targets) for the recorded trace.
gradients backward(const network& net, const forward_trace& trace, const matrix& batch, const matrix& targets,
                   loss_kind loss);

struct adam_state {
    gradients m;
    gradients v;
    std::uint64_t t = 0;

    static adam_state zeros_like(const network& net);
};

/// One Adam update with bias-corrected moments; t is incremented first.
void adam_step(network& net, adam_state& state, const gradients& grads, const train_config& config);

struct train_result {
    network net;
    std::vector<double> loss_history; // mean training loss per epoch
};

/// Mini-batch Adam training. Rows are reshuffled every epoch; the last batch may be short.
/// Throws error(empty_dataset) or error(dimension_mismatch).
train_result train(network net, const matrix& inputs, const matrix& targets, const train_config& config);

/// Sigmoid output of a single-output network, dropout off.
std::vector<double> predict(const network& net, const matrix& inputs);

/// Label 1 iff probability > threshold.
std::vector<int> classify(std::span<const double> probabilities, double threshold = 0.5);

matrix labels_as_targets(std::span<const int> labels);

/// Checkpoint document: format tag, version, layer specs, row-major weights, biases.
nlohmann::json to_json(const network& net);
network network_from_json(const nlohmann::json& j);

void write_loss_history_csv(std::ostream& out, std::span<const double> history);

} // namespace opfreq::nn
