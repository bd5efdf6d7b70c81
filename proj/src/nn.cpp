#include "opfreq/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "opfreq/csv.hpp"
#include "opfreq/error.hpp"

namespace opfreq::nn {

std::string_view to_string(activation a) {
    switch (a) {
    case activation::elu: return "elu";
    case activation::sigmoid: return "sigmoid";
    case activation::linear: return "linear";
    }
    return "linear";
}

activation activation_from_string(std::string_view s) {
    if (s == "elu") return activation::elu;
    if (s == "sigmoid") return activation::sigmoid;
    if (s == "linear") return activation::linear;
    throw error(errc::parse_error, "unknown activation '" + std::string(s) + "'");
}

std::string_view to_string(loss_kind l) { return l == loss_kind::bce ? "bce" : "mse"; }

loss_kind loss_from_string(std::string_view s) {
    if (s == "bce") return loss_kind::bce;
    if (s == "mse") return loss_kind::mse;
    throw error(errc::parse_error, "unknown loss '" + std::string(s) + "'");
}

double elu(double x) { return x > 0.0 ? x : std::expm1(x); }

double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double bce_loss(double y, double q) {
    q = std::clamp(q, bce_epsilon, 1.0 - bce_epsilon);
    return -(y * std::log(q) + (1.0 - y) * std::log(1.0 - q));
}

double batch_loss(loss_kind loss, const matrix& outputs, const matrix& targets) {
    if (outputs.rows() != targets.rows() || outputs.cols() != targets.cols()) {
        throw error(errc::dimension_mismatch, "outputs and targets differ in shape");
    }
    if (outputs.rows() == 0 || outputs.cols() == 0) {
        return 0.0;
    }
    double total = 0.0;
    auto out = outputs.data();
    auto tgt = targets.data();
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (loss == loss_kind::mse) {
            const double d = out[i] - tgt[i];
            total += d * d;
        } else {
            total += bce_loss(tgt[i], out[i]);
        }
    }
    return total / static_cast<double>(out.size());
}

namespace {

double activate(activation a, double z) {
    switch (a) {
    case activation::elu: return elu(z);
    case activation::sigmoid: return sigmoid(z);
    case activation::linear: return z;
    }
    return z;
}

// Derivative expressed through the pre-activation z.
double activation_slope(activation a, double z) {
    switch (a) {
    case activation::elu: return z > 0.0 ? 1.0 : std::exp(z);
    case activation::sigmoid: {
        const double s = sigmoid(z);
        return s * (1.0 - s);
    }
    case activation::linear: return 1.0;
    }
    return 1.0;
}

matrix transpose(const matrix& m) {
    matrix t(m.cols(), m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) {
            t(c, r) = m(r, c);
        }
    }
    return t;
}

// z = a * W^T + b, with W^T passed pre-transposed (in x out) so the inner loop is contiguous.
matrix affine(const matrix& a, const matrix& wt, std::span<const double> bias) {
    matrix z(a.rows(), wt.cols());
    for (std::size_t r = 0; r < a.rows(); ++r) {
        auto zr = z.row(r);
        std::ranges::copy(bias, zr.begin());
        auto ar = a.row(r);
        for (std::size_t i = 0; i < ar.size(); ++i) {
            const double v = ar[i];
            if (v == 0.0) {
                continue;
            }
            auto w = wt.row(i);
            for (std::size_t o = 0; o < zr.size(); ++o) {
                zr[o] += v * w[o];
            }
        }
    }
    return z;
}

void check_input(const network& net, const matrix& batch) {
    if (net.depth() == 0) {
        throw error(errc::invalid_dims, "network has no layers");
    }
    if (batch.cols() != net.input_dim()) {
        throw error(errc::dimension_mismatch, "batch has " + std::to_string(batch.cols()) +
                                                  " columns, network expects " + std::to_string(net.input_dim()));
    }
}

forward_trace run_forward(const network& net, const matrix& batch, std::size_t last_layer, double dropout_rate,
                          rng* dropout_rng) {
    check_input(net, batch);
    forward_trace trace;
    const matrix* input = &batch;
    for (std::size_t l = 0; l <= last_layer; ++l) {
        const auto& layer = net.layers()[l];
        matrix z = affine(*input, transpose(layer.weights), layer.bias);
        matrix a(z.rows(), z.cols());
        auto zd = z.data();
        auto ad = a.data();
        for (std::size_t i = 0; i < zd.size(); ++i) {
            ad[i] = activate(layer.spec.act, zd[i]);
        }
        matrix mask;
        const bool drop = dropout_rng != nullptr && dropout_rate > 0.0 && layer.spec.act == activation::elu &&
                          l + 1 < net.depth();
        if (drop) {
            mask = matrix(a.rows(), a.cols());
            const double scale = 1.0 / (1.0 - dropout_rate);
            auto md = mask.data();
            for (std::size_t i = 0; i < ad.size(); ++i) {
                md[i] = dropout_rng->uniform() < dropout_rate ? 0.0 : scale;
                ad[i] *= md[i];
            }
        }
        trace.pre.push_back(std::move(z));
        trace.post.push_back(std::move(a));
        trace.masks.push_back(std::move(mask));
        input = &trace.post.back();
    }
    return trace;
}

} // namespace

network::network(const std::vector<layer_spec>& specs) {
    if (specs.empty()) {
        throw error(errc::invalid_dims, "network needs at least one layer");
    }
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const auto& s = specs[i];
        if (s.in_dim == 0 || s.out_dim == 0) {
            throw error(errc::invalid_dims, "layer " + std::to_string(i) + " has a zero dimension");
        }
        if (i > 0 && specs[i - 1].out_dim != s.in_dim) {
            throw error(errc::invalid_dims, "layer " + std::to_string(i) + " input does not match previous output");
        }
        layers_.push_back({s, matrix(s.out_dim, s.in_dim), std::vector<double>(s.out_dim, 0.0)});
    }
}

network network::initialized(const std::vector<layer_spec>& specs, std::uint64_t seed) {
    network net(specs);
    rng r(derive_seed(seed, 0x696e6974)); // "init"
    for (auto& layer : net.layers_) {
        const auto in = static_cast<double>(layer.spec.in_dim);
        const auto out = static_cast<double>(layer.spec.out_dim);
        const double limit =
            layer.spec.act == activation::elu ? std::sqrt(6.0 / in) : std::sqrt(6.0 / (in + out));
        for (auto& w : layer.weights.data()) {
            w = r.uniform(-limit, limit);
        }
    }
    return net;
}

std::vector<layer_spec> network::specs() const {
    std::vector<layer_spec> out;
    for (const auto& l : layers_) {
        out.push_back(l.spec);
    }
    return out;
}

network build_dnn(std::size_t input_dim, std::span<const std::size_t> widths, std::uint64_t seed) {
    if (widths.empty() || widths.back() != 1) {
        throw error(errc::invalid_dims, "classifier widths must end with a single sigmoid unit");
    }
    std::vector<layer_spec> specs;
    std::size_t in = input_dim;
    for (std::size_t i = 0; i < widths.size(); ++i) {
        specs.push_back({in, widths[i], i + 1 == widths.size() ? activation::sigmoid : activation::elu});
        in = widths[i];
    }
    return network::initialized(specs, seed);
}

std::vector<std::size_t> default_dnn_widths(int layers) {
    switch (layers) {
    case 2: return {64, 1};
    case 4: return {256, 64, 16, 1};
    case 7: return {512, 256, 128, 64, 32, 16, 1};
    default: throw error(errc::invalid_params, "no default widths for a " + std::to_string(layers) + "-layer DNN");
    }
}

void train_config::validate() const {
    if (batch_size < 1) {
        throw error(errc::invalid_params, "batch_size must be at least 1");
    }
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
        throw error(errc::invalid_params, "dropout_rate must lie in [0, 1)");
    }
    if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
        throw error(errc::invalid_params, "Adam betas must lie in (0, 1)");
    }
    if (!(learning_rate >= 0.0) || !(epsilon > 0.0)) {
        throw error(errc::invalid_params, "learning_rate must be >= 0 and epsilon > 0");
    }
}

nlohmann::json to_json(const train_config& c) {
    return {
        {"batch_size", c.batch_size}, {"dropout_rate", c.dropout_rate}, {"learning_rate", c.learning_rate},
        {"beta1", c.beta1},           {"beta2", c.beta2},               {"epsilon", c.epsilon},
        {"epochs", c.epochs},         {"loss", to_string(c.loss)},      {"seed", c.seed},
    };
}

train_config train_config_from_json(const nlohmann::json& j) {
    train_config c;
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.dropout_rate = j.at("dropout_rate").get<double>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.beta1 = j.at("beta1").get<double>();
    c.beta2 = j.at("beta2").get<double>();
    c.epsilon = j.at("epsilon").get<double>();
    c.epochs = j.at("epochs").get<std::size_t>();
    c.loss = loss_from_string(j.at("loss").get<std::string>());
    c.seed = j.at("seed").get<std::uint64_t>();
    c.validate();
    return c;
}

forward_trace forward(const network& net, const matrix& batch) {
    return run_forward(net, batch, net.depth() - 1, 0.0, nullptr);
}

forward_trace forward(const network& net, const matrix& batch, double dropout_rate, rng& dropout_rng) {
    return run_forward(net, batch, net.depth() - 1, dropout_rate, &dropout_rng);
}

matrix forward_until(const network& net, const matrix& batch, std::size_t last_layer) {
    if (last_layer >= net.depth()) {
        throw error(errc::invalid_dims, "layer index out of range");
    }
    auto trace = run_forward(net, batch, last_layer, 0.0, nullptr);
    return std::move(trace.post.back());
}

gradients gradients::zeros_like(const network& net) {
    gradients g;
    for (const auto& l : net.layers()) {
        g.weights.emplace_back(l.weights.rows(), l.weights.cols());
        g.bias.emplace_back(l.bias.size(), 0.0);
    }
    return g;
}

gradients backward(const network& net, const forward_trace& trace, const matrix& batch, const matrix& targets,
                   loss_kind loss) {
    check_input(net, batch);
    const std::size_t depth = net.depth();
    if (trace.post.size() != depth) {
        throw error(errc::dimension_mismatch, "trace does not cover every layer");
    }
    const matrix& out = trace.output();
    if (targets.rows() != out.rows() || targets.cols() != out.cols()) {
        throw error(errc::dimension_mismatch, "targets do not match network output shape");
    }

    // delta = dL/dz for the current layer.
    const auto scale = 1.0 / static_cast<double>(out.rows() * out.cols());
    const auto out_act = net.layers().back().spec.act;
    matrix delta(out.rows(), out.cols());
    {
        auto dd = delta.data();
        auto od = out.data();
        auto td = targets.data();
        auto zd = trace.pre.back().data();
        for (std::size_t i = 0; i < dd.size(); ++i) {
            const double q = od[i];
            const double y = td[i];
            if (loss == loss_kind::mse) {
                dd[i] = 2.0 * (q - y) * scale * activation_slope(out_act, zd[i]);
            } else if (q < bce_epsilon || q > 1.0 - bce_epsilon) {
                dd[i] = 0.0; // clamped region is flat
            } else if (out_act == activation::sigmoid) {
                dd[i] = (q - y) * scale;
            } else {
                dd[i] = (-y / q + (1.0 - y) / (1.0 - q)) * scale * activation_slope(out_act, zd[i]);
            }
        }
    }

    gradients g = gradients::zeros_like(net);
    for (std::size_t l = depth; l-- > 0;) {
        const auto& layer = net.layers()[l];
        const matrix& input = l == 0 ? batch : trace.post[l - 1];
        auto& gw = g.weights[l];
        auto& gb = g.bias[l];
        for (std::size_t r = 0; r < delta.rows(); ++r) {
            auto dr = delta.row(r);
            auto ar = input.row(r);
            for (std::size_t o = 0; o < dr.size(); ++o) {
                const double d = dr[o];
                if (d == 0.0) {
                    continue;
                }
                gb[o] += d;
                auto gwo = gw.row(o);
                for (std::size_t i = 0; i < ar.size(); ++i) {
                    gwo[i] += d * ar[i];
                }
            }
        }
        if (l == 0) {
            break;
        }

        matrix upstream(delta.rows(), layer.spec.in_dim);
        for (std::size_t r = 0; r < delta.rows(); ++r) {
            auto dr = delta.row(r);
            auto ur = upstream.row(r);
            for (std::size_t o = 0; o < dr.size(); ++o) {
                const double d = dr[o];
                if (d == 0.0) {
                    continue;
                }
                auto wo = layer.weights.row(o);
                for (std::size_t i = 0; i < ur.size(); ++i) {
                    ur[i] += d * wo[i];
                }
            }
        }
        const auto prev_act = net.layers()[l - 1].spec.act;
        const auto& mask = trace.masks[l - 1];
        auto ud = upstream.data();
        auto zd = trace.pre[l - 1].data();
        for (std::size_t i = 0; i < ud.size(); ++i) {
            double v = ud[i] * activation_slope(prev_act, zd[i]);
            if (!mask.empty()) {
                v *= mask.data()[i];
            }
            ud[i] = v;
        }
        delta = std::move(upstream);
    }
    return g;
}

adam_state adam_state::zeros_like(const network& net) {
    return {gradients::zeros_like(net), gradients::zeros_like(net), 0};
}

namespace {

void adam_update(std::span<double> params, std::span<double> m, std::span<double> v, std::span<const double> g,
                 const train_config& c, double correction1, double correction2) {
    for (std::size_t i = 0; i < params.size(); ++i) {
        m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
        v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
        const double m_hat = m[i] / correction1;
        const double v_hat = v[i] / correction2;
        params[i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
}

} // namespace

void adam_step(network& net, adam_state& state, const gradients& grads, const train_config& config) {
    if (grads.weights.size() != net.depth() || state.m.weights.size() != net.depth()) {
        throw error(errc::dimension_mismatch, "gradient/state shapes do not match network");
    }
    ++state.t;
    const auto t = static_cast<double>(state.t);
    const double c1 = 1.0 - std::pow(config.beta1, t);
    const double c2 = 1.0 - std::pow(config.beta2, t);
    for (std::size_t l = 0; l < net.depth(); ++l) {
        auto& layer = net.layers()[l];
        adam_update(layer.weights.data(), state.m.weights[l].data(), state.v.weights[l].data(),
                    grads.weights[l].data(), config, c1, c2);
        adam_update(layer.bias, state.m.bias[l], state.v.bias[l], grads.bias[l], config, c1, c2);
    }
}

train_result train(network net, const matrix& inputs, const matrix& targets, const train_config& config) {
    config.validate();
    if (inputs.rows() == 0) {
        throw error(errc::empty_dataset, "no training rows");
    }
    check_input(net, inputs);
    if (targets.rows() != inputs.rows() || targets.cols() != net.output_dim()) {
        throw error(errc::dimension_mismatch, "targets do not match inputs/network output");
    }

    rng shuffle_rng(derive_seed(config.seed, 1));
    rng dropout_rng(derive_seed(config.seed, 2));
    adam_state state = adam_state::zeros_like(net);
    std::vector<std::size_t> order(inputs.rows());
    std::vector<double> history;
    history.reserve(config.epochs);

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        shuffle_rng.shuffle(std::span(order));
        double total = 0.0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            std::span<const std::size_t> idx(order.data() + start, end - start);
            const matrix xb = select_rows(inputs, idx);
            const matrix yb = select_rows(targets, idx);
            const auto trace = forward(net, xb, config.dropout_rate, dropout_rng);
            total += batch_loss(config.loss, trace.output(), yb) * static_cast<double>(idx.size());
            adam_step(net, state, backward(net, trace, xb, yb, config.loss), config);
        }
        history.push_back(total / static_cast<double>(order.size()));
    }
    return {std::move(net), std::move(history)};
}

std::vector<double> predict(const network& net, const matrix& inputs) {
    check_input(net, inputs);
    if (net.output_dim() != 1) {
        throw error(errc::dimension_mismatch, "predict needs a single-output network");
    }
    const auto trace = forward(net, inputs);
    const auto out = trace.output().data();
    return {out.begin(), out.end()};
}

std::vector<int> classify(std::span<const double> probabilities, double threshold) {
    std::vector<int> labels(probabilities.size());
    std::ranges::transform(probabilities, labels.begin(), [&](double p) { return p > threshold ? 1 : 0; });
    return labels;
}

matrix labels_as_targets(std::span<const int> labels) {
    matrix t(labels.size(), 1);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        t(i, 0) = static_cast<double>(labels[i]);
    }
    return t;
}

nlohmann::json to_json(const network& net) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : net.layers()) {
        layers.push_back({
            {"in", l.spec.in_dim},
            {"out", l.spec.out_dim},
            {"activation", to_string(l.spec.act)},
            {"weights", std::vector<double>(l.weights.data().begin(), l.weights.data().end())},
            {"bias", l.bias},
        });
    }
    return {{"format", "opfreq.network"}, {"version", 1}, {"layers", std::move(layers)}};
}

network network_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "opfreq.network" || j.value("version", 0) != 1) {
        throw error(errc::parse_error, "not an opfreq.network v1 checkpoint");
    }
    std::vector<layer_spec> specs;
    for (const auto& l : j.at("layers")) {
        specs.push_back({l.at("in").get<std::size_t>(), l.at("out").get<std::size_t>(),
                         activation_from_string(l.at("activation").get<std::string>())});
    }
    network net(specs);
    const auto& layers = j.at("layers");
    for (std::size_t i = 0; i < specs.size(); ++i) {
        auto w = layers[i].at("weights").get<std::vector<double>>();
        auto b = layers[i].at("bias").get<std::vector<double>>();
        auto& layer = net.layers()[i];
        if (w.size() != layer.weights.data().size() || b.size() != layer.bias.size()) {
            throw error(errc::parse_error, "checkpoint layer " + std::to_string(i) + " has wrong parameter count");
        }
        std::ranges::copy(w, layer.weights.data().begin());
        layer.bias = std::move(b);
    }
    return net;
}

void write_loss_history_csv(std::ostream& out, std::span<const double> history) {
    out << "epoch,loss\n";
    for (std::size_t i = 0; i < history.size(); ++i) {
        out << (i + 1) << ',' << csv::format_number(history[i]) << '\n';
    }
}

} // namespace opfreq::nn
