#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "opfreq/error.hpp"
#include "opfreq/nn.hpp"
#include "opfreq/rng.hpp"

using namespace opfreq;
using namespace opfreq::nn;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

errc code_of(auto&& fn) {
    try {
        fn();
    } catch (const error& e) {
        return e.code();
    }
    FAIL("expected an opfreq::error");
    return errc::parse_error;
}

matrix random_matrix(rng& r, std::size_t rows, std::size_t cols, double lo = -1, double hi = 1) {
    matrix m(rows, cols);
    for (auto& v : m.data()) v = r.uniform(lo, hi);
    return m;
}

double loss_at(const network& net, const matrix& x, const matrix& y, loss_kind loss) {
    return batch_loss(loss, forward(net, x).output(), y);
}

// Central differences over every weight and bias.
void check_gradients(network net, const matrix& x, const matrix& y, loss_kind loss) {
    const auto g = backward(net, forward(net, x), x, y, loss);
    const double h = 1e-5;
    auto compare = [&](double& param, double analytic) {
        const double saved = param;
        param = saved + h;
        const double up = loss_at(net, x, y, loss);
        param = saved - h;
        const double down = loss_at(net, x, y, loss);
        param = saved;
        const double numeric = (up - down) / (2 * h);
        CHECK(std::abs(analytic - numeric) <= std::max(1e-6, 1e-4 * std::abs(numeric)));
    };
    for (std::size_t l = 0; l < net.depth(); ++l) {
        auto& layer = net.layers()[l];
        for (std::size_t i = 0; i < layer.weights.rows(); ++i) {
            for (std::size_t j = 0; j < layer.weights.cols(); ++j) {
                compare(layer.weights(i, j), g.weights[l](i, j));
            }
            compare(layer.bias[i], g.bias[l][i]);
        }
    }
}

} // namespace

TEST_CASE("elu") {
    CHECK(elu(0.0) == 0.0);
    CHECK(elu(2.0) == 2.0);
    CHECK_THAT(elu(-1.0), WithinAbs(std::exp(-1.0) - 1.0, 1e-15));
    CHECK_THAT(elu(-1.0), WithinAbs(-0.63212, 1e-5));
}

TEST_CASE("sigmoid") {
    CHECK(sigmoid(0.0) == 0.5);
    CHECK_THAT(sigmoid(-2.0), WithinAbs(1.0 / (1.0 + std::exp(2.0)), 1e-15));
    CHECK_THAT(sigmoid(-2.0), WithinAbs(0.11920, 1e-5));
    for (double x : {-800.0, -30.0, -1.5, 0.25, 7.0, 30.0, 800.0}) {
        CHECK_THAT(sigmoid(x) + sigmoid(-x), WithinAbs(1.0, 1e-15));
        CHECK(std::isfinite(sigmoid(x)));
    }
}

TEST_CASE("binary cross-entropy") {
    CHECK_THAT(bce_loss(1, 1.0), WithinAbs(1e-7, 1e-12));
    CHECK_THAT(bce_loss(1, 0.5), WithinAbs(std::log(2.0), 1e-15));
    CHECK_THAT(bce_loss(1, 0.0), WithinAbs(-std::log(1e-7), 1e-12));
    CHECK_THAT(bce_loss(1, 0.0), WithinAbs(16.118, 1e-3));
    CHECK_THAT(bce_loss(0, 0.25), WithinAbs(-std::log(0.75), 1e-15));
}

TEST_CASE("forward examples") {
    network zero({{3, 4, activation::elu}, {4, 1, activation::sigmoid}});
    const auto x = matrix::from_rows({{1, -2, 3}, {0.5, 9, -4}});
    const auto t = forward(zero, x);
    CHECK(t.post[0] == matrix(2, 4, 0.0));
    CHECK(t.output() == matrix(2, 1, 0.5));

    network identity({{3, 3, activation::linear}});
    for (std::size_t i = 0; i < 3; ++i) identity.layers()[0].weights(i, i) = 1.0;
    CHECK(forward(identity, x).output() == x);

    rng r(1);
    const auto net = network::initialized({{3, 5, activation::elu}, {5, 2, activation::sigmoid}}, 3);
    rng d(9);
    CHECK(forward(net, x, 0.0, d).output() == forward(net, x).output());
    CHECK(code_of([&] { forward(net, matrix(2, 4)); }) == errc::dimension_mismatch);
}

TEST_CASE("network construction validates the chain") {
    CHECK(code_of([] { network({{3, 4, activation::elu}, {5, 1, activation::sigmoid}}); }) == errc::invalid_dims);
    CHECK(code_of([] { network({{0, 4, activation::elu}}); }) == errc::invalid_dims);
    CHECK(code_of([] { network(std::vector<layer_spec>{}); }) == errc::invalid_dims);
}

TEST_CASE("dnn builder and default widths") {
    CHECK(default_dnn_widths(2) == std::vector<std::size_t>{64, 1});
    CHECK(default_dnn_widths(4) == std::vector<std::size_t>{256, 64, 16, 1});
    CHECK(default_dnn_widths(7) == std::vector<std::size_t>{512, 256, 128, 64, 32, 16, 1});
    for (int k : {2, 4, 7}) {
        const auto w = default_dnn_widths(k);
        const auto net = build_dnn(60, w, 5);
        REQUIRE(net.depth() == static_cast<std::size_t>(k));
        CHECK(net.input_dim() == 60);
        CHECK(net.output_dim() == 1);
        for (std::size_t l = 0; l + 1 < net.depth(); ++l) CHECK(net.layers()[l].spec.act == activation::elu);
        CHECK(net.layers().back().spec.act == activation::sigmoid);
    }
    const std::vector<std::size_t> bad{8, 2};
    CHECK(code_of([&] { build_dnn(4, bad, 1); }) == errc::invalid_dims);
}

TEST_CASE("initialisation respects the fan-in limits and the seed") {
    const auto a = network::initialized({{10, 20, activation::elu}, {20, 1, activation::sigmoid}}, 42);
    const auto b = network::initialized({{10, 20, activation::elu}, {20, 1, activation::sigmoid}}, 42);
    const auto c = network::initialized({{10, 20, activation::elu}, {20, 1, activation::sigmoid}}, 43);
    CHECK(a == b);
    CHECK_FALSE(a == c);
    const double he = std::sqrt(6.0 / 10), xavier = std::sqrt(6.0 / 21);
    for (double w : a.layers()[0].weights.data()) CHECK(std::abs(w) <= he);
    for (double w : a.layers()[1].weights.data()) CHECK(std::abs(w) <= xavier);
    for (double v : a.layers()[0].bias) CHECK(v == 0.0);
}

TEST_CASE("analytic gradients match central differences") {
    rng r(2024);
    const activation acts[] = {activation::elu, activation::sigmoid, activation::linear};
    for (int trial = 0; trial < 24; ++trial) {
        const auto depth = 1 + r.below(3);
        const auto loss = trial % 2 == 0 ? loss_kind::bce : loss_kind::mse;
        std::vector<layer_spec> specs;
        std::size_t in = 1 + r.below(8);
        for (std::size_t l = 0; l < depth; ++l) {
            const bool last = l + 1 == depth;
            const std::size_t out = last && loss == loss_kind::bce ? 1 + r.below(2) : 1 + r.below(8);
            const auto act = last && loss == loss_kind::bce ? activation::sigmoid : acts[r.below(3)];
            specs.push_back({in, out, act});
            in = out;
        }
        auto net = network::initialized(specs, r.next());
        for (auto& layer : net.layers()) {
            for (auto& b : layer.bias) b = r.uniform(-0.5, 0.5);
        }
        const auto n = 1 + r.below(6);
        const auto x = random_matrix(r, n, specs.front().in_dim, -2, 2);
        matrix y(n, specs.back().out_dim);
        for (auto& v : y.data()) v = loss == loss_kind::bce ? static_cast<double>(r.below(2)) : r.uniform(-1, 1);
        INFO("trial " << trial);
        check_gradients(net, x, y, loss);
    }
}

TEST_CASE("gradients vanish at a perfect mse fit") {
    rng r(3);
    const auto net = network::initialized({{4, 3, activation::elu}, {3, 2, activation::linear}}, 8);
    const auto x = random_matrix(r, 5, 4);
    const auto y = forward(net, x).output();
    const auto g = backward(net, forward(net, x), x, y, loss_kind::mse);
    for (const auto& w : g.weights) {
        for (double v : w.data()) CHECK(v == 0.0);
    }
    for (const auto& b : g.bias) {
        for (double v : b) CHECK(v == 0.0);
    }
}

TEST_CASE("duplicating every row leaves mean gradients unchanged") {
    rng r(4);
    const auto net = network::initialized({{3, 6, activation::elu}, {6, 1, activation::sigmoid}}, 2);
    const auto x = random_matrix(r, 4, 3);
    const auto y = matrix::from_rows({{1}, {0}, {0}, {1}});
    matrix x2(0, 3), y2(0, 1);
    for (std::size_t i = 0; i < 4; ++i) {
        x2.append_row(x.row(i));
        x2.append_row(x.row(i));
        y2.append_row(y.row(i));
        y2.append_row(y.row(i));
    }
    const auto g1 = backward(net, forward(net, x), x, y, loss_kind::bce);
    const auto g2 = backward(net, forward(net, x2), x2, y2, loss_kind::bce);
    for (std::size_t l = 0; l < net.depth(); ++l) {
        for (std::size_t k = 0; k < g1.weights[l].data().size(); ++k) {
            CHECK_THAT(g2.weights[l].data()[k], WithinAbs(g1.weights[l].data()[k], 1e-14));
        }
    }
}

TEST_CASE("adam first step moves each parameter by about lr") {
    network net({{2, 1, activation::linear}});
    auto state = adam_state::zeros_like(net);
    auto g = gradients::zeros_like(net);
    g.weights[0](0, 0) = 0.3;
    g.weights[0](0, 1) = -2e-3;
    train_config c;
    c.learning_rate = 1e-3;
    adam_step(net, state, g, c);
    CHECK(state.t == 1);
    CHECK_THAT(net.layers()[0].weights(0, 0), WithinAbs(-1e-3, 1e-9));
    CHECK_THAT(net.layers()[0].weights(0, 1), WithinAbs(1e-3, 1e-8));
    CHECK(net.layers()[0].bias[0] == 0.0); // zero gradient, zero move

    // Hand-computed second step for the first weight.
    const double w1 = net.layers()[0].weights(0, 0);
    CHECK(w1 == -1e-3 * 0.3 / (0.3 + 1e-8));
    adam_step(net, state, g, c);
    const double m = 0.1 * 0.3 * 0.9 + 0.1 * 0.3, v = 0.001 * 0.09 * 0.999 + 0.001 * 0.09;
    const double mh = m / (1 - 0.81), vh = v / (1 - 0.999 * 0.999);
    CHECK_THAT(net.layers()[0].weights(0, 0), WithinAbs(w1 - 1e-3 * mh / (std::sqrt(vh) + 1e-8), 1e-15));
}

TEST_CASE("adam with zero gradients leaves parameters alone") {
    auto net = network::initialized({{3, 2, activation::elu}, {2, 1, activation::sigmoid}}, 1);
    const auto before = net;
    auto state = adam_state::zeros_like(net);
    adam_step(net, state, gradients::zeros_like(net), train_config{});
    CHECK(net == before);
}

TEST_CASE("training with learning rate 0 changes nothing") {
    rng r(5);
    const auto net = build_dnn(3, std::vector<std::size_t>{8, 1}, 4);
    const auto x = random_matrix(r, 30, 3);
    matrix y(30, 1);
    for (auto& v : y.data()) v = static_cast<double>(r.below(2));
    train_config c;
    c.learning_rate = 0.0;
    c.epochs = 5;
    CHECK(train(net, x, y, c).net == net);
}

TEST_CASE("separable toy set is learned by DNN-2L") {
    rng r(6);
    matrix x(0, 2), y(0, 1);
    while (x.rows() < 120) {
        const double a = r.uniform(-1, 1), b = r.uniform(-1, 1);
        if (std::abs(a + b) < 0.2) continue; // margin
        x.append_row(std::vector<double>{a, b});
        y.append_row(std::vector<double>{a + b > 0 ? 1.0 : 0.0});
    }
    train_config c;
    c.epochs = 200;
    c.seed = 11;
    const auto result = train(build_dnn(2, default_dnn_widths(2), 11), x, y, c);
    REQUIRE(result.loss_history.size() == 200);
    CHECK(result.loss_history.back() < result.loss_history.front());
    const auto labels = classify(predict(result.net, x));
    for (std::size_t i = 0; i < x.rows(); ++i) CHECK(labels[i] == static_cast<int>(y(i, 0)));

    const auto again = train(build_dnn(2, default_dnn_widths(2), 11), x, y, c);
    CHECK(again.loss_history == result.loss_history);
    CHECK(again.net == result.net);
}

TEST_CASE("inverted dropout preserves the expected activation") {
    rng r(7);
    auto net = network::initialized({{4, 6, activation::elu}, {6, 1, activation::sigmoid}}, 3);
    for (auto& w : net.layers()[0].weights.data()) w = std::abs(w) + 0.1;
    const auto x = random_matrix(r, 3, 4, 0.2, 1.0);
    const auto clean = forward(net, x).post[0];
    matrix sum(clean.rows(), clean.cols());
    rng d(99);
    const int draws = 20000;
    for (int k = 0; k < draws; ++k) {
        const auto t = forward(net, x, 0.1, d);
        for (std::size_t i = 0; i < sum.data().size(); ++i) sum.data()[i] += t.post[0].data()[i];
    }
    for (std::size_t i = 0; i < sum.data().size(); ++i) {
        CHECK_THAT(sum.data()[i] / draws, WithinRel(clean.data()[i], 0.02));
    }
    // The prediction layer is never dropped.
    const auto t = forward(net, x, 0.5, d);
    CHECK(t.masks.back().empty());
}

TEST_CASE("full-batch descent on a convex logistic problem decreases loss every step") {
    rng r(8);
    const auto x = random_matrix(r, 40, 3);
    matrix y(40, 1);
    for (std::size_t i = 0; i < 40; ++i) y(i, 0) = x(i, 0) - 0.5 * x(i, 2) + r.uniform(-0.3, 0.3) > 0 ? 1 : 0;
    auto net = network::initialized({{3, 1, activation::sigmoid}}, 1);
    double prev = loss_at(net, x, y, loss_kind::bce);
    for (int step = 0; step < 100; ++step) {
        const auto g = backward(net, forward(net, x), x, y, loss_kind::bce);
        auto& layer = net.layers()[0];
        for (std::size_t k = 0; k < 3; ++k) layer.weights.data()[k] -= 1e-2 * g.weights[0].data()[k];
        layer.bias[0] -= 1e-2 * g.bias[0][0];
        const double now = loss_at(net, x, y, loss_kind::bce);
        CHECK(now < prev);
        prev = now;
    }
}

TEST_CASE("classify uses a strict threshold") {
    CHECK(classify(std::vector{0.5}) == std::vector{0});
    CHECK(classify(std::vector{0.2, 0.9}) == std::vector{0, 1});
    const network zero({{3, 2, activation::elu}, {2, 1, activation::sigmoid}});
    const auto probs = predict(zero, matrix(4, 3, 1.0));
    CHECK(probs == std::vector<double>(4, 0.5));
    CHECK(classify(probs) == std::vector<int>(4, 0));
}

TEST_CASE("train rejects empty or mismatched data") {
    const auto net = build_dnn(3, std::vector<std::size_t>{4, 1}, 1);
    CHECK(code_of([&] { train(net, matrix(0, 3), matrix(0, 1), train_config{}); }) == errc::empty_dataset);
    CHECK(code_of([&] { train(net, matrix(5, 2), matrix(5, 1), train_config{}); }) == errc::dimension_mismatch);
    CHECK(code_of([&] { train(net, matrix(5, 3), matrix(4, 1), train_config{}); }) == errc::dimension_mismatch);
    train_config bad;
    bad.dropout_rate = 1.0;
    CHECK(code_of([&] { bad.validate(); }) == errc::invalid_params);
}

TEST_CASE("checkpoint and config round trips") {
    const auto net = network::initialized({{5, 4, activation::elu}, {4, 2, activation::linear}}, 77);
    const auto j = to_json(net);
    CHECK(j.at("format") == "opfreq.network");
    CHECK(network_from_json(nlohmann::json::parse(j.dump())) == net);

    train_config c;
    c.epochs = 7;
    c.loss = loss_kind::mse;
    c.seed = 123456789012345ULL;
    CHECK(train_config_from_json(to_json(c)) == c);

    std::stringstream ss;
    write_loss_history_csv(ss, std::vector{0.5, 0.25});
    CHECK(ss.str() == "epoch,loss\n1,0.5\n2,0.25\n");
}
