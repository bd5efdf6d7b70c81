#include <catch2/catch_amalgamated.hpp>

#include "opfreq/autoencoder.hpp"
#include "opfreq/dataset.hpp"
#include "opfreq/error.hpp"
#include "opfreq/rng.hpp"

using namespace opfreq;

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

std::vector<std::size_t> dims_of(const nn::network& net) {
    std::vector<std::size_t> d{net.input_dim()};
    for (const auto& l : net.layers()) d.push_back(l.spec.out_dim);
    return d;
}

// n x d data generated by two latent factors, scaled into [0, 1].
matrix rank_two(std::size_t n, std::size_t d, std::uint64_t seed) {
    rng r(seed);
    matrix basis(2, d);
    for (auto& v : basis.data()) v = r.uniform(-1, 1);
    matrix x(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        const double a = r.uniform(-1, 1), b = r.uniform(-1, 1);
        for (std::size_t j = 0; j < d; ++j) x(i, j) = a * basis(0, j) + b * basis(1, j);
    }
    return min_max_scaler::fit(x).transform(x);
}

} // namespace

TEST_CASE("AE-1L layout") {
    const auto ae = build_ae({ae_kind::one_layer, 100, 32, {}, default_ae_train_config()}, 1);
    CHECK(dims_of(ae.net) == std::vector<std::size_t>{100, 32, 100});
    CHECK(ae.net.depth() == 2);
    CHECK(ae.bottleneck == 0);
    CHECK(ae.code_dim() == 32);
    CHECK(ae.net.layers()[0].spec.act == nn::activation::elu);
    CHECK(ae.net.layers()[1].spec.act == nn::activation::linear);
}

TEST_CASE("AE-3L layout with default widths") {
    CHECK(default_ae3_hidden(1613, 32) == std::vector<std::size_t>{512, 128});
    const auto ae = build_ae({ae_kind::three_layer, 1613, 32, {}, default_ae_train_config()}, 1);
    CHECK(dims_of(ae.net) == std::vector<std::size_t>{1613, 512, 128, 32, 128, 512, 1613});
    CHECK(ae.bottleneck == 2);
    for (std::size_t l = 0; l + 1 < ae.net.depth(); ++l) CHECK(ae.net.layers()[l].spec.act == nn::activation::elu);
    CHECK(ae.net.layers().back().spec.act == nn::activation::linear);
}

TEST_CASE("AE-3L default widths stay between code and input") {
    for (std::size_t d : {34, 40, 60, 100, 300, 616, 5000}) {
        const auto h = default_ae3_hidden(d, 32);
        REQUIRE(h.size() == 2);
        CHECK(h[0] <= d);
        CHECK(h[0] >= h[1]);
        CHECK(h[1] >= 32);
    }
    CHECK(default_ae3_hidden(60, 32) == std::vector<std::size_t>{60, 32});
}

TEST_CASE("invalid autoencoder dims") {
    CHECK(code_of([] { build_ae({ae_kind::one_layer, 32, 32, {}, {}}, 1); }) == errc::invalid_dims);
    CHECK(code_of([] { build_ae({ae_kind::one_layer, 10, 40, {}, {}}, 1); }) == errc::invalid_dims);
    CHECK(code_of([] { build_ae({ae_kind::three_layer, 100, 8, {50}, {}}, 1); }) == errc::invalid_dims);
}

TEST_CASE("encode gives code_dim columns for either kind") {
    rng r(2);
    matrix x(7, 50);
    for (auto& v : x.data()) v = r.uniform();
    for (auto kind : {ae_kind::one_layer, ae_kind::three_layer}) {
        const auto ae = build_ae({kind, 50, 32, {}, default_ae_train_config()}, 3);
        const auto code = encode(ae, x);
        CHECK(code.rows() == 7);
        CHECK(code.cols() == 32);
    }
    const auto ae = build_ae({ae_kind::one_layer, 50, 32, {}, {}}, 3);
    CHECK(code_of([&] { encode(ae, matrix(2, 49)); }) == errc::dimension_mismatch);
    CHECK(code_feature_names(3) == std::vector<std::string>{"code_0", "code_1", "code_2"});
}

TEST_CASE("zero-weight autoencoder encodes to zeros") {
    auto ae = build_ae({ae_kind::three_layer, 20, 4, {}, {}}, 5);
    for (auto& l : ae.net.layers()) {
        for (auto& w : l.weights.data()) w = 0;
    }
    CHECK(encode(ae, matrix(3, 20, 0.7)) == matrix(3, 4, 0.0));
}

TEST_CASE("duplicate rows give duplicate codes") {
    rng r(6);
    std::vector<double> row(12);
    for (auto& v : row) v = r.uniform();
    matrix x(0, 12);
    x.append_row(row);
    x.append_row(row);
    const auto code = encode(build_ae({ae_kind::one_layer, 12, 3, {}, {}}, 1), x);
    CHECK(std::ranges::equal(code.row(0), code.row(1)));
}

TEST_CASE("zero epochs leave the network unchanged; training is deterministic") {
    const auto x = rank_two(80, 10, 1);
    const auto ae = build_ae({ae_kind::one_layer, 10, 2, {}, {}}, 9);
    auto c = default_ae_train_config();
    c.epochs = 0;
    CHECK(train_ae(ae, x, c).ae == ae);

    c.epochs = 5;
    c.seed = 4;
    const auto a = train_ae(ae, x, c);
    const auto b = train_ae(ae, x, c);
    CHECK(a.loss_history == b.loss_history);
    CHECK(a.ae == b.ae);
    // Loss is forced to MSE whatever the caller passes.
    c.loss = nn::loss_kind::bce;
    CHECK(train_ae(ae, x, c).loss_history == a.loss_history);
    CHECK(code_of([&] { train_ae(ae, matrix(0, 10), default_ae_train_config()); }) == errc::empty_dataset);
}

TEST_CASE("rank-two data compresses through a 2-unit code") {
    const auto x = rank_two(500, 20, 7);
    auto c = default_ae_train_config();
    c.epochs = 300;
    c.seed = 1;
    const auto result = train_ae(build_ae({ae_kind::one_layer, 20, 2, {}, c}, 1), x, c);
    REQUIRE(result.loss_history.size() == 300);
    CHECK(result.loss_history.back() < 0.1 * result.loss_history.front());
}

TEST_CASE("autoencoder checkpoint round trip") {
    const auto ae = build_ae({ae_kind::three_layer, 64, 8, {32, 16}, {}}, 12);
    const auto j = to_json(ae);
    CHECK(j.at("bottleneck_layer") == 2);
    CHECK(autoencoder_from_json(nlohmann::json::parse(j.dump())) == ae);
}
