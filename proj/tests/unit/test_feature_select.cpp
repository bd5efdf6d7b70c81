#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "opfreq/error.hpp"
#include "opfreq/feature_select.hpp"
#include "opfreq/rng.hpp"

using namespace opfreq;
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

// Textbook definition, accumulated in long double as an independent check.
std::vector<double> naive_variance(const matrix& m) {
    std::vector<double> out;
    for (std::size_t j = 0; j < m.cols(); ++j) {
        long double mean = 0;
        for (std::size_t i = 0; i < m.rows(); ++i) mean += m(i, j);
        mean /= m.rows();
        long double ss = 0;
        for (std::size_t i = 0; i < m.rows(); ++i) ss += (m(i, j) - mean) * (m(i, j) - mean);
        out.push_back(static_cast<double>(ss / m.rows()));
    }
    return out;
}

} // namespace

TEST_CASE("column variance examples") {
    CHECK(column_variance(matrix::from_rows({{0}, {1}, {0}, {1}})) == std::vector<double>{0.25});
    CHECK(column_variance(matrix::from_rows({{3}, {3}, {3}})) == std::vector<double>{0.0});
    CHECK(column_variance(matrix::from_rows({{4, -2, 9.5}})) == std::vector<double>{0, 0, 0});
    CHECK(code_of([] { column_variance(matrix(0, 2)); }) == errc::empty_matrix);
}

TEST_CASE("mask keeps strictly above threshold") {
    // Columns with population variances 0, 0.25 and 0.09.
    const auto m = matrix::from_rows({{5, 0, 0}, {5, 1, 0.6}, {5, 0, 0}, {5, 1, 0.6}});
    const auto v = column_variance(m);
    CHECK(v[0] == 0.0);
    CHECK(v[1] == 0.25);
    CHECK_THAT(v[2], WithinAbs(0.09, 1e-15));
    const auto mask = fit_mask(m, 0.1);
    CHECK(mask.keep == std::vector<bool>{false, true, false});
    CHECK(mask.kept_indices() == std::vector<std::size_t>{1});

    // Exactly at the threshold is dropped.
    CHECK(fit_mask(matrix::from_rows({{0}, {1}, {0}, {1}}), 0.25).kept() == 0);
}

TEST_CASE("threshold 0 keeps every non-constant column") {
    const auto m = matrix::from_rows({{1, 2}, {2, 2.5}});
    CHECK(fit_mask(m, 0.0).kept() == 2);
}

TEST_CASE("all-constant matrix keeps nothing") {
    const auto m = matrix::from_rows({{1, 2}, {1, 2}, {1, 2}});
    const auto mask = fit_mask(m);
    CHECK(mask.kept() == 0);
    const auto out = apply_mask(mask, m);
    CHECK(out.rows() == 3);
    CHECK(out.cols() == 0);
}

TEST_CASE("apply_mask checks width and preserves order") {
    const auto m = matrix::from_rows({{0, 1, 2, 3}, {10, 1, 20, 30}});
    const auto mask = fit_mask(m);
    CHECK(apply_mask(mask, m) == matrix::from_rows({{0, 2, 3}, {10, 20, 30}}));
    CHECK(code_of([&] { apply_mask(mask, matrix(2, 3)); }) == errc::dimension_mismatch);
    CHECK(code_of([] { fit_mask(matrix(2, 2), -1.0); }) == errc::invalid_params);
}

TEST_CASE("variance matches the naive oracle on random matrices") {
    rng r(11);
    for (int trial = 0; trial < 100; ++trial) {
        matrix m(1 + r.below(30), 1 + r.below(30));
        const int style = static_cast<int>(r.below(3));
        for (auto& v : m.data()) {
            v = style == 0 ? std::floor(r.uniform(0, 5)) : style == 1 ? r.uniform(-1e3, 1e3) : r.uniform(0, 0.7);
        }
        if (m.cols() > 1) {
            for (std::size_t i = 0; i < m.rows(); ++i) m(i, 0) = 4.0; // a constant column
        }
        const auto got = column_variance(m);
        const auto want = naive_variance(m);
        for (std::size_t j = 0; j < m.cols(); ++j) {
            CHECK_THAT(got[j], WithinRel(want[j], 1e-12) || WithinAbs(want[j], 1e-300));
        }
        const auto mask = fit_mask(m, 0.1);
        if (m.cols() > 1) CHECK_FALSE(mask.keep[0]);
        // Idempotent on the training matrix: masking the masked matrix keeps it whole.
        const auto once = apply_mask(mask, m);
        if (once.cols() > 0) {
            CHECK(apply_mask(fit_mask(once, 0.1), once) == once);
        }
    }
}

TEST_CASE("mask does not depend on test rows") {
    rng r(12);
    matrix train(20, 6), test(10, 6);
    for (auto& v : train.data()) v = std::floor(r.uniform(0, 3));
    for (auto& v : test.data()) v = r.uniform(-50, 50);
    const auto mask = fit_mask(train);
    const auto projected = apply_mask(mask, test);
    CHECK(projected.cols() == mask.kept());
    // Refitting after test data changes is impossible to observe: the mask is a pure
    // function of train.
    CHECK(fit_mask(train).keep == mask.keep);
}

TEST_CASE("mask JSON round trip") {
    const auto m = matrix::from_rows({{0, 1}, {1, 1}});
    const auto mask = fit_mask(m, 0.1);
    const auto j = mask_to_json(mask, {"mov", "push"});
    CHECK(j.at("variance") == "population");
    CHECK(j.at("features").size() == 2);
    CHECK(j.at("features")[0].at("name") == "mov");
    CHECK(j.at("features")[0].at("keep") == true);
    const auto back = mask_from_json(j);
    CHECK(back.keep == mask.keep);
    CHECK(back.variances == mask.variances);
    CHECK(back.threshold == mask.threshold);
}
