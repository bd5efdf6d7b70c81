#include "opfreq/feature_select.hpp"

#include <algorithm>

#include "opfreq/error.hpp"

namespace opfreq {

std::vector<double> column_variance(const matrix& m) {
    if (m.rows() == 0) {
        throw error(errc::empty_matrix, "variance of a matrix with no rows");
    }
    const std::size_t d = m.cols();
    const auto n = static_cast<double>(m.rows());
    std::vector<double> mean(d, 0.0);
    for (std::size_t r = 0; r < m.rows(); ++r) {
        auto row = m.row(r);
        for (std::size_t j = 0; j < d; ++j) {
            mean[j] += row[j];
        }
    }
    for (auto& v : mean) {
        v /= n;
    }
    std::vector<double> var(d, 0.0);
    for (std::size_t r = 0; r < m.rows(); ++r) {
        auto row = m.row(r);
        for (std::size_t j = 0; j < d; ++j) {
            const double dev = row[j] - mean[j];
            var[j] += dev * dev;
        }
    }
    for (auto& v : var) {
        v /= n;
    }
    return var;
}

std::size_t feature_mask::kept() const {
    return static_cast<std::size_t>(std::ranges::count(keep, true));
}

std::vector<std::size_t> feature_mask::kept_indices() const {
    std::vector<std::size_t> idx;
    for (std::size_t j = 0; j < keep.size(); ++j) {
        if (keep[j]) {
            idx.push_back(j);
        }
    }
    return idx;
}

feature_mask fit_mask(const matrix& train, double threshold) {
    if (!(threshold >= 0.0)) {
        throw error(errc::invalid_params, "variance threshold must be non-negative");
    }
    feature_mask mask;
    mask.threshold = threshold;
    mask.variances = column_variance(train);
    mask.keep.resize(mask.variances.size());
    for (std::size_t j = 0; j < mask.variances.size(); ++j) {
        mask.keep[j] = mask.variances[j] > threshold;
    }
    return mask;
}

matrix apply_mask(const feature_mask& mask, const matrix& m) {
    if (m.cols() != mask.keep.size()) {
        throw error(errc::dimension_mismatch, "mask has " + std::to_string(mask.keep.size()) +
                                                  " features, matrix has " + std::to_string(m.cols()));
    }
    return select_cols(m, mask.kept_indices());
}

labeled_dataset apply_mask(const feature_mask& mask, const labeled_dataset& data) {
    labeled_dataset out;
    out.features = apply_mask(mask, data.features);
    out.labels = data.labels;
    out.source_ids = data.source_ids;
    for (auto j : mask.kept_indices()) {
        out.feature_names.push_back(data.feature_names[j]);
    }
    return out;
}

nlohmann::json mask_to_json(const feature_mask& mask, const std::vector<std::string>& feature_names) {
    if (feature_names.size() != mask.keep.size()) {
        throw error(errc::dimension_mismatch, "feature names do not match mask width");
    }
    nlohmann::json features = nlohmann::json::array();
    for (std::size_t j = 0; j < mask.keep.size(); ++j) {
        features.push_back({{"name", feature_names[j]}, {"variance", mask.variances[j]}, {"keep", bool(mask.keep[j])}});
    }
    return {
        {"threshold", mask.threshold},
        {"variance", "population"},
        {"rule", "variance > threshold"},
        {"features", std::move(features)},
    };
}

feature_mask mask_from_json(const nlohmann::json& j) {
    feature_mask mask;
    mask.threshold = j.at("threshold").get<double>();
    for (const auto& f : j.at("features")) {
        mask.variances.push_back(f.at("variance").get<double>());
        mask.keep.push_back(f.at("keep").get<bool>());
    }
    return mask;
}

} // namespace opfreq
