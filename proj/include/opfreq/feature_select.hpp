#pragma once

#include <vector>

#include <json.hpp>

#include "opfreq/dataset.hpp"
#include "opfreq/matrix.hpp"

namespace opfreq {

/// Population variance (divide by n) of each column; two-pass mean-then-deviation.
/// Throws error(empty_matrix) for a matrix with no rows.
std::vector<double> column_variance(const matrix& m);

struct feature_mask {
    std::vector<bool> keep; // keep[j] iff variances[j] > threshold
    double threshold = 0.1;
    std::vector<double> variances;

    std::size_t kept() const;
    std::vector<std::size_t> kept_indices() const;
};

/// Variance-threshold filter fitted on training rows; features exactly at the threshold are dropped.
feature_mask fit_mask(const matrix& train, double threshold = 0.1);

/// Projects onto kept columns, preserving their order. May return an n x 0 matrix.
matrix apply_mask(const feature_mask& mask, const matrix& m);
labeled_dataset apply_mask(const feature_mask& mask, const labeled_dataset& data);

nlohmann::json mask_to_json(const feature_mask& mask, const std::vector<std::string>& feature_names);
feature_mask mask_from_json(const nlohmann::json& j);

} // namespace opfreq
