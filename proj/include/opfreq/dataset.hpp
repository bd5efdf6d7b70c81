#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "opfreq/disasm.hpp"
#include "opfreq/matrix.hpp"

namespace opfreq {

inline constexpr int malware_label = 1;
inline constexpr int benign_label = 0;

/// Feature matrix with one binary label and one provenance id per row.
struct labeled_dataset {
    matrix features;
    std::vector<int> labels;
    std::vector<std::string> feature_names;
    std::vector<std::string> source_ids;

    std::size_t size() const noexcept { return labels.size(); }
    std::size_t dims() const noexcept { return features.cols(); }
    std::size_t count(int label) const;

    /// Throws unless row/label/id counts agree, names match the column count, and
    /// labels are 0 or 1.
    void validate() const;

    labeled_dataset subset(std::span<const std::size_t> rows) const;
    void append(const labeled_dataset& other);
};

labeled_dataset dataset_from_histograms(std::span<const opcode_histogram> histograms, std::span<const int> labels,
                                        const master_opcode_list& master);

/// Header `source_id,label,<feature names...>`, one row per sample.
void write_dataset_csv(std::ostream& out, const labeled_dataset& data);
labeled_dataset read_dataset_csv(std::istream& in);

/// Reorders `data` columns to `names`; absent columns become zero, extra ones are dropped.
labeled_dataset align_columns(const labeled_dataset& data, const std::vector<std::string>& names);

struct split_pair {
    labeled_dataset train;
    labeled_dataset test;
    std::uint64_t seed = 0;
};

/// Per-class 2:1 split. Each class is shuffled independently and its first
/// floor(2n/3) rows go to train. Both partitions keep input row order.
/// Throws error(insufficient_class) when a class has fewer than 3 rows.
split_pair split(const labeled_dataset& data, std::uint64_t seed);

nlohmann::json split_manifest(const split_pair& pair);

/// Where one synthetic row came from: base + lambda * (neighbor - base).
struct synthetic_origin {
    std::size_t base_row = 0;
    std::size_t neighbor_row = 0;
    double lambda = 0.0;
};

struct adasyn_result {
    labeled_dataset data; // originals first, then synthetics in minority-row order
    std::vector<synthetic_origin> origins;
    int minority_label = benign_label;
};

/// Adaptive synthetic oversampling of the minority class.
///
/// G = round(beta * (n_maj - n_min)) rows are generated. Each minority row's share
/// follows the fraction of majority points among its k nearest neighbours in the
/// full set, apportioned by largest remainder so the shares sum to exactly G.
/// Interpolation partners come from the minority members of those neighbours,
/// falling back to any other minority row.
adasyn_result adasyn(const labeled_dataset& train, std::size_t k, double beta, std::uint64_t seed);

class min_max_scaler {
  public:
    /// Throws error(empty_dataset) when `train` has no rows.
    static min_max_scaler fit(const matrix& train);

    /// x' = (x - min) / range, clipped to [0, 1]; zero-range features map to 0.
    matrix transform(const matrix& data) const;
    labeled_dataset transform(const labeled_dataset& data) const;

    const std::vector<double>& min() const noexcept { return min_; }
    const std::vector<double>& range() const noexcept { return range_; }

    nlohmann::json to_json() const;
    static min_max_scaler from_json(const nlohmann::json& j);

    bool operator==(const min_max_scaler&) const = default;

  private:
    std::vector<double> min_;
    std::vector<double> range_;
};

} // namespace opfreq
