#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "opfreq/dataset.hpp"
#include "opfreq/matrix.hpp"
#include "opfreq/rng.hpp"

namespace opfreq::rf {

enum class max_features_rule { sqrt, all, fixed };

struct rf_config {
    std::size_t n_trees = 100;
    max_features_rule max_features = max_features_rule::sqrt;
    std::size_t max_features_k = 0; // used by max_features_rule::fixed
    std::size_t min_samples_split = 2;
    std::optional<std::size_t> max_depth;
    bool bootstrap = true;
    std::uint64_t seed = 0;

    void validate() const;
    /// Candidate features drawn at each node: ceil(sqrt(d)), d, or min(k, d).
    std::size_t features_per_split(std::size_t d) const;

    bool operator==(const rf_config&) const = default;
};

nlohmann::json to_json(const rf_config& c);
rf_config rf_config_from_json(const nlohmann::json& j);

/// 1 - sum_c (n_c / n)^2, and 0 for an empty node.
double gini(std::size_t n0, std::size_t n1);

struct split_choice {
    std::size_t feature = 0;
    double threshold = 0.0; // value <= threshold goes left
    double impurity_decrease = 0.0;
};

/// Best Gini split over `features` for the given rows (duplicates allowed). Thresholds are
/// midpoints between consecutive distinct values. Candidates are compared exactly in integer
/// arithmetic; ties go to the lower feature index, then the lower threshold. Returns nullopt
/// when no candidate strictly decreases impurity.
std::optional<split_choice> best_split(const matrix& x, std::span<const int> labels,
                                       std::span<const std::size_t> rows, std::span<const std::size_t> features);

struct tree_node {
    std::int32_t feature = -1; // -1 marks a leaf
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::array<std::uint32_t, 2> counts{}; // class counts of the training rows that reached the node

    bool is_leaf() const noexcept { return feature < 0; }
    /// Leaf vote; a tie goes to benign.
    int majority() const noexcept { return counts[1] > counts[0] ? 1 : 0; }

    bool operator==(const tree_node&) const = default;
};

/// CART tree stored as a preorder node array; node 0 is the root.
class decision_tree {
  public:
    decision_tree() = default;
    explicit decision_tree(std::vector<tree_node> nodes);

    const std::vector<tree_node>& nodes() const noexcept { return nodes_; }
    const tree_node& leaf_for(std::span<const double> row) const;
    int predict(std::span<const double> row) const { return leaf_for(row).majority(); }
    std::size_t depth() const;

    bool operator==(const decision_tree&) const = default;

  private:
    std::vector<tree_node> nodes_;
};

/// Grows one tree on `rows` (a bootstrap sample or all rows).
decision_tree fit_tree(const matrix& x, std::span<const int> labels, std::span<const std::size_t> rows,
                       const rf_config& config, rng& r);

struct forest {
    rf_config config;
    std::size_t n_features = 0;
    std::vector<decision_tree> trees;

    bool operator==(const forest&) const = default;
};

/// Tree t uses its own random stream seeded with config.seed + t.
forest fit(const matrix& x, std::span<const int> labels, const rf_config& config);
forest fit(const labeled_dataset& data, const rf_config& config);

/// Majority of tree votes; an even split goes to benign.
std::vector<int> predict(const forest& f, const matrix& x);
/// Fraction of trees voting malware.
std::vector<double> predict_proba(const forest& f, const matrix& x);

nlohmann::json to_json(const forest& f);
forest forest_from_json(const nlohmann::json& j);

} // namespace opfreq::rf
