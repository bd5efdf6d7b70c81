#include "opfreq/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "opfreq/error.hpp"

namespace opfreq::rf {
namespace {

__extension__ typedef unsigned __int128 u128;

struct class_counts {
    std::uint64_t n0 = 0;
    std::uint64_t n1 = 0;

    std::uint64_t total() const { return n0 + n1; }
    u128 sum_sq() const { return u128(n0) * n0 + u128(n1) * n1; }
};

// Weighted child Gini is n - (sum_sq(l)/n_l + sum_sq(r)/n_r) over n, so a split is
// better when the fraction sum_sq(l)/n_l + sum_sq(r)/n_r is larger. Kept as an exact
// rational num/den to make comparisons independent of rounding.
struct split_score {
    u128 num = 0;
    u128 den = 1;

    bool operator>(const split_score& o) const { return num * o.den > o.num * den; }
};

split_score score(const class_counts& l, const class_counts& r) {
    return {l.sum_sq() * r.total() + r.sum_sq() * l.total(), u128(l.total()) * r.total()};
}

double midpoint(double a, double b) {
    const double t = a + (b - a) / 2.0;
    return t < b ? t : a;
}

} // namespace

void rf_config::validate() const {
    if (n_trees < 1) {
        throw error(errc::invalid_params, "n_trees must be at least 1");
    }
    if (min_samples_split < 2) {
        throw error(errc::invalid_params, "min_samples_split must be at least 2");
    }
    if (max_features == max_features_rule::fixed && max_features_k < 1) {
        throw error(errc::invalid_params, "fixed max_features needs k >= 1");
    }
}

std::size_t rf_config::features_per_split(std::size_t d) const {
    switch (max_features) {
    case max_features_rule::sqrt: {
        auto k = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(d))));
        while (k * k < d) {
            ++k;
        }
        while (k > 1 && (k - 1) * (k - 1) >= d) {
            --k;
        }
        return std::clamp<std::size_t>(k, 1, d);
    }
    case max_features_rule::all: return d;
    case max_features_rule::fixed: return std::min(max_features_k, d);
    }
    return d;
}

nlohmann::json to_json(const rf_config& c) {
    nlohmann::json max_features;
    switch (c.max_features) {
    case max_features_rule::sqrt: max_features = "sqrt"; break;
    case max_features_rule::all: max_features = "all"; break;
    case max_features_rule::fixed: max_features = c.max_features_k; break;
    }
    return {
        {"n_trees", c.n_trees},
        {"max_features", max_features},
        {"min_samples_split", c.min_samples_split},
        {"max_depth", c.max_depth ? nlohmann::json(*c.max_depth) : nlohmann::json(nullptr)},
        {"bootstrap", c.bootstrap},
        {"seed", c.seed},
    };
}

rf_config rf_config_from_json(const nlohmann::json& j) {
    static const std::array<std::string_view, 6> known{"n_trees", "max_features", "min_samples_split",
                                                       "max_depth", "bootstrap",    "seed"};
    rf_config c;
    for (const auto& [key, value] : j.items()) {
        if (std::ranges::find(known, key) == known.end()) {
            throw error(errc::parse_error, "unknown random forest key '" + key + "'");
        }
    }
    c.n_trees = j.value("n_trees", c.n_trees);
    if (j.contains("max_features")) {
        const auto& mf = j.at("max_features");
        if (mf.is_string() && mf.get<std::string>() == "sqrt") {
            c.max_features = max_features_rule::sqrt;
        } else if (mf.is_string() && mf.get<std::string>() == "all") {
            c.max_features = max_features_rule::all;
        } else if (mf.is_number_unsigned()) {
            c.max_features = max_features_rule::fixed;
            c.max_features_k = mf.get<std::size_t>();
        } else {
            throw error(errc::parse_error, "max_features must be \"sqrt\", \"all\" or a positive integer");
        }
    }
    c.min_samples_split = j.value("min_samples_split", c.min_samples_split);
    if (j.contains("max_depth") && !j.at("max_depth").is_null()) {
        c.max_depth = j.at("max_depth").get<std::size_t>();
    }
    c.bootstrap = j.value("bootstrap", c.bootstrap);
    c.seed = j.value("seed", c.seed);
    c.validate();
    return c;
}

double gini(std::size_t n0, std::size_t n1) {
    const std::size_t n = n0 + n1;
    if (n == 0) {
        return 0.0;
    }
    const double p0 = static_cast<double>(n0) / static_cast<double>(n);
    const double p1 = static_cast<double>(n1) / static_cast<double>(n);
    return 1.0 - (p0 * p0 + p1 * p1);
}

std::optional<split_choice> best_split(const matrix& x, std::span<const int> labels,
                                       std::span<const std::size_t> rows, std::span<const std::size_t> features) {
    class_counts parent;
    for (auto r : rows) {
        (labels[r] == 1 ? parent.n1 : parent.n0) += 1;
    }
    if (rows.size() < 2 || parent.n0 == 0 || parent.n1 == 0) {
        return std::nullopt;
    }

    std::vector<std::size_t> candidates(features.begin(), features.end());
    std::ranges::sort(candidates);

    // The parent "split" (everything on one side) is the bar to beat.
    split_score best{parent.sum_sq(), parent.total()};
    std::optional<split_choice> choice;
    class_counts best_left;
    class_counts best_right;

    std::vector<std::pair<double, int>> column(rows.size());
    for (auto f : candidates) {
        for (std::size_t i = 0; i < rows.size(); ++i) {
            column[i] = {x(rows[i], f), labels[rows[i]]};
        }
        std::ranges::stable_sort(column, {}, &std::pair<double, int>::first);
        class_counts left;
        for (std::size_t i = 0; i + 1 < column.size(); ++i) {
            (column[i].second == 1 ? left.n1 : left.n0) += 1;
            if (column[i].first == column[i + 1].first) {
                continue;
            }
            const class_counts right{parent.n0 - left.n0, parent.n1 - left.n1};
            const auto s = score(left, right);
            if (s > best) {
                best = s;
                best_left = left;
                best_right = right;
                choice = split_choice{f, midpoint(column[i].first, column[i + 1].first), 0.0};
            }
        }
    }
    if (choice) {
        const auto n = static_cast<double>(parent.total());
        const auto nl = static_cast<double>(best_left.total());
        const auto nr = static_cast<double>(best_right.total());
        choice->impurity_decrease = gini(parent.n0, parent.n1) - (nl / n) * gini(best_left.n0, best_left.n1) -
                                    (nr / n) * gini(best_right.n0, best_right.n1);
    }
    return choice;
}

decision_tree::decision_tree(std::vector<tree_node> nodes) : nodes_(std::move(nodes)) {
    if (nodes_.empty()) {
        throw error(errc::parse_error, "tree without nodes");
    }
    const auto n = static_cast<std::int32_t>(nodes_.size());
    for (std::int32_t i = 0; i < n; ++i) {
        const auto& node = nodes_[static_cast<std::size_t>(i)];
        if (node.is_leaf()) {
            if (node.counts[0] + node.counts[1] == 0) {
                throw error(errc::parse_error, "leaf with no samples");
            }
        } else if (node.left <= i || node.right <= i || node.left >= n || node.right >= n ||
                   !std::isfinite(node.threshold)) {
            throw error(errc::parse_error, "internal node with invalid children or threshold");
        }
    }
}

const tree_node& decision_tree::leaf_for(std::span<const double> row) const {
    const tree_node* node = &nodes_.front();
    while (!node->is_leaf()) {
        const auto next = row[static_cast<std::size_t>(node->feature)] <= node->threshold ? node->left : node->right;
        node = &nodes_[static_cast<std::size_t>(next)];
    }
    return *node;
}

std::size_t decision_tree::depth() const {
    std::vector<std::size_t> level(nodes_.size(), 0);
    std::size_t deepest = 0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        deepest = std::max(deepest, level[i]);
        if (!nodes_[i].is_leaf()) {
            level[static_cast<std::size_t>(nodes_[i].left)] = level[i] + 1;
            level[static_cast<std::size_t>(nodes_[i].right)] = level[i] + 1;
        }
    }
    return deepest;
}

namespace {

class tree_builder {
  public:
    tree_builder(const matrix& x, std::span<const int> labels, const rf_config& config, rng& r)
        : x_(x), labels_(labels), config_(config), rng_(r), all_features_(x.cols()) {
        std::iota(all_features_.begin(), all_features_.end(), std::size_t{0});
    }

    std::int32_t grow(std::vector<std::size_t> rows, std::size_t depth) {
        const auto index = static_cast<std::int32_t>(nodes_.size());
        tree_node node;
        for (auto r : rows) {
            ++node.counts[labels_[r] == 1 ? 1 : 0];
        }
        nodes_.push_back(node);

        const bool pure = node.counts[0] == 0 || node.counts[1] == 0;
        const bool depth_limited = config_.max_depth && depth >= *config_.max_depth;
        if (pure || depth_limited || rows.size() < config_.min_samples_split) {
            return index;
        }
        const auto split = best_split(x_, labels_, rows, draw_features());
        if (!split) {
            return index;
        }
        std::vector<std::size_t> left_rows;
        std::vector<std::size_t> right_rows;
        for (auto r : rows) {
            (x_(r, split->feature) <= split->threshold ? left_rows : right_rows).push_back(r);
        }
        rows.clear();
        rows.shrink_to_fit();
        const auto left = grow(std::move(left_rows), depth + 1);
        const auto right = grow(std::move(right_rows), depth + 1);
        auto& stored = nodes_[static_cast<std::size_t>(index)];
        stored.feature = static_cast<std::int32_t>(split->feature);
        stored.threshold = split->threshold;
        stored.left = left;
        stored.right = right;
        return index;
    }

    std::vector<tree_node> take() { return std::move(nodes_); }

  private:
    std::vector<std::size_t> draw_features() {
        const std::size_t d = all_features_.size();
        const std::size_t m = config_.features_per_split(d);
        if (m >= d) {
            return all_features_;
        }
        std::vector<std::size_t> pool = all_features_;
        for (std::size_t i = 0; i < m; ++i) {
            const auto j = i + static_cast<std::size_t>(rng_.below(d - i));
            std::swap(pool[i], pool[j]);
        }
        pool.resize(m);
        return pool;
    }

    const matrix& x_;
    std::span<const int> labels_;
    const rf_config& config_;
    rng& rng_;
    std::vector<std::size_t> all_features_;
    std::vector<tree_node> nodes_;
};

} // namespace

decision_tree fit_tree(const matrix& x, std::span<const int> labels, std::span<const std::size_t> rows,
                       const rf_config& config, rng& r) {
    if (rows.empty()) {
        throw error(errc::empty_dataset, "tree needs at least one row");
    }
    tree_builder builder(x, labels, config, r);
    builder.grow({rows.begin(), rows.end()}, 0);
    return decision_tree(builder.take());
}

forest fit(const matrix& x, std::span<const int> labels, const rf_config& config) {
    config.validate();
    if (x.rows() < 2 || x.cols() < 1) {
        throw error(errc::empty_dataset, "random forest needs at least 2 rows and 1 feature");
    }
    if (labels.size() != x.rows()) {
        throw error(errc::length_mismatch, "label count differs from row count");
    }
    forest f{config, x.cols(), {}};
    f.trees.reserve(config.n_trees);
    const std::size_t n = x.rows();
    std::vector<std::size_t> sample(n);
    for (std::size_t t = 0; t < config.n_trees; ++t) {
        rng r(config.seed + t);
        if (config.bootstrap) {
            for (auto& s : sample) {
                s = static_cast<std::size_t>(r.below(n));
            }
        } else {
            std::iota(sample.begin(), sample.end(), std::size_t{0});
        }
        f.trees.push_back(fit_tree(x, labels, sample, config, r));
    }
    return f;
}

forest fit(const labeled_dataset& data, const rf_config& config) {
    data.validate();
    return fit(data.features, data.labels, config);
}

namespace {

std::vector<std::size_t> malware_votes(const forest& f, const matrix& x) {
    if (x.cols() != f.n_features) {
        throw error(errc::dimension_mismatch, "forest trained on " + std::to_string(f.n_features) +
                                                  " features, got " + std::to_string(x.cols()));
    }
    std::vector<std::size_t> votes(x.rows(), 0);
    for (std::size_t r = 0; r < x.rows(); ++r) {
        for (const auto& tree : f.trees) {
            votes[r] += static_cast<std::size_t>(tree.predict(x.row(r)));
        }
    }
    return votes;
}

} // namespace

std::vector<int> predict(const forest& f, const matrix& x) {
    auto votes = malware_votes(f, x);
    std::vector<int> labels(votes.size());
    for (std::size_t i = 0; i < votes.size(); ++i) {
        labels[i] = 2 * votes[i] > f.trees.size() ? 1 : 0;
    }
    return labels;
}

std::vector<double> predict_proba(const forest& f, const matrix& x) {
    auto votes = malware_votes(f, x);
    std::vector<double> proba(votes.size());
    for (std::size_t i = 0; i < votes.size(); ++i) {
        proba[i] = static_cast<double>(votes[i]) / static_cast<double>(f.trees.size());
    }
    return proba;
}

nlohmann::json to_json(const forest& f) {
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& tree : f.trees) {
        nlohmann::json nodes = nlohmann::json::array();
        for (const auto& n : tree.nodes()) {
            nodes.push_back({n.feature, n.threshold, n.left, n.right, n.counts[0], n.counts[1]});
        }
        trees.push_back(std::move(nodes));
    }
    return {
        {"format", "opfreq.forest"},
        {"version", 1},
        {"config", to_json(f.config)},
        {"n_features", f.n_features},
        {"node_layout", {"feature", "threshold", "left", "right", "benign", "malware"}},
        {"trees", std::move(trees)},
    };
}

forest forest_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "opfreq.forest" || j.value("version", 0) != 1) {
        throw error(errc::parse_error, "not an opfreq.forest v1 document");
    }
    forest f;
    f.config = rf_config_from_json(j.at("config"));
    f.n_features = j.at("n_features").get<std::size_t>();
    for (const auto& t : j.at("trees")) {
        std::vector<tree_node> nodes;
        for (const auto& n : t) {
            tree_node node;
            node.feature = n.at(0).get<std::int32_t>();
            node.threshold = n.at(1).get<double>();
            node.left = n.at(2).get<std::int32_t>();
            node.right = n.at(3).get<std::int32_t>();
            node.counts = {n.at(4).get<std::uint32_t>(), n.at(5).get<std::uint32_t>()};
            if (!node.is_leaf() && static_cast<std::size_t>(node.feature) >= f.n_features) {
                throw error(errc::parse_error, "node feature index out of range");
            }
            nodes.push_back(node);
        }
        f.trees.emplace_back(std::move(nodes));
    }
    if (f.trees.size() != f.config.n_trees) {
        throw error(errc::parse_error, "tree count differs from config");
    }
    return f;
}

} // namespace opfreq::rf
