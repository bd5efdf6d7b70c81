#include "opfreq/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <unordered_map>

#include "opfreq/csv.hpp"
#include "opfreq/error.hpp"
#include "opfreq/rng.hpp"

namespace opfreq {

std::size_t labeled_dataset::count(int label) const {
    return static_cast<std::size_t>(std::ranges::count(labels, label));
}

void labeled_dataset::validate() const {
    if (features.rows() != labels.size()) {
        throw error(errc::dimension_mismatch, "row count differs from label count");
    }
    if (source_ids.size() != labels.size()) {
        throw error(errc::dimension_mismatch, "row count differs from source id count");
    }
    if (feature_names.size() != features.cols()) {
        throw error(errc::dimension_mismatch, "feature name count differs from column count");
    }
    for (int y : labels) {
        if (y != malware_label && y != benign_label) {
            throw error(errc::invalid_params, "labels must be 0 or 1");
        }
    }
}

labeled_dataset labeled_dataset::subset(std::span<const std::size_t> rows) const {
    labeled_dataset out;
    out.features = select_rows(features, rows);
    out.feature_names = feature_names;
    out.labels.reserve(rows.size());
    out.source_ids.reserve(rows.size());
    for (auto r : rows) {
        out.labels.push_back(labels[r]);
        out.source_ids.push_back(source_ids[r]);
    }
    return out;
}

void labeled_dataset::append(const labeled_dataset& other) {
    if (other.dims() != dims() && !(size() == 0 && features.cols() == 0)) {
        throw error(errc::dimension_mismatch, "appending dataset with different width");
    }
    for (std::size_t r = 0; r < other.size(); ++r) {
        features.append_row(other.features.row(r));
    }
    labels.insert(labels.end(), other.labels.begin(), other.labels.end());
    source_ids.insert(source_ids.end(), other.source_ids.begin(), other.source_ids.end());
}

labeled_dataset dataset_from_histograms(std::span<const opcode_histogram> histograms, std::span<const int> labels,
                                        const master_opcode_list& master) {
    if (histograms.size() != labels.size()) {
        throw error(errc::length_mismatch, "histogram and label counts differ");
    }
    labeled_dataset out;
    out.features = matrix(histograms.size(), master.size());
    out.feature_names = master.entries();
    for (std::size_t r = 0; r < histograms.size(); ++r) {
        const auto& h = histograms[r];
        if (h.counts.size() != master.size()) {
            throw error(errc::dimension_mismatch, "histogram length differs from master list");
        }
        for (std::size_t j = 0; j < h.counts.size(); ++j) {
            out.features(r, j) = static_cast<double>(h.counts[j]);
        }
        out.source_ids.push_back(h.source_id);
        out.labels.push_back(labels[r]);
    }
    out.validate();
    return out;
}

void write_dataset_csv(std::ostream& out, const labeled_dataset& data) {
    std::vector<std::string> fields{"source_id", "label"};
    fields.insert(fields.end(), data.feature_names.begin(), data.feature_names.end());
    csv::write_row(out, fields);
    for (std::size_t r = 0; r < data.size(); ++r) {
        fields.clear();
        fields.push_back(data.source_ids[r]);
        fields.push_back(std::to_string(data.labels[r]));
        for (double v : data.features.row(r)) {
            fields.push_back(csv::format_number(v));
        }
        csv::write_row(out, fields);
    }
}

labeled_dataset read_dataset_csv(std::istream& in) {
    std::vector<std::string> fields;
    if (!csv::read_row(in, fields) || fields.size() < 2 || fields[0] != "source_id" || fields[1] != "label") {
        throw error(errc::parse_error, "dataset CSV must start with header 'source_id,label,...'");
    }
    labeled_dataset out;
    out.feature_names.assign(fields.begin() + 2, fields.end());
    const std::size_t d = out.feature_names.size();
    std::vector<double> row(d);
    std::size_t line = 1;
    while (csv::read_row(in, fields)) {
        ++line;
        if (fields.size() == 1 && fields[0].empty()) {
            continue;
        }
        if (fields.size() != d + 2) {
            throw error(errc::parse_error, "dataset CSV line " + std::to_string(line) + " has " +
                                               std::to_string(fields.size()) + " fields, expected " +
                                               std::to_string(d + 2));
        }
        out.source_ids.push_back(fields[0]);
        if (fields[1] != "0" && fields[1] != "1") {
            throw error(errc::parse_error, "dataset CSV line " + std::to_string(line) + ": label must be 0 or 1");
        }
        out.labels.push_back(fields[1] == "1" ? malware_label : benign_label);
        for (std::size_t j = 0; j < d; ++j) {
            row[j] = csv::parse_number(fields[j + 2]);
        }
        out.features.append_row(row);
    }
    if (out.size() == 0) {
        out.features = matrix(0, d);
    }
    out.validate();
    return out;
}

labeled_dataset align_columns(const labeled_dataset& data, const std::vector<std::string>& names) {
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t j = 0; j < data.feature_names.size(); ++j) {
        index.emplace(data.feature_names[j], j);
    }
    labeled_dataset out;
    out.labels = data.labels;
    out.source_ids = data.source_ids;
    out.feature_names = names;
    out.features = matrix(data.size(), names.size());
    for (std::size_t j = 0; j < names.size(); ++j) {
        auto it = index.find(names[j]);
        if (it == index.end()) {
            continue;
        }
        for (std::size_t r = 0; r < data.size(); ++r) {
            out.features(r, j) = data.features(r, it->second);
        }
    }
    return out;
}

split_pair split(const labeled_dataset& data, std::uint64_t seed) {
    data.validate();
    std::vector<std::size_t> train_rows;
    std::vector<std::size_t> test_rows;
    for (int label : {benign_label, malware_label}) {
        std::vector<std::size_t> rows;
        for (std::size_t r = 0; r < data.size(); ++r) {
            if (data.labels[r] == label) {
                rows.push_back(r);
            }
        }
        if (rows.size() < 3) {
            throw error(errc::insufficient_class, "class " + std::to_string(label) + " has " +
                                                      std::to_string(rows.size()) + " samples, need at least 3");
        }
        rng r(derive_seed(seed, static_cast<std::uint64_t>(label)));
        r.shuffle(std::span(rows));
        const std::size_t n_train = 2 * rows.size() / 3;
        train_rows.insert(train_rows.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_train));
        test_rows.insert(test_rows.end(), rows.begin() + static_cast<std::ptrdiff_t>(n_train), rows.end());
    }
    std::ranges::sort(train_rows);
    std::ranges::sort(test_rows);
    return {data.subset(train_rows), data.subset(test_rows), seed};
}

nlohmann::json split_manifest(const split_pair& pair) {
    return {
        {"seed", pair.seed},
        {"train", pair.train.source_ids},
        {"test", pair.test.source_ids},
    };
}

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        const double d = a[j] - b[j];
        s += d * d;
    }
    return s;
}

// k nearest rows to `query` (itself excluded), ties broken by lower row index.
std::vector<std::size_t> nearest_neighbors(const matrix& x, std::size_t query, std::size_t k) {
    std::vector<std::pair<double, std::size_t>> dist;
    dist.reserve(x.rows() - 1);
    for (std::size_t r = 0; r < x.rows(); ++r) {
        if (r != query) {
            dist.emplace_back(squared_distance(x.row(query), x.row(r)), r);
        }
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    std::vector<std::size_t> out(k);
    for (std::size_t i = 0; i < k; ++i) {
        out[i] = dist[i].second;
    }
    return out;
}

// Splits `total` across `weights` (non-negative integers, positive sum) so that the
// parts sum to `total` exactly. Exact integer arithmetic; remainder ties go to lower index.
std::vector<std::size_t> apportion(std::size_t total, std::span<const std::size_t> weights) {
    const auto sum = std::accumulate(weights.begin(), weights.end(), std::uint64_t{0});
    std::vector<std::size_t> parts(weights.size());
    std::vector<std::pair<std::uint64_t, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const std::uint64_t scaled = static_cast<std::uint64_t>(total) * weights[i];
        parts[i] = static_cast<std::size_t>(scaled / sum);
        assigned += parts[i];
        remainders.emplace_back(scaled % sum, i);
    }
    std::ranges::stable_sort(remainders, [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t i = 0; assigned < total; ++i, ++assigned) {
        ++parts[remainders[i].second];
    }
    return parts;
}

} // namespace

adasyn_result adasyn(const labeled_dataset& train, std::size_t k, double beta, std::uint64_t seed) {
    train.validate();
    if (!(beta >= 0.0 && beta <= 1.0)) {
        throw error(errc::invalid_params, "ADASYN beta must lie in [0, 1]");
    }
    const std::size_t n_mal = train.count(malware_label);
    const std::size_t n_ben = train.count(benign_label);
    const int minority = n_mal < n_ben ? malware_label : benign_label;
    const std::size_t n_min = std::min(n_mal, n_ben);
    const std::size_t n_maj = std::max(n_mal, n_ben);
    if (n_min < 2) {
        throw error(errc::degenerate_minority,
                    "minority class has " + std::to_string(n_min) + " samples, need at least 2");
    }
    if (k < 1 || k >= train.size()) {
        throw error(errc::invalid_params, "ADASYN k must satisfy 1 <= k < n_train");
    }

    adasyn_result result{train, {}, minority};
    const auto generate = static_cast<std::size_t>(std::llround(beta * static_cast<double>(n_maj - n_min)));
    if (generate == 0) {
        return result;
    }

    std::vector<std::size_t> minority_rows;
    for (std::size_t r = 0; r < train.size(); ++r) {
        if (train.labels[r] == minority) {
            minority_rows.push_back(r);
        }
    }

    // Majority counts among each minority row's k-NN, and its minority neighbours.
    std::vector<std::size_t> majority_hits(minority_rows.size());
    std::vector<std::vector<std::size_t>> partners(minority_rows.size());
    for (std::size_t i = 0; i < minority_rows.size(); ++i) {
        for (auto nb : nearest_neighbors(train.features, minority_rows[i], k)) {
            if (train.labels[nb] == minority) {
                partners[i].push_back(nb);
            } else {
                ++majority_hits[i];
            }
        }
        if (partners[i].empty()) {
            for (auto r : minority_rows) {
                if (r != minority_rows[i]) {
                    partners[i].push_back(r);
                }
            }
        }
    }
    if (std::ranges::all_of(majority_hits, [](std::size_t h) { return h == 0; })) {
        std::ranges::fill(majority_hits, 1);
    }
    const auto shares = apportion(generate, majority_hits);

    const std::size_t d = train.dims();
    std::vector<double> synthetic(d);
    for (std::size_t i = 0; i < minority_rows.size(); ++i) {
        const std::size_t base = minority_rows[i];
        rng r(derive_seed(seed, base));
        for (std::size_t g = 0; g < shares[i]; ++g) {
            const std::size_t partner = partners[i][r.below(partners[i].size())];
            const double lambda = r.uniform();
            auto xb = train.features.row(base);
            auto xp = train.features.row(partner);
            for (std::size_t j = 0; j < d; ++j) {
                synthetic[j] = xb[j] + lambda * (xp[j] - xb[j]);
            }
            result.data.features.append_row(synthetic);
            result.data.labels.push_back(minority);
            result.data.source_ids.push_back("adasyn:" + train.source_ids[base] + "#" +
                                             std::to_string(result.origins.size()));
            result.origins.push_back({base, partner, lambda});
        }
    }
    return result;
}

min_max_scaler min_max_scaler::fit(const matrix& train) {
    if (train.rows() == 0) {
        throw error(errc::empty_dataset, "cannot fit a scaler on zero rows");
    }
    min_max_scaler s;
    const std::size_t d = train.cols();
    s.min_.assign(train.row(0).begin(), train.row(0).end());
    std::vector<double> max = s.min_;
    for (std::size_t r = 1; r < train.rows(); ++r) {
        auto row = train.row(r);
        for (std::size_t j = 0; j < d; ++j) {
            s.min_[j] = std::min(s.min_[j], row[j]);
            max[j] = std::max(max[j], row[j]);
        }
    }
    s.range_.resize(d);
    for (std::size_t j = 0; j < d; ++j) {
        s.range_[j] = max[j] - s.min_[j];
    }
    return s;
}

matrix min_max_scaler::transform(const matrix& data) const {
    if (data.cols() != min_.size()) {
        throw error(errc::dimension_mismatch, "scaler fitted on " + std::to_string(min_.size()) +
                                                  " features, got " + std::to_string(data.cols()));
    }
    matrix out(data.rows(), data.cols());
    for (std::size_t r = 0; r < data.rows(); ++r) {
        auto src = data.row(r);
        auto dst = out.row(r);
        for (std::size_t j = 0; j < src.size(); ++j) {
            dst[j] = range_[j] > 0.0 ? std::clamp((src[j] - min_[j]) / range_[j], 0.0, 1.0) : 0.0;
        }
    }
    return out;
}

labeled_dataset min_max_scaler::transform(const labeled_dataset& data) const {
    labeled_dataset out = data;
    out.features = transform(data.features);
    return out;
}

nlohmann::json min_max_scaler::to_json() const {
    return {{"min", min_}, {"range", range_}};
}

min_max_scaler min_max_scaler::from_json(const nlohmann::json& j) {
    min_max_scaler s;
    s.min_ = j.at("min").get<std::vector<double>>();
    s.range_ = j.at("range").get<std::vector<double>>();
    if (s.min_.size() != s.range_.size()) {
        throw error(errc::parse_error, "scaler min/range lengths differ");
    }
    return s;
}

} // namespace opfreq
