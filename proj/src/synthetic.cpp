#include "opfreq/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "opfreq/error.hpp"
#include "opfreq/rng.hpp"

namespace opfreq {
namespace {

std::vector<double> zipf_profile(std::size_t dims, rng& r) {
    std::vector<double> p(dims);
    for (std::size_t j = 0; j < dims; ++j) {
        p[j] = std::pow(static_cast<double>(j + 1), -1.1) * r.uniform(0.5, 1.5);
    }
    r.shuffle(std::span(p));
    const double total = std::accumulate(p.begin(), p.end(), 0.0);
    for (auto& v : p) {
        v /= total;
    }
    return p;
}

std::vector<double> cumulative(const std::vector<double>& p) {
    std::vector<double> c(p.size());
    std::partial_sum(p.begin(), p.end(), c.begin());
    c.back() = 1.0;
    return c;
}

} // namespace

labeled_dataset generate_synthetic_corpus(std::size_t n_malware, std::size_t n_benign, std::size_t dims,
                                          double class_separation, std::uint64_t seed) {
    if (n_malware < 3 || n_benign < 3 || dims < 2 || !(class_separation >= 0.0 && class_separation <= 1.0)) {
        throw error(errc::invalid_params,
                    "synthetic corpus needs >= 3 samples per class, dims >= 2, separation in [0, 1]");
    }
    rng profile_rng(derive_seed(seed, 0x70726f66));
    const auto benign = zipf_profile(dims, profile_rng);
    const auto other = zipf_profile(dims, profile_rng);
    std::vector<double> malware(dims);
    for (std::size_t j = 0; j < dims; ++j) {
        malware[j] = (1.0 - class_separation) * benign[j] + class_separation * other[j];
    }
    const auto benign_cdf = cumulative(benign);
    const auto malware_cdf = cumulative(malware);

    labeled_dataset out;
    const std::size_t width = std::max<std::size_t>(3, std::to_string(dims - 1).size());
    for (std::size_t j = 0; j < dims; ++j) {
        auto digits = std::to_string(j);
        out.feature_names.push_back("op" + std::string(width - digits.size(), '0') + digits);
    }
    out.features = matrix(n_malware + n_benign, dims);

    const double log_min = std::log(300.0);
    const double log_max = std::log(3000.0);
    for (std::size_t i = 0; i < n_malware + n_benign; ++i) {
        const bool is_malware = i < n_malware;
        const auto& cdf = is_malware ? malware_cdf : benign_cdf;
        rng r(derive_seed(seed, i + 1));
        const auto length = static_cast<std::size_t>(std::llround(std::exp(r.uniform(log_min, log_max))));
        auto row = out.features.row(i);
        for (std::size_t k = 0; k < length; ++k) {
            const auto it = std::ranges::upper_bound(cdf, r.uniform());
            row[static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - cdf.begin(), static_cast<std::ptrdiff_t>(dims) - 1))] += 1.0;
        }
        const std::size_t idx = is_malware ? i : i - n_malware;
        out.labels.push_back(is_malware ? malware_label : benign_label);
        out.source_ids.push_back((is_malware ? "synth-malware-" : "synth-benign-") + std::to_string(idx));
    }
    out.validate();
    return out;
}

} // namespace opfreq
