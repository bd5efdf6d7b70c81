#include "opfreq/metrics.hpp"

#include "opfreq/error.hpp"

namespace opfreq {

confusion_counts confusion(std::span<const int> predicted, std::span<const int> actual) {
    if (predicted.size() != actual.size()) {
        throw error(errc::length_mismatch, "predicted and actual label vectors differ in length");
    }
    if (actual.empty()) {
        throw error(errc::empty_input, "no labels to compare");
    }
    confusion_counts c;
    for (std::size_t i = 0; i < actual.size(); ++i) {
        const bool pred_malware = predicted[i] == 1;
        if (actual[i] == 1) {
            ++(pred_malware ? c.tp : c.fn);
        } else {
            ++(pred_malware ? c.fp : c.tn);
        }
    }
    return c;
}

namespace {

std::optional<double> ratio(std::uint64_t num, std::uint64_t den) {
    if (den == 0) {
        return std::nullopt;
    }
    return static_cast<double>(num) / static_cast<double>(den);
}

} // namespace

metrics_report compute_metrics(const confusion_counts& c) {
    return {
        .accuracy = ratio(c.tp + c.tn, c.total_malware() + c.total_benign()),
        .tpr = ratio(c.tp, c.total_malware()),
        .tnr = ratio(c.tn, c.total_benign()),
        .ppv = ratio(c.tp, c.tp + c.fp),
        .fpr = ratio(c.fp, c.total_benign()),
    };
}

} // namespace opfreq
