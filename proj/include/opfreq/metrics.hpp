#pragma once

#include <cstdint>
#include <optional>
#include <span>

namespace opfreq {

/// Malware (label 1) is the positive class.
struct confusion_counts {
    std::uint64_t tp = 0;
    std::uint64_t tn = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;

    std::uint64_t total_malware() const noexcept { return tp + fn; } // TM
    std::uint64_t total_benign() const noexcept { return tn + fp; }  // TB
    std::uint64_t total() const noexcept { return tp + tn + fp + fn; }

    bool operator==(const confusion_counts&) const = default;
};

/// A metric whose denominator is zero is std::nullopt.
struct metrics_report {
    std::optional<double> accuracy;
    std::optional<double> tpr;
    std::optional<double> tnr;
    std::optional<double> ppv;
    std::optional<double> fpr;

    bool operator==(const metrics_report&) const = default;
};

/// Throws error(length_mismatch) or error(empty_input).
confusion_counts confusion(std::span<const int> predicted, std::span<const int> actual);

/// TPR = TP/TM, TNR = TN/TB, PPV = TP/(TP+FP), Acc = (TP+TN)/(TM+TB), FPR = FP/TB.
metrics_report compute_metrics(const confusion_counts& c);

} // namespace opfreq
