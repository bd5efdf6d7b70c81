#pragma once

#include <cstdint>

#include "opfreq/dataset.hpp"

namespace opfreq {

/// Desk-scale stand-in for a real malware/benign corpus.
///
/// Benign files draw opcodes from a Zipf-like profile p; malware files from
/// (1 - s) * p + s * q, where q is an independently permuted Zipf-like profile
/// and s = class_separation in [0, 1]. The total-variation distance between the
/// two class profiles is therefore s * TV(p, q), and s = 0 makes the classes
/// indistinguishable. File lengths are log-uniform in [300, 3000] instructions.
/// Rows are malware first, then benign; feature names are op000, op001, ...
///
/// Throws error(invalid_params) unless both class sizes are >= 3, dims >= 2 and
/// 0 <= class_separation <= 1.
labeled_dataset generate_synthetic_corpus(std::size_t n_malware, std::size_t n_benign, std::size_t dims,
                                          double class_separation, std::uint64_t seed);

} // namespace opfreq
