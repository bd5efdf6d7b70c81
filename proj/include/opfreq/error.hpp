#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace opfreq {

enum class errc {
    malformed_line,
    empty_master,
    insufficient_class,
    degenerate_minority,
    empty_dataset,
    empty_matrix,
    dimension_mismatch,
    invalid_dims,
    length_mismatch,
    empty_input,
    input_not_found,
    empty_feature_set,
    invalid_params,
    parse_error,
};

constexpr std::string_view to_string(errc code) {
    switch (code) {
    case errc::malformed_line: return "MalformedLine";
    case errc::empty_master: return "EmptyMaster";
    case errc::insufficient_class: return "InsufficientClass";
    case errc::degenerate_minority: return "DegenerateMinority";
    case errc::empty_dataset: return "EmptyDataset";
    case errc::empty_matrix: return "EmptyMatrix";
    case errc::dimension_mismatch: return "DimensionMismatch";
    case errc::invalid_dims: return "InvalidDims";
    case errc::length_mismatch: return "LengthMismatch";
    case errc::empty_input: return "Empty";
    case errc::input_not_found: return "InputNotFound";
    case errc::empty_feature_set: return "EmptyFeatureSet";
    case errc::invalid_params: return "InvalidParams";
    case errc::parse_error: return "ParseError";
    }
    return "Unknown";
}

class error : public std::runtime_error {
  public:
    error(errc code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    errc code() const noexcept { return code_; }

  private:
    errc code_;
};

} // namespace opfreq
