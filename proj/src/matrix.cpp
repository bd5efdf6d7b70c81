#include "opfreq/matrix.hpp"

#include <algorithm>

#include "opfreq/error.hpp"

namespace opfreq {

matrix matrix::from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) {
        return {};
    }
    matrix m(rows.size(), rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != m.cols()) {
            throw error(errc::dimension_mismatch, "ragged rows in matrix literal");
        }
        std::ranges::copy(rows[r], m.row(r).begin());
    }
    return m;
}

void matrix::append_row(std::span<const double> values) {
    if (rows_ == 0 && data_.empty()) {
        cols_ = values.size();
    }
    if (values.size() != cols_) {
        throw error(errc::dimension_mismatch, "appended row has wrong width");
    }
    data_.insert(data_.end(), values.begin(), values.end());
    ++rows_;
}

matrix select_rows(const matrix& m, std::span<const std::size_t> rows) {
    matrix out(rows.size(), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        std::ranges::copy(m.row(rows[i]), out.row(i).begin());
    }
    return out;
}

matrix select_cols(const matrix& m, std::span<const std::size_t> cols) {
    matrix out(m.rows(), cols.size());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        auto src = m.row(r);
        auto dst = out.row(r);
        for (std::size_t j = 0; j < cols.size(); ++j) {
            dst[j] = src[cols[j]];
        }
    }
    return out;
}

} // namespace opfreq
