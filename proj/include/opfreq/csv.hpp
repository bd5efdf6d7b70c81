#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace opfreq::csv {

/// RFC 4180 field quoting: only fields containing a comma, quote, or newline are quoted.
std::string escape(std::string_view field);

void write_row(std::ostream& out, const std::vector<std::string>& fields);

/// Reads one record; returns false at end of input. Handles quoted fields spanning lines.
bool read_row(std::istream& in, std::vector<std::string>& fields);

/// Shortest decimal representation that round-trips to the same double.
std::string format_number(double value);

/// Strict full-field double parse; throws error(parse_error) on junk.
double parse_number(std::string_view text);

} // namespace opfreq::csv
