#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace qkd::io {

/// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

/// Fixed-point rendering, e.g. format_fixed(0.6879, 4) == "0.6879".
std::string format_fixed(double v, int decimals);

/// Strict full-field parse; throws ParseError with `context` on failure.
double parse_double(std::string_view field, const std::string& context);
long long parse_int(std::string_view field, const std::string& context);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);
bool file_exists(const std::string& path);

/// Splits on '\n'; a trailing '\r' is stripped from each line and a final
/// empty line (from a terminating newline) is dropped.
std::vector<std::string_view> split_lines(std::string_view text);
std::vector<std::string_view> split_fields(std::string_view line, char sep = ',');

}  // namespace qkd::io
