#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace laneforge {

std::string_view trim(std::string_view s);
/// Drops everything from the first '#'.
std::string_view strip_comment(std::string_view s);
std::vector<std::string_view> split_lines(std::string_view text);
std::vector<std::string_view> split(std::string_view s, char sep);

/// Whole-string parse; throws std::invalid_argument on trailing junk or a
/// non-finite value.
double parse_double(std::string_view s);
long long parse_int(std::string_view s);

/// Shortest text that reads back to the same double.
std::string format_double(double v);

}  // namespace laneforge
