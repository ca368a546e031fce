#pragma once

#include <string>
#include <vector>

namespace safefilter::harness {

/// Shortest round-trip decimal rendering of a double ("%.17g" fallback),
/// used everywhere a file must be byte-reproducible.
std::string format_double(double v);

std::string join_csv_row(const std::vector<std::string>& fields);

std::vector<std::string> split_csv_row(const std::string& line);

}  // namespace safefilter::harness
