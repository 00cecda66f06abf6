#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace kpgp::cli {

/// Numeric table read from comma-separated text with a header row.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
    std::vector<std::size_t> line_numbers; ///< source line of each row

    std::size_t columns() const noexcept { return header.size(); }
    std::vector<double> column(std::size_t c) const;
};

/// Blank lines and lines starting with '#' are skipped. Errors carry `source:line`.
Table parse_table(std::string_view text, const std::string& source);
Table read_table(const std::string& path);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& text);

/// Shortest text that parses back to the same double.
std::string format_number(double v);

} // namespace kpgp::cli
