#include "table_io.hpp"

#include "kpgp/error.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace kpgp::cli {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

} // namespace

std::vector<double> Table::column(std::size_t c) const {
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r.at(c));
    return out;
}

Table parse_table(std::string_view text, const std::string& source) {
    Table table;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    bool have_header = false;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        const std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        const std::string_view line = trim(raw);
        if (line.empty() || line.front() == '#') continue;
        const auto fields = split(line);
        const std::string where = source + ":" + std::to_string(line_no) + ": ";
        if (!have_header) {
            for (auto f : fields) {
                if (f.empty()) fail(ErrorKind::Data, where + "empty column name in header");
                table.header.emplace_back(f);
            }
            have_header = true;
            continue;
        }
        if (fields.size() != table.header.size())
            fail(ErrorKind::Data, where + "expected " + std::to_string(table.header.size()) + " fields, found " +
                                      std::to_string(fields.size()));
        std::vector<double> row;
        row.reserve(fields.size());
        for (std::size_t c = 0; c < fields.size(); ++c) {
            const auto f = fields[c];
            double v = 0.0;
            const auto [end, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
            if (f.empty() || ec != std::errc() || end != f.data() + f.size())
                fail(ErrorKind::Data, where + "column '" + table.header[c] + "': cannot parse '" + std::string(f) + "'");
            if (!std::isfinite(v)) fail(ErrorKind::Data, where + "column '" + table.header[c] + "' is not finite");
            row.push_back(v);
        }
        table.rows.push_back(std::move(row));
        table.line_numbers.push_back(line_no);
    }
    if (!have_header) fail(ErrorKind::Data, source + ": no header row");
    return table;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Data, "cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Table read_table(const std::string& path) { return parse_table(read_file(path), path); }

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::Data, "cannot write '" + path + "'");
    out << text;
    if (!out) fail(ErrorKind::Data, "error writing '" + path + "'");
}

std::string format_number(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

} // namespace kpgp::cli
