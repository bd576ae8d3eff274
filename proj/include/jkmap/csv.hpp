#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "jkmap/error.hpp"

namespace jkmap::csv {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split(std::string_view line, char sep = ',') {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline bool parse_double(std::string_view field, double& out) {
    if (field.empty()) return false;
    if (field.front() == '+') field.remove_prefix(1);
    const auto* end = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(field.data(), end, out);
    return ec == std::errc() && ptr == end;
}

// Numeric table, row-major. A first row that does not parse as numbers is a header.
inline std::vector<std::vector<double>> parse_table(std::string_view text) {
    std::vector<std::vector<double>> rows;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto pos = text.find('\n', start);
        if (pos == std::string_view::npos) pos = text.size();
        const auto line = trim(text.substr(start, pos - start));
        start = pos + 1;
        ++line_no;
        if (line.empty() || line.front() == '#') {
            if (pos == text.size()) break;
            continue;
        }
        std::vector<double> row;
        bool ok = true;
        for (auto field : split(line)) {
            double v = 0.0;
            if (!parse_double(field, v)) {
                ok = false;
                break;
            }
            row.push_back(v);
        }
        if (!ok) {
            if (rows.empty() && line_no == 1) continue;  // header
            throw InvalidInput("csv: non-numeric field on line " + std::to_string(line_no));
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw InvalidInput("csv: ragged row on line " + std::to_string(line_no));
        rows.push_back(std::move(row));
        if (pos == text.size()) break;
    }
    return rows;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::vector<std::vector<double>> read_table(const std::filesystem::path& path) {
    return parse_table(read_file(path));
}

// Shortest representation that round-trips through parse_double.
inline std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

template <class Matrix>
std::string format_matrix(const Matrix& m, std::size_t rows, std::size_t cols) {
    std::string out;
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t t = 0; t < cols; ++t) {
            if (t) out += ',';
            out += format_double(static_cast<double>(m(i, t)));
        }
        out += '\n';
    }
    return out;
}

inline void write_file(const std::filesystem::path& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << content;
    if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace jkmap::csv
