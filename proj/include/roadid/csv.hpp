#pragma once

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "roadid/error.hpp"

namespace roadid::csv {

/// Shortest decimal text that parses back to the same double.
inline std::string format(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_number(std::string_view field, std::size_t row) {
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r')) field.remove_suffix(1);
    if (!field.empty() && field.front() == '+') field.remove_prefix(1);
    double v = 0.0;
    const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
    if (res.ec != std::errc() || res.ptr != field.data() + field.size())
        throw ParseError("not a number: '" + std::string(field) + "'", row);
    return v;
}

inline std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

/// Numeric table with a fixed header; rows are 1-based in error messages.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> columns;

    [[nodiscard]] std::size_t rows() const { return columns.empty() ? 0 : columns.front().size(); }
};

/// Reads a numeric CSV with any header; every row must match the header width.
inline Table read_any(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");

    std::string line;
    if (!std::getline(in, line)) throw ParseError("'" + path + "' is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);

    Table t;
    for (auto f : split(line)) t.header.emplace_back(f);
    const auto width = t.header.size();
    t.columns.assign(width, {});

    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        ++row;
        const auto fields = split(line);
        if (fields.size() != width)
            throw ParseError("'" + path + "': expected " + std::to_string(width) + " fields", row);
        for (std::size_t c = 0; c < fields.size(); ++c) t.columns[c].push_back(parse_number(fields[c], row));
    }
    return t;
}

inline std::string join(const std::vector<std::string>& parts) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? "," : "") + parts[i];
    return out;
}

/// Reads a numeric CSV whose header must equal `expected` exactly.
inline Table read(const std::string& path, const std::vector<std::string>& expected) {
    Table t = read_any(path);
    if (t.header != expected) throw ParseError("'" + path + "': expected header '" + join(expected) + "'");
    return t;
}

/// Writes columns of equal length under `header` with LF line endings.
inline void write(const std::string& path, const std::vector<std::string>& header,
                  const std::vector<const std::vector<double>*>& columns) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path + "'");
    for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
    out << '\n';
    const std::size_t rows = columns.empty() ? 0 : columns.front()->size();
    for (const auto* c : columns)
        if (c->size() != rows) throw InvalidParameter("csv::write: column lengths differ");
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < columns.size(); ++c) out << (c ? "," : "") << format((*columns[c])[r]);
        out << '\n';
    }
    if (!out) throw IoError("failed writing '" + path + "'");
}

}  // namespace roadid::csv
