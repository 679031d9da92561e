#pragma once

// Minimal delimited-text reader/writer. Comma or semicolon, detected from the
// header line; RFC 4180 style double quotes.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "spatialrisk/error.hpp"

namespace spatialrisk {

inline std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

inline std::string to_lower_ascii(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

inline char detect_delimiter(std::string_view header) {
    const auto commas = std::count(header.begin(), header.end(), ',');
    const auto semis = std::count(header.begin(), header.end(), ';');
    return semis > commas ? ';' : ',';
}

inline std::vector<std::string> split_delimited(std::string_view line, char delim) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == delim) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += ch;
        }
    }
    out.push_back(trim(cur));
    return out;
}

struct DelimitedTable {
    char delimiter = ',';
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;  // 1-based source line of each row

    /// Case-insensitive lookup of the first header matching any alias.
    std::optional<std::size_t> find_column(std::initializer_list<std::string_view> aliases) const {
        for (auto alias : aliases) {
            const auto want = to_lower_ascii(alias);
            for (std::size_t i = 0; i < header.size(); ++i)
                if (to_lower_ascii(header[i]) == want) return i;
        }
        return std::nullopt;
    }

    std::size_t require_column(std::initializer_list<std::string_view> aliases) const {
        if (auto c = find_column(aliases)) return *c;
        throw Error(ErrorKind::schema, "missing required column " + std::string(*aliases.begin()));
    }
};

inline DelimitedTable parse_delimited(std::istream& in, std::optional<char> delimiter = std::nullopt) {
    DelimitedTable t;
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        if (!have_header) {
            t.delimiter = delimiter.value_or(detect_delimiter(line));
            t.header = split_delimited(line, t.delimiter);
            have_header = true;
            continue;
        }
        auto cells = split_delimited(line, t.delimiter);
        if (cells.size() != t.header.size()) {
            throw Error(ErrorKind::parse, "row " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                                              " cells, header has " + std::to_string(t.header.size()));
        }
        t.rows.push_back(std::move(cells));
        t.line_numbers.push_back(line_no);
    }
    if (!have_header) throw Error(ErrorKind::schema, "empty file: no header row");
    return t;
}

inline DelimitedTable read_delimited(const std::string& path, std::optional<char> delimiter = std::nullopt) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::parse, "cannot open " + path);
    return parse_delimited(in, delimiter);
}

/// Parses a finite real. A lone comma is accepted as the decimal separator
/// when `allow_decimal_comma` is set (semicolon-delimited sources).
inline std::optional<double> parse_real(std::string_view text, bool allow_decimal_comma = false) {
    std::string s = trim(text);
    if (s.empty()) return std::nullopt;
    if (allow_decimal_comma && s.find('.') == std::string::npos) std::replace(s.begin(), s.end(), ',', '.');
    if (s.front() == '+') s.erase(0, 1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

/// Like parse_real but also reads back "nan", "inf" and "-inf" as written by format_real.
inline std::optional<double> parse_real_any(std::string_view text) {
    const std::string s = trim(text);
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    return parse_real(s);
}

/// Shortest text that reads back to the same double.
inline std::string format_real(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

inline std::string format_fixed(double v, int digits) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

inline std::string quote_cell(std::string_view cell, char delim) {
    if (cell.find_first_of(std::string{delim, '"', '\n'}) == std::string_view::npos) return std::string(cell);
    std::string out = "\"";
    for (char c : cell) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

class DelimitedWriter {
public:
    explicit DelimitedWriter(std::ostream& out, char delim = ',') : out_(out), delim_(delim) {}

    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << delim_;
            out_ << quote_cell(cells[i], delim_);
        }
        out_ << '\n';
    }

private:
    std::ostream& out_;
    char delim_;
};

}  // namespace spatialrisk
