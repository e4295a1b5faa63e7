#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <locale>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ldhole/errors.hpp"
#include "ldhole/kernels.hpp"
#include "ldhole/points.hpp"

namespace ldhole {

/// 17 significant digits, '.' decimal regardless of locale; inf and nan
/// spelled out.
inline std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    std::string s(buf);
    for (char& c : s)
        if (c == ',') c = '.';
    return s;
}

/// Comma-separated table with LF line endings.
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> columns) : columns_(std::move(columns)) {}

    void add_row(const std::vector<double>& values) {
        if (values.size() != columns_.size()) throw DomainError("CsvTable: row width differs from header");
        rows_.push_back(values);
    }

    std::string str() const {
        std::string out;
        for (std::size_t j = 0; j < columns_.size(); ++j) out += (j ? "," : "") + columns_[j];
        out += '\n';
        for (const auto& row : rows_) {
            for (std::size_t j = 0; j < row.size(); ++j) out += (j ? "," : "") + format_double(row[j]);
            out += '\n';
        }
        return out;
    }

    std::size_t rows() const noexcept { return rows_.size(); }

private:
    std::vector<std::string> columns_;
    std::vector<std::vector<double>> rows_;
};

/// Writes bytes as given (binary mode, so no CRLF translation).
inline void write_file(const std::string& path, std::string_view content) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw ConfigError("cannot open output file '" + path + "'");
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!f) throw ConfigError("failed writing '" + path + "'");
}

inline std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open input file '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

namespace detail {
inline double parse_number(std::string_view tok, std::string_view what) {
    std::string t(tok);
    const auto a = t.find_first_not_of(" \t\r\n");
    const auto b = t.find_last_not_of(" \t\r\n");
    if (a == std::string::npos) throw ConfigError(std::string(what) + ": empty number");
    t = t.substr(a, b - a + 1);
    std::istringstream ss(t);
    ss.imbue(std::locale::classic());
    double x = 0;
    ss >> x;
    if (!ss || !ss.eof() || !std::isfinite(x)) throw ConfigError(std::string(what) + ": '" + t + "' is not a finite number");
    return x;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}
} // namespace detail

/// "1,2,3" -> {1, 2, 3}.
inline std::vector<double> parse_list(std::string_view s, std::string_view what) {
    std::vector<double> out;
    for (auto tok : detail::split(s, ',')) out.push_back(detail::parse_number(tok, what));
    return out;
}

/// Two-column CSV "distance,value", optional header line, for a tabulated
/// kernel.
inline IsotropicKernel read_kernel_table(const std::string& path) {
    std::istringstream in(read_file(path));
    std::vector<double> x, y;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos || line[0] == '#') continue;
        const auto cols = detail::split(line, ',');
        if (cols.size() != 2) throw ConfigError(path + ":" + std::to_string(lineno) + ": expected distance,value");
        if (x.empty() && y.empty() && lineno == 1 && cols[0].find_first_of("0123456789") == std::string_view::npos)
            continue; // header
        const std::string where = path + ":" + std::to_string(lineno);
        x.push_back(detail::parse_number(cols[0], where));
        y.push_back(detail::parse_number(cols[1], where));
    }
    try {
        return IsotropicKernel::tabulated(std::move(x), std::move(y));
    } catch (const DomainError& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

} // namespace ldhole
