#include "martkit/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string_view>
#include <vector>

#include "martkit/error.hpp"

namespace martkit {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

[[noreturn]] void parse_error(std::size_t line, const std::string& what) {
    fail(ErrorKind::Parse, "line " + std::to_string(line) + ": " + what);
}

long parse_index(std::string_view field, std::size_t line, const char* name) {
    long v = 0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc() || ptr != field.data() + field.size())
        parse_error(line, std::string(name) + " is not an integer: '" + std::string(field) + "'");
    if (v < 1) parse_error(line, std::string(name) + " must be >= 1, got " + std::to_string(v));
    return v;
}

double parse_value(std::string_view field, std::size_t line, const char* name) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc() || ptr != field.data() + field.size())
        parse_error(line, std::string(name) + " is not a number: '" + std::string(field) + "'");
    if (!std::isfinite(v)) parse_error(line, std::string(name) + " must be finite");
    return v;
}

// Reads the header and returns the data lines with their 1-based numbers.
std::vector<std::pair<std::size_t, std::string>> read_lines(std::istream& in,
                                                            std::string_view header) {
    std::vector<std::pair<std::size_t, std::string>> out;
    std::string line;
    std::size_t number = 0;
    bool seen_header = false;
    while (std::getline(in, line)) {
        ++number;
        if (trim(line).empty()) continue;
        if (!seen_header) {
            std::string h;
            for (auto f : split(line)) h += (h.empty() ? "" : ",") + std::string(f);
            if (h != header)
                parse_error(number, "expected header '" + std::string(header) + "', got '" +
                                        std::string(trim(line)) + "'");
            seen_header = true;
            continue;
        }
        out.emplace_back(number, line);
    }
    if (!seen_header) fail(ErrorKind::Parse, "empty file: missing header '" + std::string(header) + "'");
    return out;
}

std::vector<std::string_view> fields(const std::string& line, std::size_t number,
                                     std::size_t expected) {
    auto f = split(line);
    if (f.size() != expected)
        parse_error(number, "expected " + std::to_string(expected) + " fields, got " +
                                std::to_string(f.size()));
    return f;
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

void write_series_csv(std::ostream& out, const MatrixSeries& series) {
    out << "t,row,col,value\n";
    for (std::size_t t = 0; t < series.length(); ++t)
        for (Eigen::Index i = 0; i < series.rows(); ++i)
            for (Eigen::Index j = 0; j < series.cols(); ++j)
                out << t + 1 << ',' << i + 1 << ',' << j + 1 << ','
                    << format_double(series.x[t](i, j)) << '\n';
}

void write_thresholds_csv(std::ostream& out, const MatrixSeries& series) {
    out << "t,z,w\n";
    for (std::size_t t = 0; t < series.length(); ++t)
        out << t + 1 << ',' << format_double(series.z[t]) << ',' << format_double(series.w[t])
            << '\n';
}

namespace {

std::vector<Matrix> parse_matrix(std::istream& matrix) {
    struct Cell {
        long t, row, col;
        double value;
        std::size_t line;
    };
    std::vector<Cell> cells;
    long big_t = 0, m = 0, n = 0;
    for (const auto& [number, line] : read_lines(matrix, "t,row,col,value")) {
        const auto f = fields(line, number, 4);
        Cell c{parse_index(f[0], number, "t"), parse_index(f[1], number, "row"),
               parse_index(f[2], number, "col"), parse_value(f[3], number, "value"), number};
        big_t = std::max(big_t, c.t);
        m = std::max(m, c.row);
        n = std::max(n, c.col);
        cells.push_back(c);
    }
    require(!cells.empty(), ErrorKind::Parse, "no data rows after the header");

    std::vector<std::size_t> seen(static_cast<std::size_t>(big_t * m * n), 0);
    std::vector<bool> time_present(static_cast<std::size_t>(big_t), false);
    std::vector<Matrix> x(static_cast<std::size_t>(big_t), Matrix::Zero(m, n));
    for (const Cell& c : cells) {
        const auto slot = static_cast<std::size_t>(((c.t - 1) * m + (c.row - 1)) * n + (c.col - 1));
        if (seen[slot] != 0)
            parse_error(c.line, "duplicate cell (t=" + std::to_string(c.t) + ", row=" +
                                    std::to_string(c.row) + ", col=" + std::to_string(c.col) +
                                    "), first given on line " + std::to_string(seen[slot]));
        seen[slot] = c.line;
        time_present[static_cast<std::size_t>(c.t - 1)] = true;
        x[static_cast<std::size_t>(c.t - 1)](c.row - 1, c.col - 1) = c.value;
    }
    for (long t = 1; t <= big_t; ++t) {
        if (!time_present[static_cast<std::size_t>(t - 1)])
            fail(ErrorKind::Parse, "time index " + std::to_string(t) +
                                       " has no rows; indices must be contiguous from 1 to " +
                                       std::to_string(big_t));
        for (long i = 1; i <= m; ++i)
            for (long j = 1; j <= n; ++j)
                if (seen[static_cast<std::size_t>(((t - 1) * m + (i - 1)) * n + (j - 1))] == 0)
                    fail(ErrorKind::Parse, "missing cell (t=" + std::to_string(t) + ", row=" +
                                               std::to_string(i) + ", col=" + std::to_string(j) +
                                               ")");
    }

    return x;
}

std::pair<std::vector<double>, std::vector<double>> parse_thresholds(std::istream& thresholds,
                                                                     std::size_t length) {
    const auto big_t = static_cast<long>(length);
    std::vector<double> z(length), w(length);
    std::vector<std::size_t> line_of(z.size(), 0);
    for (const auto& [number, line] : read_lines(thresholds, "t,z,w")) {
        const auto f = fields(line, number, 3);
        const long t = parse_index(f[0], number, "t");
        if (t > big_t)
            parse_error(number, "time index " + std::to_string(t) +
                                    " exceeds the matrix series length " + std::to_string(big_t));
        const auto k = static_cast<std::size_t>(t - 1);
        if (line_of[k] != 0)
            parse_error(number, "duplicate time index " + std::to_string(t) +
                                    ", first given on line " + std::to_string(line_of[k]));
        line_of[k] = number;
        z[k] = parse_value(f[1], number, "z");
        w[k] = parse_value(f[2], number, "w");
    }
    for (std::size_t k = 0; k < line_of.size(); ++k)
        if (line_of[k] == 0) fail(ErrorKind::Parse, "missing time index " + std::to_string(k + 1));
    return {std::move(z), std::move(w)};
}

Error located(const std::string& path, const Error& e) {
    return Error(e.kind(), path + ": " + e.what());
}

}  // namespace

MatrixSeries read_series_csv(std::istream& matrix, std::istream* thresholds) {
    std::vector<Matrix> x = parse_matrix(matrix);
    if (thresholds == nullptr) return make_endogenous_series(std::move(x));
    auto [z, w] = parse_thresholds(*thresholds, x.size());
    return make_exogenous_series(std::move(x), std::move(z), std::move(w));
}

MatrixSeries ingest(const std::string& matrix_path,
                    const std::optional<std::string>& thresholds_path) {
    std::ifstream matrix(matrix_path);
    require(matrix.good(), ErrorKind::Parse, "cannot open " + matrix_path);
    std::ifstream thr;
    if (thresholds_path) {
        thr.open(*thresholds_path);
        require(thr.good(), ErrorKind::Parse, "cannot open " + *thresholds_path);
    }
    std::vector<Matrix> x;
    try {
        x = parse_matrix(matrix);
    } catch (const Error& e) {
        throw located(matrix_path, e);
    }
    if (!thresholds_path) return make_endogenous_series(std::move(x));
    try {
        auto [z, w] = parse_thresholds(thr, x.size());
        return make_exogenous_series(std::move(x), std::move(z), std::move(w));
    } catch (const Error& e) {
        throw located(*thresholds_path, e);
    }
}

}  // namespace martkit
