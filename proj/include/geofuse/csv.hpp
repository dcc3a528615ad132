#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "geofuse/errors.hpp"

namespace geofuse {

// Minimal strict CSV layer for the plain-text table schemas used throughout:
// comma-separated, UTF-8, one header row, no quoting or embedded commas.
// Numeric cells are parsed strictly: the literal tokens NaN/nan, empty cells,
// and trailing garbage are all rejected.

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;  // each of size header.size()
};

namespace detail {

inline std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            cells.push_back(line.substr(start));
            break;
        }
        cells.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return cells;
}

inline std::string strip_cr(std::string s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

}  // namespace detail

// Reads a whole CSV file; enforces a non-empty header and rectangular rows.
inline CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw input_error("cannot open file: " + path);
    CsvTable table;
    std::string line;
    if (!std::getline(in, line)) throw input_error("empty file: " + path);
    table.header = detail::split_line(detail::strip_cr(line));
    if (table.header.empty() || table.header[0].empty())
        throw input_error("missing header row: " + path);
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        line = detail::strip_cr(line);
        if (line.empty() && in.peek() == std::char_traits<char>::eof()) break;
        auto cells = detail::split_line(line);
        if (cells.size() != table.header.size())
            throw input_error(path + ":" + std::to_string(lineno) + ": expected " +
                              std::to_string(table.header.size()) + " cells, got " +
                              std::to_string(cells.size()));
        table.rows.push_back(std::move(cells));
    }
    if (table.rows.empty()) throw input_error("no data rows: " + path);
    return table;
}

// Strict finite-double parse of one cell. `context` names the cell in errors.
inline double parse_numeric_cell(const std::string& cell, const std::string& context) {
    if (cell.empty())
        throw input_error(context + ": empty cell in numeric column");
    double value = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    const auto res = std::from_chars(first, last, value);
    if (res.ec != std::errc() || res.ptr != last)
        throw input_error(context + ": non-numeric cell '" + cell + "'");
    if (!std::isfinite(value))
        throw input_error(context + ": non-finite entry '" + cell + "'");
    return value;
}

// Shortest round-trip decimal formatting; used for all machine-readable
// output so identical runs emit byte-identical files.
inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

// Line-oriented CSV writer with explicit flush-and-check on close.
class CsvWriter {
public:
    explicit CsvWriter(const std::string& path) : path_(path), out_(path) {
        if (!out_) throw input_error("cannot write file: " + path);
    }

    void write_row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << cells[i];
        }
        out_ << '\n';
    }

    void close() {
        out_.flush();
        if (!out_) throw input_error("write failed: " + path_);
        out_.close();
    }

private:
    std::string path_;
    std::ofstream out_;
};

}  // namespace geofuse
