#ifndef PARAMP_IO_CSV_HPP
#define PARAMP_IO_CSV_HPP

#include <charconv>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "paramp/error.hpp"
#include "paramp/fitting.hpp"
#include "paramp/io/files.hpp"

namespace paramp::io {

/// Numeric table with a named header row.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
    std::vector<std::size_t> line_numbers;  // source line of each row, 1-based

    std::size_t column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) return i;
        }
        throw ValidationError("table has no column '" + name + "'");
    }
};

namespace detail_csv {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

inline std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.push_back(trim(line.substr(start)));
            return out;
        }
        out.push_back(trim(line.substr(start, comma - start)));
        start = comma + 1;
    }
}

inline double parse_number(std::string_view cell, std::size_t line, std::size_t column) {
    if (cell.empty()) throw ParseError("empty cell", line, column);
    if (cell.front() == '+') cell.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc() || ptr != cell.data() + cell.size()) {
        throw ParseError("not a number: '" + std::string(cell) + "'", line, column);
    }
    return v;
}

}  // namespace detail_csv

/// Parses CSV text: '#' comment lines and blank lines are skipped, the first
/// remaining line is the header, every further line must have one numeric
/// cell per header column.
inline Table parse_table(std::string_view text) {
    Table t;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    bool have_header = false;
    if (text.substr(0, 3) == "\xEF\xBB\xBF") pos = 3;
    while (pos <= text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        const std::string_view raw = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        const std::string_view line = detail_csv::trim(raw);
        if (line.empty() || line.front() == '#') {
            if (end == text.size()) break;
            continue;
        }
        const auto cells = detail_csv::split(line);
        if (!have_header) {
            for (std::size_t c = 0; c < cells.size(); ++c) {
                if (cells[c].empty()) throw ParseError("empty header name", line_no, c + 1);
                t.header.emplace_back(cells[c]);
            }
            have_header = true;
        } else {
            if (cells.size() != t.header.size()) {
                throw ParseError("expected " + std::to_string(t.header.size()) + " columns, got " +
                                     std::to_string(cells.size()),
                                 line_no, std::min(cells.size(), t.header.size()) + 1);
            }
            std::vector<double> row(cells.size());
            for (std::size_t c = 0; c < cells.size(); ++c) {
                row[c] = detail_csv::parse_number(cells[c], line_no, c + 1);
            }
            t.rows.push_back(std::move(row));
            t.line_numbers.push_back(line_no);
        }
        if (end == text.size()) break;
    }
    if (!have_header) throw ValidationError("CSV has no header row");
    return t;
}

inline Table read_table(const std::filesystem::path& path) {
    return parse_table(read_text_file(path));
}

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// CSV text with a header and one line per row; values printed with 17
/// significant digits so they re-read bit-exactly.
inline std::string format_table(const std::vector<std::string>& header,
                                const std::vector<std::vector<double>>& columns) {
    std::string out;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (c) out += ',';
        out += header[c];
    }
    out += '\n';
    const std::size_t n = columns.empty() ? 0 : columns.front().size();
    for (const auto& col : columns) {
        if (col.size() != n) throw ContractViolation("format_table: ragged columns");
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < columns.size(); ++c) {
            if (c) out += ',';
            out += format_double(columns[c][i]);
        }
        out += '\n';
    }
    return out;
}

inline void write_table(const std::filesystem::path& path, const std::vector<std::string>& header,
                        const std::vector<std::vector<double>>& columns) {
    write_file_atomic(path, format_table(header, columns));
}

// ---------------------------------------------------------------------------
// Typed traces
// ---------------------------------------------------------------------------

enum class TraceKind { Complex, Gain, Spectrum, Kerr };

inline const std::vector<std::string>& schema(TraceKind kind) {
    static const std::vector<std::string> complex{"freq_hz", "re", "im"};
    static const std::vector<std::string> gain{"freq_hz", "gain_db"};
    static const std::vector<std::string> spectrum{"freq_hz", "power_dbm"};
    static const std::vector<std::string> kerr{"n_photons", "freq_hz"};
    switch (kind) {
        case TraceKind::Complex: return complex;
        case TraceKind::Gain: return gain;
        case TraceKind::Spectrum: return spectrum;
        case TraceKind::Kerr: return kerr;
    }
    throw ContractViolation("unknown trace kind");
}

namespace detail_csv {

/// Checks the header starts with the schema columns (extra trailing
/// columns are allowed, e.g. idler gain) and that the table is not empty.
inline void require_schema(const Table& t, TraceKind kind) {
    const auto& want = schema(kind);
    for (std::size_t c = 0; c < want.size(); ++c) {
        if (c >= t.header.size() || t.header[c] != want[c]) {
            std::string expected;
            for (const auto& w : want) expected += (expected.empty() ? "" : ",") + w;
            throw ParseError("header must start with '" + expected + "'", 1, c + 1);
        }
    }
    if (t.rows.empty()) throw ValidationError("empty trace: header without data rows");
}

inline void require_increasing(const Table& t, std::size_t col) {
    for (std::size_t i = 1; i < t.rows.size(); ++i) {
        if (!(t.rows[i][col] > t.rows[i - 1][col])) {
            throw ValidationError("frequencies not strictly increasing at line " +
                                  std::to_string(t.line_numbers[i]));
        }
    }
}

}  // namespace detail_csv

inline fit::ComplexTrace complex_trace_from_table(const Table& t) {
    detail_csv::require_schema(t, TraceKind::Complex);
    detail_csv::require_increasing(t, 0);
    fit::ComplexTrace out;
    for (const auto& r : t.rows) {
        out.freq.push_back(r[0]);
        out.s21.emplace_back(r[1], r[2]);
    }
    return out;
}

inline fit::GainTrace gain_trace_from_table(const Table& t) {
    detail_csv::require_schema(t, TraceKind::Gain);
    detail_csv::require_increasing(t, 0);
    fit::GainTrace out;
    for (const auto& r : t.rows) {
        out.freq.push_back(r[0]);
        out.gain_db.push_back(r[1]);
    }
    return out;
}

inline fit::Spectrum spectrum_from_table(const Table& t) {
    detail_csv::require_schema(t, TraceKind::Spectrum);
    detail_csv::require_increasing(t, 0);
    fit::Spectrum out;
    for (const auto& r : t.rows) {
        out.freq.push_back(r[0]);
        out.power_dbm.push_back(r[1]);
    }
    return out;
}

inline std::vector<fit::KerrPoint> kerr_points_from_table(const Table& t) {
    detail_csv::require_schema(t, TraceKind::Kerr);
    std::vector<fit::KerrPoint> out;
    for (const auto& r : t.rows) out.push_back({r[0], r[1]});
    return out;
}

inline fit::ComplexTrace read_complex_trace(const std::filesystem::path& p) {
    return complex_trace_from_table(read_table(p));
}
inline fit::GainTrace read_gain_trace(const std::filesystem::path& p) {
    return gain_trace_from_table(read_table(p));
}
inline fit::Spectrum read_spectrum(const std::filesystem::path& p) {
    return spectrum_from_table(read_table(p));
}
inline std::vector<fit::KerrPoint> read_kerr_points(const std::filesystem::path& p) {
    return kerr_points_from_table(read_table(p));
}

inline void write_complex_trace(const std::filesystem::path& p, const fit::ComplexTrace& t) {
    std::vector<double> re, im;
    for (const auto& z : t.s21) {
        re.push_back(z.real());
        im.push_back(z.imag());
    }
    write_table(p, schema(TraceKind::Complex), {t.freq, re, im});
}

inline void write_gain_trace(const std::filesystem::path& p, const fit::GainTrace& t) {
    write_table(p, schema(TraceKind::Gain), {t.freq, t.gain_db});
}

inline void write_spectrum(const std::filesystem::path& p, const fit::Spectrum& s) {
    write_table(p, schema(TraceKind::Spectrum), {s.freq, s.power_dbm});
}

inline void write_kerr_points(const std::filesystem::path& p,
                              const std::vector<fit::KerrPoint>& pts) {
    std::vector<double> n, f;
    for (const auto& q : pts) {
        n.push_back(q.n);
        f.push_back(q.f_r);
    }
    write_table(p, schema(TraceKind::Kerr), {n, f});
}

}  // namespace paramp::io

#endif  // PARAMP_IO_CSV_HPP
