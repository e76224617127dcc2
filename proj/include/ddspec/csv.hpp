#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ddspec/coherence.hpp"
#include "ddspec/errors.hpp"
#include "ddspec/estimate.hpp"

namespace ddspec {

inline std::string format_full(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

inline double parse_double(std::string_view field, int line) {
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc{} || ptr != field.data() + field.size())
        throw parse_error("expected a number, got '" + std::string(field) + "'", line);
    return value;
}

inline long parse_long(std::string_view field, int line) {
    long value = 0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc{} || ptr != field.data() + field.size())
        throw parse_error("expected an integer, got '" + std::string(field) + "'", line);
    return value;
}

// Reads lines, validates the header, and hands each data row to `fn` as
// fields. Blank trailing lines are tolerated; blank interior lines are not.
template <typename Fn>
inline void read_rows(std::istream& in, std::string_view header, Fn&& fn) {
    std::string line;
    int lineno = 0;
    bool saw_header = false;
    bool saw_blank = false;
    const std::size_t ncols = split_fields(header).size();
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!saw_header) {
            if (line != header)
                throw parse_error("expected header '" + std::string(header) + "'", lineno);
            saw_header = true;
            continue;
        }
        if (line.empty()) {
            saw_blank = true;
            continue;
        }
        if (saw_blank) throw parse_error("blank line inside data", lineno);
        const auto fields = split_fields(line);
        if (fields.size() != ncols)
            throw parse_error("expected " + std::to_string(ncols) + " fields, got " +
                                  std::to_string(fields.size()),
                              lineno);
        fn(fields, lineno);
    }
    if (!saw_header) throw parse_error("empty input, expected header '" + std::string(header) + "'");
}

}  // namespace detail

inline constexpr std::string_view kFringeHeader = "phi_rf_rad,p_up,shots";
inline constexpr std::string_view kGridHeader = "f_mod_hz,n_pulses,coherence,sigma";
inline constexpr std::string_view kCandidatesHeader = "freq_hz,dip_depth,first_n";
inline constexpr std::string_view kReportHeader = "freq_hz,amp_ug,sigma_ug";
inline constexpr std::string_view kFilterHeader = "f_hz,abs_FT,abs_FT_sq";
inline constexpr std::string_view kCrbHeader = "eta,sigma_N_bound,sigma_f_bound";
inline constexpr std::string_view kScheduleHeader = "index,time_s";

inline void write_fringe_csv(std::ostream& out, const FringeScan& scan) {
    out << kFringeHeader << '\n';
    for (const auto& p : scan.points)
        out << format_full(p.phi_rf) << ',' << format_full(p.p_up) << ',' << p.shots << '\n';
}

inline FringeScan read_fringe_csv(std::istream& in) {
    FringeScan scan;
    detail::read_rows(in, kFringeHeader, [&scan](const auto& f, int line) {
        FringePoint p;
        p.phi_rf = detail::parse_double(f[0], line);
        p.p_up = detail::parse_double(f[1], line);
        p.shots = detail::parse_long(f[2], line);
        if (p.shots < 1) throw parse_error("shots must be positive", line);
        scan.points.push_back(p);
    });
    return scan;
}

inline void write_grid_csv(std::ostream& out, const ScanGrid& grid) {
    out << kGridHeader << '\n';
    for (std::size_t i_f = 0; i_f < grid.freqs.size(); ++i_f)
        for (std::size_t i_n = 0; i_n < grid.n_values.size(); ++i_n) {
            const auto& c = grid.cell(i_f, i_n);
            out << format_full(grid.freqs[i_f]) << ',' << grid.n_values[i_n] << ','
                << format_full(c.A) << ',' << format_full(c.sigma) << '\n';
        }
}

// Accepts rows in any order as long as they form a complete rectangular grid.
inline ScanGrid read_grid_csv(std::istream& in) {
    struct Row {
        double f;
        int n;
        double A;
        double sigma;
    };
    std::vector<Row> rows;
    detail::read_rows(in, kGridHeader, [&rows](const auto& f, int line) {
        Row r;
        r.f = detail::parse_double(f[0], line);
        const long n = detail::parse_long(f[1], line);
        if (n < 0) throw parse_error("pulse count must be non-negative", line);
        r.n = static_cast<int>(n);
        r.A = detail::parse_double(f[2], line);
        r.sigma = detail::parse_double(f[3], line);
        rows.push_back(r);
    });
    if (rows.empty()) throw parse_error("grid has no data rows");

    ScanGrid grid;
    for (const auto& r : rows) {
        if (std::find(grid.freqs.begin(), grid.freqs.end(), r.f) == grid.freqs.end())
            grid.freqs.push_back(r.f);
        if (std::find(grid.n_values.begin(), grid.n_values.end(), r.n) == grid.n_values.end())
            grid.n_values.push_back(r.n);
    }
    std::sort(grid.freqs.begin(), grid.freqs.end());
    std::sort(grid.n_values.begin(), grid.n_values.end());
    if (rows.size() != grid.freqs.size() * grid.n_values.size())
        throw parse_error("grid rows do not form a complete frequency x pulse-count rectangle");
    grid.cells.assign(rows.size(), ScanCell{});
    std::vector<bool> filled(rows.size(), false);
    for (const auto& r : rows) {
        const std::size_t i_f =
            std::find(grid.freqs.begin(), grid.freqs.end(), r.f) - grid.freqs.begin();
        const std::size_t i_n =
            std::find(grid.n_values.begin(), grid.n_values.end(), r.n) - grid.n_values.begin();
        const std::size_t idx = i_f * grid.n_values.size() + i_n;
        if (filled[idx]) throw parse_error("duplicate grid cell");
        filled[idx] = true;
        grid.cells[idx] = {r.A, r.sigma};
    }
    return grid;
}

inline void write_candidates_csv(std::ostream& out, const std::vector<CandidateTone>& cands) {
    out << kCandidatesHeader << '\n';
    for (const auto& c : cands)
        out << format_full(c.frequency) << ',' << format_full(c.dip_depth) << ','
            << c.first_n_detected << '\n';
}

inline std::vector<CandidateTone> read_candidates_csv(std::istream& in) {
    std::vector<CandidateTone> cands;
    detail::read_rows(in, kCandidatesHeader, [&cands](const auto& f, int line) {
        CandidateTone c;
        c.frequency = detail::parse_double(f[0], line);
        c.dip_depth = detail::parse_double(f[1], line);
        c.first_n_detected = static_cast<int>(detail::parse_long(f[2], line));
        cands.push_back(c);
    });
    return cands;
}

inline void write_report_csv(std::ostream& out, const std::vector<ToneEstimate>& tones) {
    out << kReportHeader << '\n';
    for (const auto& t : tones)
        out << format_full(t.frequency) << ',' << format_full(t.amplitude_ug) << ','
            << format_full(t.sigma_ug) << '\n';
}

inline std::vector<ToneEstimate> read_report_csv(std::istream& in) {
    std::vector<ToneEstimate> tones;
    detail::read_rows(in, kReportHeader, [&tones](const auto& f, int line) {
        ToneEstimate t;
        t.frequency = detail::parse_double(f[0], line);
        t.amplitude_ug = detail::parse_double(f[1], line);
        t.sigma_ug = detail::parse_double(f[2], line);
        tones.push_back(t);
    });
    return tones;
}

struct FilterRow {
    double f = 0.0;
    double abs_ft = 0.0;
};

inline void write_filter_csv(std::ostream& out, const std::vector<FilterRow>& rows) {
    out << kFilterHeader << '\n';
    for (const auto& r : rows)
        out << format_full(r.f) << ',' << format_full(r.abs_ft) << ','
            << format_full(r.abs_ft * r.abs_ft) << '\n';
}

struct CrbRow {
    double eta = 0.0;
    double sigma_n = 0.0;
    double sigma_f = 0.0;
};

inline void write_crb_csv(std::ostream& out, const std::vector<CrbRow>& rows) {
    out << kCrbHeader << '\n';
    for (const auto& r : rows)
        out << format_full(r.eta) << ',' << format_full(r.sigma_n) << ','
            << format_full(r.sigma_f) << '\n';
}

inline void write_schedule_csv(std::ostream& out, const PulseSchedule& schedule) {
    out << kScheduleHeader << '\n';
    for (std::size_t i = 0; i < schedule.pulse_times.size(); ++i)
        out << i << ',' << format_full(schedule.pulse_times[i]) << '\n';
}

}  // namespace ddspec
