#pragma once

// File formats: surveillance count CSVs (`year,week,<group>...`), contact
// matrix CSVs (label header row and column), and the number formatting used
// by every emitted table (locale-independent '.' decimals, LF endings).

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "epicast/calendar.hpp"
#include "epicast/contacts.hpp"
#include "epicast/series.hpp"

namespace epicast {

/// Shortest clean representation with up to 12 significant digits; used for
/// all CSV numeric output so repeated runs emit identical bytes.
inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return std::string(buf);
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    fields.push_back(cur);
    return fields;
}

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

inline long parse_count_field(const std::string& field, const std::string& path, std::size_t line_no,
                              const std::string& what) {
    const std::string t = trim(field);
    if (t.empty()) throw std::runtime_error(path + ":" + std::to_string(line_no) + ": empty " + what);
    std::size_t pos = 0;
    long v = 0;
    try {
        v = std::stol(t, &pos);
    } catch (const std::exception&) {
        throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + what + " '" + t +
                                 "' is not an integer");
    }
    if (pos != t.size())
        throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + what + " '" + t +
                                 "' is not an integer");
    return v;
}

inline double parse_double_field(const std::string& field, const std::string& path, std::size_t line_no,
                                 const std::string& what) {
    const std::string t = trim(field);
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(t, &pos);
    } catch (const std::exception&) {
        throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + what + " '" + t +
                                 "' is not a number");
    }
    if (pos != t.size())
        throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + what + " '" + t +
                                 "' is not a number");
    return v;
}

}  // namespace detail

/// Reads `year,week,<group1>,...` count data. Weeks must be contiguous ISO
/// weeks (gaps, duplicates, and negative counts are errors, each reported
/// with its line number). An optional selection picks and orders a subset of
/// the group columns.
inline SurveillanceSeries ingest_csv(const std::string& path,
                                     const std::vector<std::string>& group_columns = {}) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("ingest_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path + ":1: empty file");
    const auto header = detail::split_csv_line(line);
    if (header.size() < 3 || detail::trim(header[0]) != "year" || detail::trim(header[1]) != "week")
        throw std::runtime_error(path + ":1: header must be 'year,week,<group>,...'");
    std::vector<std::string> labels(header.begin() + 2, header.end());
    for (auto& l : labels) l = detail::trim(l);

    std::vector<std::size_t> pick;
    if (group_columns.empty()) {
        for (std::size_t i = 0; i < labels.size(); ++i) pick.push_back(i);
    } else {
        for (const auto& want : group_columns) {
            bool found = false;
            for (std::size_t i = 0; i < labels.size(); ++i) {
                if (labels[i] == want) {
                    pick.push_back(i);
                    found = true;
                    break;
                }
            }
            if (!found) throw std::runtime_error("ingest_csv: no column '" + want + "' in " + path);
        }
    }

    std::vector<CalendarWeek> weeks;
    std::vector<std::vector<long>> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != header.size())
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected " +
                                     std::to_string(header.size()) + " fields, got " +
                                     std::to_string(fields.size()));
        CalendarWeek w;
        w.year = static_cast<int>(detail::parse_count_field(fields[0], path, line_no, "year"));
        w.week = static_cast<int>(detail::parse_count_field(fields[1], path, line_no, "week"));
        if (!valid_week(w))
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": invalid ISO week " +
                                     to_string(w));
        if (!weeks.empty()) {
            if (w == weeks.back())
                throw std::runtime_error(path + ":" + std::to_string(line_no) + ": duplicate week " +
                                         to_string(w));
            const CalendarWeek expected = next_week(weeks.back());
            if (!(w == expected))
                throw std::runtime_error(path + ":" + std::to_string(line_no) + ": weeks not contiguous (" +
                                         to_string(weeks.back()) + " is followed by " + to_string(w) +
                                         ", expected " + to_string(expected) + ")");
        }
        weeks.push_back(w);
        std::vector<long> row;
        row.reserve(pick.size());
        for (std::size_t i : pick) {
            const long v = detail::parse_count_field(fields[i + 2], path, line_no,
                                                     "count for '" + labels[i] + "'");
            if (v < 0)
                throw std::runtime_error(path + ":" + std::to_string(line_no) + ": negative count for '" +
                                         labels[i] + "'");
            row.push_back(v);
        }
        rows.push_back(std::move(row));
    }
    if (rows.size() < 2) throw std::runtime_error("ingest_csv: " + path + " has fewer than 2 data rows");

    Eigen::MatrixXd counts(static_cast<Eigen::Index>(pick.size()), static_cast<Eigen::Index>(rows.size()));
    for (std::size_t t = 0; t < rows.size(); ++t)
        for (std::size_t g = 0; g < pick.size(); ++g)
            counts(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(t)) =
                static_cast<double>(rows[t][g]);
    std::vector<std::string> chosen;
    chosen.reserve(pick.size());
    for (std::size_t i : pick) chosen.push_back(labels[i]);
    return SurveillanceSeries(std::move(counts), std::move(weeks), std::move(chosen));
}

/// Reads a G x G contact matrix with labels in the header row and the first
/// column; row labels must repeat the header order.
inline ContactMatrix read_contacts_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_contacts_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path + ":1: empty file");
    auto header = detail::split_csv_line(line);
    if (header.size() < 2) throw std::runtime_error(path + ":1: header must list group labels");
    std::vector<std::string> labels(header.begin() + 1, header.end());
    for (auto& l : labels) l = detail::trim(l);
    const std::size_t g = labels.size();

    Eigen::MatrixXd w(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(g));
    std::size_t line_no = 1, row = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        if (row >= g) throw std::runtime_error(path + ":" + std::to_string(line_no) + ": too many rows");
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != g + 1)
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected " +
                                     std::to_string(g + 1) + " fields");
        if (detail::trim(fields[0]) != labels[row])
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": row label '" +
                                     detail::trim(fields[0]) + "' does not match header order");
        for (std::size_t j = 0; j < g; ++j)
            w(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(j)) =
                detail::parse_double_field(fields[j + 1], path, line_no, "contact weight");
        ++row;
    }
    if (row != g) throw std::runtime_error(path + ": expected " + std::to_string(g) + " rows, got " +
                                           std::to_string(row));
    return ContactMatrix(std::move(w), std::move(labels));
}

/// Writes a contact matrix in the same format read_contacts_csv accepts.
inline void write_contacts_csv(const ContactMatrix& c, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_contacts_csv: cannot open " + path);
    out << "group";
    for (const auto& l : c.labels()) out << ',' << l;
    out << '\n';
    for (Eigen::Index i = 0; i < c.groups(); ++i) {
        out << c.labels()[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < c.groups(); ++j) out << ',' << format_double(c.weights()(i, j));
        out << '\n';
    }
}

/// Writes a surveillance series in the format ingest_csv accepts.
inline void write_counts_csv(const SurveillanceSeries& s, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_counts_csv: cannot open " + path);
    out << "year,week";
    for (const auto& l : s.group_labels()) out << ',' << l;
    out << '\n';
    for (Eigen::Index t = 0; t < s.weeks_count(); ++t) {
        out << s.week(t).year << ',' << s.week(t).week;
        for (Eigen::Index g = 0; g < s.groups(); ++g) out << ',' << static_cast<long>(s.count(g, t));
        out << '\n';
    }
}

}  // namespace epicast
