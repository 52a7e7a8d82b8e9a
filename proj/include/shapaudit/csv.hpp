#pragma once

// Minimal RFC 4180 CSV reader/writer. Quoted fields may contain commas,
// doubled quotes and line breaks; records end with CRLF on output and accept
// CRLF or LF on input.

#include <cstdio>
#include <fstream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "shapaudit/common.hpp"

namespace shapaudit {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

namespace detail {

inline std::vector<std::vector<std::string>> parse_csv_records(const std::string& text,
                                                               const std::string& origin) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> field_row;
    std::string field;
    bool in_quotes = false;
    bool row_started = false;
    const std::size_t n = text.size();

    auto end_field = [&] {
        field_row.push_back(field);
        field.clear();
    };
    auto end_row = [&] {
        end_field();
        records.push_back(std::move(field_row));
        field_row.clear();
        row_started = false;
    };

    for (std::size_t i = 0; i < n; ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < n && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"':
                if (!field.empty()) {
                    throw IoError(origin + ": quote inside unquoted field");
                }
                in_quotes = true;
                row_started = true;
                break;
            case ',':
                end_field();
                row_started = true;
                break;
            case '\r':
                if (i + 1 < n && text[i + 1] == '\n') ++i;
                end_row();
                break;
            case '\n':
                end_row();
                break;
            default:
                field.push_back(c);
                row_started = true;
                break;
        }
    }
    if (in_quotes) throw IoError(origin + ": unterminated quoted field");
    if (row_started || !field_row.empty() || !field.empty()) end_row();
    return records;
}

}  // namespace detail

inline CsvTable read_csv_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open CSV file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    auto records = detail::parse_csv_records(buf.str(), path);
    if (records.empty()) throw IoError("CSV file '" + path + "' is empty");

    CsvTable t;
    t.header = std::move(records.front());
    const std::size_t width = t.header.size();
    for (std::size_t r = 1; r < records.size(); ++r) {
        if (records[r].size() != width) {
            throw IoError("CSV file '" + path + "': row " + std::to_string(r) + " has " +
                          std::to_string(records[r].size()) + " fields, header has " +
                          std::to_string(width));
        }
        t.rows.push_back(std::move(records[r]));
    }
    return t;
}

inline std::string csv_escape(const std::string& field) {
    const bool needs_quotes =
        field.find_first_of(",\"\r\n") != std::string::npos;
    if (!needs_quotes) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out.push_back('"');
    return out;
}

// Shortest decimal form that round-trips the exact double. Keeps numeric CSV
// cells byte-stable across runs without printing 17 digits for 0.5.
inline std::string format_double(double v) {
    char buf[64];
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        double back = 0.0;
        std::sscanf(buf, "%lf", &back);
        if (back == v) return buf;
    }
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

class CsvWriter {
  public:
    explicit CsvWriter(std::ostream& out) : out_(out) {}

    void row(std::span<const std::string> fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) out_ << ',';
            out_ << csv_escape(fields[i]);
        }
        out_ << "\r\n";
    }

    void row(std::initializer_list<std::string> fields) {
        row(std::span<const std::string>(fields.begin(), fields.size()));
    }

  private:
    std::ostream& out_;
};

}  // namespace shapaudit
