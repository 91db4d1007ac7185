#pragma once

// Minimal RFC-4180 reader/writer: quoted fields, doubled quotes, embedded
// separators and line breaks, CRLF or LF line endings.

#include <cstddef>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "gog/error.hpp"

namespace gog::csv {

using Row = std::vector<std::string>;

/// Reads every record. Blank lines are skipped. Throws ParseError on an
/// unterminated quoted field.
inline std::vector<Row> read(std::istream& in) {
    std::vector<Row> rows;
    Row row;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    std::size_t line = 1;
    std::size_t record_line = 1;
    char c;

    auto end_field = [&] {
        row.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_record = [&] {
        const bool blank = row.empty() && field.empty() && !field_started;
        if (!blank) {
            end_field();
            rows.push_back(std::move(row));
        }
        row.clear();
        record_line = line;
    };

    while (in.get(c)) {
        if (in_quotes) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get(c);
                    field += '"';
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line;
                field += c;
            }
            continue;
        }
        switch (c) {
            case '"':
                if (!field.empty()) throw ParseError("stray quote inside unquoted field", line);
                in_quotes = true;
                field_started = true;
                break;
            case ',':
                end_field();
                field_started = true;
                break;
            case '\r':
                break;
            case '\n':
                ++line;
                end_record();
                break;
            default:
                field += c;
                field_started = true;
        }
    }
    if (in_quotes) throw ParseError("unterminated quoted field", record_line);
    end_record();
    return rows;
}

inline std::string quote(const std::string& field) {
    if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

inline void write_row(std::ostream& os, const Row& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) os << ',';
        os << quote(row[i]);
    }
    os << '\n';
}

}  // namespace gog::csv
