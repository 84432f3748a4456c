#pragma once

// Minimal RFC 4180 CSV support: quoted fields, embedded commas/quotes/newlines,
// CRLF and LF line endings. One header row is assumed by the callers.

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "biasaudit/common.hpp"

namespace biasaudit {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column_index(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw ValidationError("missing column: " + name);
    }
    bool has_column(const std::string& name) const {
        for (const auto& h : header)
            if (h == name) return true;
        return false;
    }
};

inline CsvTable parse_csv(std::istream& in) {
    CsvTable table;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    bool record_started = false;
    bool seen_header = false;

    auto end_field = [&] {
        record.push_back(field);
        field.clear();
    };
    auto end_record = [&] {
        end_field();
        if (!seen_header) {
            table.header = record;
            seen_header = true;
        } else {
            table.rows.push_back(record);
        }
        record.clear();
        record_started = false;
    };

    char c;
    while (in.get(c)) {
        if (in_quotes) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get(c);
                    field.push_back('"');
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"') {
            in_quotes = true;
            record_started = true;
        } else if (c == ',') {
            end_field();
            record_started = true;
        } else if (c == '\r') {
            // swallow; the following '\n' (if any) ends the record
        } else if (c == '\n') {
            if (record_started || !field.empty() || !record.empty()) end_record();
        } else {
            field.push_back(c);
            record_started = true;
        }
    }
    if (in_quotes) throw ValidationError("csv: unterminated quoted field");
    if (record_started || !field.empty() || !record.empty()) end_record();
    if (!seen_header) throw ValidationError("csv: empty input");
    return table;
}

inline CsvTable read_csv_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open file: " + path);
    return parse_csv(in);
}

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += "\"";
    return out;
}

inline void write_csv_row(std::ostream& out, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out << ',';
        out << csv_escape(fields[i]);
    }
    out << '\n';
}

}  // namespace biasaudit
