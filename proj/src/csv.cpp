#include "modeshift/csv.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "modeshift/errors.hpp"
#include "modeshift/model_core.hpp"

namespace modeshift {

std::string CsvTable::where(std::size_t row) const {
    return source + ":" + std::to_string(lines.at(row));
}

CsvTable parse_csv(std::string_view text, std::string source) {
    CsvTable table;
    table.source = std::move(source);
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    std::size_t line = 1;
    std::size_t record_line = 1;

    auto end_record = [&] {
        record.push_back(std::move(field));
        field.clear();
        field_started = false;
        // Skip blank lines.
        if (!(record.size() == 1 && record[0].empty())) {
            if (table.header.empty()) {
                table.header = std::move(record);
            } else {
                if (record.size() != table.header.size()) {
                    throw SchemaMismatch(table.source + ":" + std::to_string(record_line) +
                                         ": expected " + std::to_string(table.header.size()) +
                                         " fields, found " + std::to_string(record.size()));
                }
                table.rows.push_back(std::move(record));
                table.lines.push_back(record_line);
            }
        }
        record.clear();
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char ch = text[i];
        if (in_quotes) {
            if (ch == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                if (ch == '\n') ++line;
                field.push_back(ch);
            }
            continue;
        }
        switch (ch) {
            case '"':
                if (field_started) {
                    throw SchemaMismatch(table.source + ":" + std::to_string(line) +
                                         ": stray quote inside field");
                }
                in_quotes = true;
                field_started = true;
                break;
            case ',':
                record.push_back(std::move(field));
                field.clear();
                field_started = false;
                break;
            case '\r':
                break;
            case '\n':
                end_record();
                ++line;
                record_line = line;
                break;
            default:
                field.push_back(ch);
                field_started = true;
        }
    }
    if (in_quotes) throw SchemaMismatch(table.source + ": unterminated quoted field");
    if (field_started || !field.empty() || !record.empty()) end_record();
    if (table.header.empty()) throw SchemaMismatch(table.source + ": missing header row");
    return table;
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingFile("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_csv(ss.str(), path.filename().string());
}

void expect_header(const CsvTable& table, std::initializer_list<std::string_view> columns) {
    bool ok = table.header.size() == columns.size();
    std::string expected;
    std::size_t i = 0;
    for (std::string_view c : columns) {
        if (!expected.empty()) expected += ",";
        expected += c;
        if (ok && table.header[i] != c) ok = false;
        ++i;
    }
    if (!ok) throw SchemaMismatch(table.source + ":1: header must be '" + expected + "'");
}

double parse_number(std::string_view field, const std::string& where) {
    if (field == "inf" || field == "Inf" || field == "INF") return kInf;
    double value = 0.0;
    const char* first = field.data();
    const char* last = first + field.size();
    if (!field.empty() && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last || field.empty() || std::isnan(value)) {
        throw SchemaMismatch(where + ": '" + std::string(field) + "' is not a number");
    }
    return value;
}

std::string format_number(double value) {
    if (value == kInf) return "inf";
    if (value == 0.0) return "0";
    std::array<char, 64> buf{};
    const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    return std::string(buf.data(), ptr);
}

std::string csv_escape(std::string_view field) {
    if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw MissingFile("cannot write " + path.string());
    auto line = [&](const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) out << ',';
            out << csv_escape(fields[i]);
        }
        out << '\n';
    };
    line(header);
    for (const auto& r : rows) line(r);
    if (!out) throw Error("write failed: " + path.string());
}

}  // namespace modeshift
