#pragma once

// Minimal RFC 4180 style CSV reading and writing plus the number format used by
// every data file: shortest round-trip decimal, "inf" for +infinity.

#include <filesystem>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

namespace modeshift {

struct CsvTable {
    std::string source;  // file name used in error messages
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> lines;  // 1-based source line of each row

    /// "file:line" for row i.
    std::string where(std::size_t row) const;
};

/// Throws SchemaMismatch on unbalanced quotes or ragged rows.
CsvTable parse_csv(std::string_view text, std::string source);

/// Throws MissingFile when the file cannot be opened.
CsvTable read_csv(const std::filesystem::path& path);

/// Throws SchemaMismatch unless the header matches exactly.
void expect_header(const CsvTable& table, std::initializer_list<std::string_view> columns);

/// Parses a decimal number or "inf". Throws SchemaMismatch naming `where`.
double parse_number(std::string_view field, const std::string& where);

/// Shortest representation that round-trips; "inf" for +infinity.
std::string format_number(double value);

/// Quotes the field when it contains a comma, quote or newline.
std::string csv_escape(std::string_view field);

/// Writes a header and rows, "\n" line endings.
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

}  // namespace modeshift
