#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace snowode {

/// A CSV file with optional leading "# key: value" metadata lines.
/// Quoted fields may contain commas and doubled quotes but not newlines.
struct CsvDocument
{
    std::vector<std::pair<std::string, std::string>> metadata;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers; // 1-based source line of each row

    /// Column index, or -1.
    int column(std::string_view name) const;
    /// Column index; throws DataError when absent.
    std::size_t require(std::string_view name) const;
    std::optional<std::string> meta(std::string_view key) const;
};

std::vector<std::string> split_csv_line(std::string_view line);
CsvDocument read_csv(std::istream &in);
CsvDocument read_csv_file(const std::string &path);

/// Shortest decimal that round-trips.
std::string format_double(double v);
std::string format_optional(const std::optional<double> &v);

/// Empty (after trimming) means missing; anything unparseable throws DataError.
std::optional<double> parse_optional_double(std::string_view text);
double parse_double(std::string_view text);

std::string quote_csv_field(std::string_view field);
void write_metadata(std::ostream &out, const std::vector<std::pair<std::string, std::string>> &meta);
void write_row(std::ostream &out, const std::vector<std::string> &fields);

} // namespace snowode
