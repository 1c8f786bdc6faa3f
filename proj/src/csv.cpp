#include "snowode/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "snowode/error.hpp"

namespace snowode {

namespace {

std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

} // namespace

int CsvDocument::column(std::string_view name) const
{
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name)
            return static_cast<int>(i);
    return -1;
}

std::size_t CsvDocument::require(std::string_view name) const
{
    const int c = column(name);
    if (c < 0)
        throw DataError("missing CSV column '" + std::string(name) + "'");
    return static_cast<std::size_t>(c);
}

std::optional<std::string> CsvDocument::meta(std::string_view key) const
{
    for (const auto &[k, v] : metadata)
        if (k == key)
            return v;
    return std::nullopt;
}

std::vector<std::string> split_csv_line(std::string_view line)
{
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    bool was_quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
            was_quoted = true;
        } else if (c == ',') {
            out.push_back(was_quoted ? field : std::string(trim(field)));
            field.clear();
            was_quoted = false;
        } else {
            field.push_back(c);
        }
    }
    if (quoted)
        throw DataError("unterminated quote in CSV line");
    out.push_back(was_quoted ? field : std::string(trim(field)));
    return out;
}

CsvDocument read_csv(std::istream &in)
{
    CsvDocument doc;
    std::string line;
    std::size_t number = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++number;
        const std::string_view view = trim(line);
        if (view.empty())
            continue;
        if (view.front() == '#') {
            if (have_header)
                continue;
            std::string_view body = trim(view.substr(1));
            const auto colon = body.find(':');
            if (colon != std::string_view::npos)
                doc.metadata.emplace_back(std::string(trim(body.substr(0, colon))),
                                          std::string(trim(body.substr(colon + 1))));
            continue;
        }
        if (!have_header) {
            doc.header = split_csv_line(view);
            have_header = true;
            continue;
        }
        doc.rows.push_back(split_csv_line(line));
        doc.line_numbers.push_back(number);
    }
    if (!have_header)
        throw DataError("CSV input has no header row");
    return doc;
}

CsvDocument read_csv_file(const std::string &path)
{
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open '" + path + "'");
    return read_csv(in);
}

std::string format_double(double v)
{
    if (std::isnan(v))
        return "nan";
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc{})
        throw Error("number formatting failed");
    return std::string(buf, ptr);
}

std::string format_optional(const std::optional<double> &v)
{
    return v ? format_double(*v) : std::string();
}

std::optional<double> parse_optional_double(std::string_view text)
{
    text = trim(text);
    if (text.empty())
        return std::nullopt;
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size())
        throw DataError("not a number: '" + std::string(text) + "'");
    return v;
}

double parse_double(std::string_view text)
{
    const auto v = parse_optional_double(text);
    if (!v)
        throw DataError("missing numeric value");
    return *v;
}

std::string quote_csv_field(std::string_view field)
{
    if (field.find_first_of(",\"\n") == std::string_view::npos)
        return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"')
            out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

void write_metadata(std::ostream &out, const std::vector<std::pair<std::string, std::string>> &meta)
{
    for (const auto &[k, v] : meta)
        out << "# " << k << ": " << v << '\n';
}

void write_row(std::ostream &out, const std::vector<std::string> &fields)
{
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i)
            out << ',';
        out << quote_csv_field(fields[i]);
    }
    out << '\n';
}

} // namespace snowode
