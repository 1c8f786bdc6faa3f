#include "snowode/time.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>

#include "snowode/error.hpp"

namespace snowode {

namespace chr = std::chrono;

std::int64_t floor_div(std::int64_t a, std::int64_t b)
{
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0)))
        --q;
    return q;
}

std::int64_t to_seconds(const CivilTime &c)
{
    const chr::year_month_day ymd{chr::year{c.year}, chr::month{c.month}, chr::day{c.day}};
    if (!ymd.ok())
        throw DataError("invalid calendar date");
    const auto days = chr::sys_days{ymd}.time_since_epoch().count();
    return static_cast<std::int64_t>(days) * seconds_per_day + c.hour * seconds_per_hour + c.minute * 60 + c.second;
}

CivilTime to_civil(std::int64_t seconds)
{
    const std::int64_t days = floor_div(seconds, seconds_per_day);
    const std::int64_t rem = seconds - days * seconds_per_day;
    const chr::year_month_day ymd{chr::sys_days{chr::days{days}}};
    CivilTime c;
    c.year = static_cast<int>(ymd.year());
    c.month = static_cast<unsigned>(ymd.month());
    c.day = static_cast<unsigned>(ymd.day());
    c.hour = static_cast<int>(rem / seconds_per_hour);
    c.minute = static_cast<int>((rem % seconds_per_hour) / 60);
    c.second = static_cast<int>(rem % 60);
    return c;
}

namespace {

int read_int(std::string_view text, std::size_t pos, std::size_t len)
{
    if (pos + len > text.size())
        throw DataError("truncated timestamp '" + std::string(text) + "'");
    int v = 0;
    const char *b = text.data() + pos;
    const auto [ptr, ec] = std::from_chars(b, b + len, v);
    if (ec != std::errc{} || ptr != b + len)
        throw DataError("malformed timestamp '" + std::string(text) + "'");
    return v;
}

void expect(std::string_view text, std::size_t pos, char c)
{
    if (pos >= text.size() || text[pos] != c)
        throw DataError("malformed timestamp '" + std::string(text) + "'");
}

} // namespace

std::int64_t parse_timestamp(std::string_view text)
{
    CivilTime c;
    c.year = read_int(text, 0, 4);
    expect(text, 4, '-');
    const int month = read_int(text, 5, 2);
    expect(text, 7, '-');
    const int day = read_int(text, 8, 2);
    if (month < 1 || month > 12 || day < 1 || day > 31)
        throw DataError("invalid date in '" + std::string(text) + "'");
    c.month = static_cast<unsigned>(month);
    c.day = static_cast<unsigned>(day);
    if (text.size() > 10) {
        if (text[10] != ' ' && text[10] != 'T')
            throw DataError("malformed timestamp '" + std::string(text) + "'");
        c.hour = read_int(text, 11, 2);
        expect(text, 13, ':');
        c.minute = read_int(text, 14, 2);
        if (text.size() > 16) {
            expect(text, 16, ':');
            c.second = read_int(text, 17, 2);
            if (text.size() != 19)
                throw DataError("malformed timestamp '" + std::string(text) + "'");
        }
        if (c.hour > 23 || c.minute > 59 || c.second > 59)
            throw DataError("invalid time of day in '" + std::string(text) + "'");
    }
    return to_seconds(c);
}

std::string format_date(std::int64_t seconds)
{
    const CivilTime c = to_civil(seconds);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", c.year, c.month, c.day);
    return buf;
}

std::string format_timestamp(std::int64_t seconds)
{
    const CivilTime c = to_civil(seconds);
    if (c.hour == 0 && c.minute == 0 && c.second == 0)
        return format_date(seconds);
    char buf[40];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u %02d:%02d:%02d", c.year, c.month, c.day, c.hour, c.minute,
                  c.second);
    return buf;
}

int day_of_year(std::int64_t seconds)
{
    const CivilTime c = to_civil(seconds);
    const std::int64_t jan1 = to_seconds(CivilTime{c.year, 1, 1, 0, 0, 0});
    return static_cast<int>(floor_div(seconds - jan1, seconds_per_day));
}

} // namespace snowode
