#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace snowode {

inline constexpr std::int64_t seconds_per_hour = 3600;
inline constexpr std::int64_t seconds_per_day = 86400;

struct CivilTime
{
    int year = 1970;
    unsigned month = 1; // 1-12
    unsigned day = 1;   // 1-31
    int hour = 0;
    int minute = 0;
    int second = 0;
};

/// Seconds since 1970-01-01 00:00 for a naive (station-local) timestamp.
std::int64_t to_seconds(const CivilTime &c);
CivilTime to_civil(std::int64_t seconds);

/// Accepts "YYYY-MM-DD", "YYYY-MM-DD HH:MM[:SS]" and "YYYY-MM-DDTHH:MM[:SS]".
std::int64_t parse_timestamp(std::string_view text);

/// Date only when the time is midnight, otherwise "YYYY-MM-DD HH:MM:SS".
std::string format_timestamp(std::int64_t seconds);
std::string format_date(std::int64_t seconds);

/// 0-based day of the calendar year.
int day_of_year(std::int64_t seconds);

/// Floor division that works for times before 1970.
std::int64_t floor_div(std::int64_t a, std::int64_t b);

} // namespace snowode
