#pragma once

#include <cstdint>
#include <string>

namespace esdc {

/// Proleptic Gregorian calendar helpers. Time coordinates throughout the
/// library are integer day offsets from 1970-01-01 (UTC); sub-daily
/// resolution is not represented.
struct CivilDate {
    int year;
    unsigned month;  // 1..12
    unsigned day;    // 1..31
};

bool is_leap_year(int year);

/// Days since 1970-01-01 for a civil date (negative before the epoch).
std::int64_t days_from_civil(const CivilDate& d);

CivilDate civil_from_days(std::int64_t days);

/// Day-of-year slot on the fixed 366-day grid: Feb 29 is slot 60 and
/// non-leap dates from Mar 1 onward are shifted by one so that every
/// calendar date owns a stable slot in 1..366.
int day_of_year_366(std::int64_t days);

/// Parses "YYYY-MM-DD" (an ISO-8601 date). Throws MalformedRecord on bad input.
std::int64_t parse_iso_date(const std::string& text);

std::string format_iso_date(std::int64_t days);

}  // namespace esdc
