#include "esdc/calendar.hpp"

#include <cstdio>

#include "esdc/error.hpp"

namespace esdc {

bool is_leap_year(int year) {
    return year % 4 == 0 && (year % 100 != 0 || year % 400 == 0);
}

std::int64_t days_from_civil(const CivilDate& d) {
    // Howard Hinnant's civil-days algorithm.
    std::int64_t y = d.year;
    const unsigned m = d.month;
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d.day - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

CivilDate civil_from_days(std::int64_t days) {
    days += 719468;
    const std::int64_t era = (days >= 0 ? days : days - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(days - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned day = doy - (153 * mp + 2) / 5 + 1;
    const unsigned month = mp + (mp < 10 ? 3 : -9);
    return {static_cast<int>(y + (month <= 2)), month, day};
}

int day_of_year_366(std::int64_t days) {
    const CivilDate d = civil_from_days(days);
    const std::int64_t jan1 = days_from_civil({d.year, 1, 1});
    int doy = static_cast<int>(days - jan1) + 1;
    if (!is_leap_year(d.year) && doy >= 60) ++doy;  // skip the Feb-29 slot
    return doy;
}

std::int64_t parse_iso_date(const std::string& text) {
    int y = 0, m = 0, d = 0;
    char tail = '\0';
    if (std::sscanf(text.c_str(), "%d-%d-%d%c", &y, &m, &d, &tail) != 3 || m < 1 || m > 12 ||
        d < 1 || d > 31) {
        throw Error(ErrorCode::MalformedRecord, "expected ISO date YYYY-MM-DD, got '" + text + "'");
    }
    return days_from_civil({y, static_cast<unsigned>(m), static_cast<unsigned>(d)});
}

std::string format_iso_date(std::int64_t days) {
    const CivilDate d = civil_from_days(days);
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", d.year, d.month, d.day);
    return buf;
}

}  // namespace esdc
