#pragma once

// ISO-8601 week calendar arithmetic for weekly surveillance series.

#include <compare>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace epicast {

/// A calendar week in the ISO-8601 week date system (week 1..52/53).
struct CalendarWeek {
    int year = 0;
    int week = 0;

    friend auto operator<=>(const CalendarWeek&, const CalendarWeek&) = default;
};

namespace detail {

// Days since 1970-01-01 for a civil date (proleptic Gregorian).
inline long days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const long era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2u) / 5u + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<long>(doe) - 719468;
}

// 0 = Monday ... 6 = Sunday.
inline int weekday_mon0(long days_since_epoch) {
    long w = (days_since_epoch + 3) % 7;  // 1970-01-01 was a Thursday
    if (w < 0) w += 7;
    return static_cast<int>(w);
}

}  // namespace detail

/// Number of ISO weeks (52 or 53) in the given ISO year.
inline int iso_weeks_in_year(int year) {
    const int jan1 = detail::weekday_mon0(detail::days_from_civil(year, 1, 1));
    const bool leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
    return (jan1 == 3 || (leap && jan1 == 2)) ? 53 : 52;
}

inline bool valid_week(const CalendarWeek& w) {
    return w.week >= 1 && w.week <= iso_weeks_in_year(w.year);
}

inline CalendarWeek next_week(CalendarWeek w) {
    if (!valid_week(w)) throw std::invalid_argument("next_week: invalid calendar week");
    if (w.week < iso_weeks_in_year(w.year)) return {w.year, w.week + 1};
    return {w.year + 1, 1};
}

inline CalendarWeek prev_week(CalendarWeek w) {
    if (!valid_week(w)) throw std::invalid_argument("prev_week: invalid calendar week");
    if (w.week > 1) return {w.year, w.week - 1};
    return {w.year - 1, iso_weeks_in_year(w.year - 1)};
}

inline CalendarWeek advance_weeks(CalendarWeek w, int n) {
    for (; n > 0; --n) w = next_week(w);
    for (; n < 0; ++n) w = prev_week(w);
    return w;
}

inline std::string to_string(const CalendarWeek& w) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-W%02d", w.year, w.week);
    return buf;
}

/// Parses "YYYY-Www" or "YYYY-ww".
inline CalendarWeek parse_week(const std::string& s) {
    int year = 0, week = 0;
    if (std::sscanf(s.c_str(), "%d-W%d", &year, &week) != 2 &&
        std::sscanf(s.c_str(), "%d-%d", &year, &week) != 2) {
        throw std::invalid_argument("parse_week: expected YYYY-Www, got '" + s + "'");
    }
    CalendarWeek w{year, week};
    if (!valid_week(w)) throw std::invalid_argument("parse_week: invalid week '" + s + "'");
    return w;
}

/// Season label "YYYY/YY+1" for a week given the first week of the season
/// (weeks before `season_start_week` belong to the season of the prior year).
inline std::string season_label(const CalendarWeek& w, int season_start_week) {
    const int start_year = (w.week >= season_start_week) ? w.year : w.year - 1;
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d/%02d", start_year, (start_year + 1) % 100);
    return buf;
}

}  // namespace epicast
