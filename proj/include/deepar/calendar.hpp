#pragma once

#include <chrono>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>

namespace deepar {

enum class Granularity { Hourly, Daily, Weekly, Monthly };

using TimePoint = std::chrono::sys_seconds;

// "H", "D", "W", "M"
Granularity parse_granularity(std::string_view code);
std::string_view granularity_code(Granularity g);

// Accepts YYYY-MM-DD, YYYY-MM-DDTHH:MM:SS and YYYY-MM-DD HH:MM:SS.
TimePoint parse_timestamp(std::string_view text);
std::string format_timestamp(TimePoint t);

// Time of step `index` of a series starting at `start` (index may be negative).
// Monthly steps keep the day of month, clamped to the month's last day.
TimePoint advance(TimePoint start, Granularity g, long index);

// Inverse of advance; throws DataError when `t` is not on the step grid.
long steps_between(TimePoint start, TimePoint t, Granularity g);

unsigned iso_week(std::chrono::year_month_day date);

// Number of calendar covariates for a granularity:
// hourly: hour-of-day, day-of-week; daily: day-of-week;
// weekly: week-of-year; monthly: month-of-year.
std::size_t calendar_feature_count(Granularity g);
void calendar_features(TimePoint t, Granularity g, std::span<double> out);

}  // namespace deepar
