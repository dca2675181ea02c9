#include "deepar/calendar.hpp"

#include <charconv>
#include <cstdio>

#include "deepar/error.hpp"

namespace deepar {

using namespace std::chrono;

Granularity parse_granularity(std::string_view code) {
  if (code == "H") return Granularity::Hourly;
  if (code == "D") return Granularity::Daily;
  if (code == "W") return Granularity::Weekly;
  if (code == "M") return Granularity::Monthly;
  throw DataError("unknown freq '" + std::string(code) + "' (expected H, D, W or M)");
}

std::string_view granularity_code(Granularity g) {
  switch (g) {
    case Granularity::Hourly: return "H";
    case Granularity::Daily: return "D";
    case Granularity::Weekly: return "W";
    case Granularity::Monthly: return "M";
  }
  return "?";
}

namespace {

int parse_int(std::string_view text, std::size_t pos, std::size_t len) {
  int value = 0;
  const char* first = text.data() + pos;
  const auto [ptr, ec] = std::from_chars(first, first + len, value);
  if (ec != std::errc{} || ptr != first + len) {
    throw DataError("malformed timestamp '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace

TimePoint parse_timestamp(std::string_view text) {
  if (text.size() != 10 && text.size() != 19) {
    throw DataError("malformed timestamp '" + std::string(text) + "'");
  }
  if (text[4] != '-' || text[7] != '-') {
    throw DataError("malformed timestamp '" + std::string(text) + "'");
  }
  const year_month_day date{year{parse_int(text, 0, 4)},
                            month{static_cast<unsigned>(parse_int(text, 5, 2))},
                            day{static_cast<unsigned>(parse_int(text, 8, 2))}};
  if (!date.ok()) {
    throw DataError("invalid date in timestamp '" + std::string(text) + "'");
  }
  int hh = 0, mm = 0, ss = 0;
  if (text.size() == 19) {
    if ((text[10] != 'T' && text[10] != ' ') || text[13] != ':' || text[16] != ':') {
      throw DataError("malformed timestamp '" + std::string(text) + "'");
    }
    hh = parse_int(text, 11, 2);
    mm = parse_int(text, 14, 2);
    ss = parse_int(text, 17, 2);
    if (hh > 23 || mm > 59 || ss > 59) {
      throw DataError("invalid time of day in timestamp '" + std::string(text) + "'");
    }
  }
  return sys_days{date} + hours{hh} + minutes{mm} + seconds{ss};
}

std::string format_timestamp(TimePoint t) {
  const auto day_start = floor<days>(t);
  const year_month_day date{day_start};
  const hh_mm_ss<seconds> tod{t - day_start};
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02ld:%02ld:%02ld", int(date.year()),
                unsigned(date.month()), unsigned(date.day()), long(tod.hours().count()),
                long(tod.minutes().count()), long(tod.seconds().count()));
  return buf;
}

TimePoint advance(TimePoint start, Granularity g, long index) {
  switch (g) {
    case Granularity::Hourly: return start + hours{index};
    case Granularity::Daily: return start + days{index};
    case Granularity::Weekly: return start + weeks{index};
    case Granularity::Monthly: {
      const auto day_start = floor<days>(start);
      const auto time_of_day = start - day_start;
      const year_month_day date{day_start};
      const year_month ym = year_month{date.year(), date.month()} + months{index};
      const day last = year_month_day_last{ym.year(), month_day_last{ym.month()}}.day();
      const year_month_day shifted{ym.year(), ym.month(), std::min(date.day(), last)};
      return sys_days{shifted} + time_of_day;
    }
  }
  return start;
}

long steps_between(TimePoint start, TimePoint t, Granularity g) {
  long index = 0;
  switch (g) {
    case Granularity::Hourly: index = duration_cast<hours>(t - start).count(); break;
    case Granularity::Daily: index = duration_cast<days>(t - start).count(); break;
    case Granularity::Weekly: index = duration_cast<weeks>(t - start).count(); break;
    case Granularity::Monthly: {
      const year_month_day a{floor<days>(start)};
      const year_month_day b{floor<days>(t)};
      index = (int(b.year()) - int(a.year())) * 12L +
              (static_cast<long>(unsigned(b.month())) - static_cast<long>(unsigned(a.month())));
      break;
    }
  }
  if (advance(start, g, index) != t) {
    throw DataError("timestamp " + format_timestamp(t) + " is not on the " +
                    std::string(granularity_code(g)) + " grid starting at " +
                    format_timestamp(start));
  }
  return index;
}

unsigned iso_week(year_month_day date) {
  const sys_days d{date};
  const unsigned wd = weekday{d}.iso_encoding();  // Monday = 1
  const sys_days thursday = d + days{4 - static_cast<int>(wd)};
  const year_month_day th{thursday};
  const sys_days jan1{th.year() / January / 1};
  return static_cast<unsigned>((thursday - jan1).count() / 7 + 1);
}

std::size_t calendar_feature_count(Granularity g) {
  return g == Granularity::Hourly ? 2 : 1;
}

void calendar_features(TimePoint t, Granularity g, std::span<double> out) {
  const auto day_start = floor<days>(t);
  const year_month_day date{day_start};
  const double day_of_week = static_cast<double>(weekday{day_start}.iso_encoding() - 1);
  switch (g) {
    case Granularity::Hourly:
      out[0] = static_cast<double>(duration_cast<hours>(t - day_start).count());
      out[1] = day_of_week;
      break;
    case Granularity::Daily: out[0] = day_of_week; break;
    case Granularity::Weekly: out[0] = static_cast<double>(iso_week(date)); break;
    case Granularity::Monthly: out[0] = static_cast<double>(unsigned(date.month())); break;
  }
}

}  // namespace deepar
