#include "ehub/time_utils.hpp"

#include <chrono>
#include <cstdio>
#include <stdexcept>

namespace ehub {

namespace {
constexpr std::int64_t kHoursPerDay = 24;

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}
} // namespace

CivilTime civil_from_hour(HourIndex h) {
  using namespace std::chrono;
  const std::int64_t days = floor_div(h, kHoursPerDay);
  const int hour = static_cast<int>(h - days * kHoursPerDay);
  const sys_days sd{std::chrono::days{days}};
  const year_month_day ymd{sd};
  const weekday wd{sd};
  CivilTime c;
  c.year = static_cast<int>(ymd.year());
  c.month = static_cast<int>(static_cast<unsigned>(ymd.month()));
  c.day = static_cast<int>(static_cast<unsigned>(ymd.day()));
  c.hour = hour;
  c.weekday = static_cast<int>(wd.iso_encoding()) - 1; // ISO: Mon=1..Sun=7
  return c;
}

HourIndex hour_from_civil(int year, int month, int day, int hour) {
  using namespace std::chrono;
  const year_month_day ymd{std::chrono::year{year}, std::chrono::month{static_cast<unsigned>(month)},
                           std::chrono::day{static_cast<unsigned>(day)}};
  if (!ymd.ok()) throw std::invalid_argument("invalid civil date");
  const sys_days sd{ymd};
  return static_cast<HourIndex>(sd.time_since_epoch().count()) * kHoursPerDay + hour;
}

std::string format_hour(HourIndex h) {
  const CivilTime c = civil_from_hour(h);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:00:00", c.year, c.month, c.day, c.hour);
  return buf;
}

HourIndex parse_hour(const std::string& text) {
  int y = 0, mo = 0, d = 0, hh = 0, mi = 0, ss = 0;
  char sep = 0;
  int n = std::sscanf(text.c_str(), "%d-%d-%d%c%d:%d:%d", &y, &mo, &d, &sep, &hh, &mi, &ss);
  if (n < 5 || (sep != 'T' && sep != ' '))
    throw std::invalid_argument("cannot parse timestamp '" + text + "' (expected YYYY-MM-DDTHH:MM:SS)");
  if (mi != 0 || ss != 0)
    throw std::invalid_argument("timestamp '" + text + "' is not on an hour boundary");
  return hour_from_civil(y, mo, d, hh);
}

Season season_of_month(int month) {
  switch (month) {
    case 12: case 1: case 2: return Season::Winter;
    case 3: case 4: case 5: return Season::Spring;
    case 6: case 7: case 8: return Season::Summer;
    case 9: case 10: case 11: return Season::Autumn;
    default: throw std::invalid_argument("month out of range");
  }
}

Season season_of_hour(HourIndex h) { return season_of_month(civil_from_hour(h).month); }

const char* season_name(Season s) {
  switch (s) {
    case Season::Winter: return "winter";
    case Season::Spring: return "spring";
    case Season::Summer: return "summer";
    case Season::Autumn: return "autumn";
  }
  return "?";
}

Season season_from_name(const std::string& name) {
  for (int i = 0; i < 4; ++i)
    if (name == season_name(static_cast<Season>(i))) return static_cast<Season>(i);
  throw std::invalid_argument("unknown season '" + name + "'");
}

bool is_workday(HourIndex h) {
  const CivilTime c = civil_from_hour(h);
  return c.weekday < 5;
}

} // namespace ehub
