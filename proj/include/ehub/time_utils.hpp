#pragma once

#include <cstdint>
#include <string>

namespace ehub {

// Hours since 1970-01-01T00:00:00Z. All series in this codebase are hourly
// and indexed by this integer clock.
using HourIndex = std::int64_t;

enum class Season : int { Winter = 0, Spring = 1, Summer = 2, Autumn = 3 };

struct CivilTime {
  int year;
  int month;   // 1..12
  int day;     // 1..31
  int hour;    // 0..23
  int weekday; // 0 = Monday .. 6 = Sunday
};

CivilTime civil_from_hour(HourIndex h);
HourIndex hour_from_civil(int year, int month, int day, int hour);

// "YYYY-MM-DDTHH:00:00" (a space instead of 'T' is accepted on parse).
std::string format_hour(HourIndex h);
HourIndex parse_hour(const std::string& text);

// Month -> meteorological season: DJF, MAM, JJA, SON.
Season season_of_month(int month);
Season season_of_hour(HourIndex h);
const char* season_name(Season s);
Season season_from_name(const std::string& name);

// Saturday/Sunday count as holidays. An optional holiday calendar is
// handled one level up, in the feature encoder.
bool is_workday(HourIndex h);

} // namespace ehub
