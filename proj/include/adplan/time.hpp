#pragma once

#include <chrono>
#include <cstdio>
#include <string>
#include <string_view>

#include "adplan/error.hpp"

namespace adplan {

using Timestamp = std::chrono::sys_seconds;
using Seconds = std::chrono::seconds;

inline double hours_between(Timestamp from, Timestamp to) {
  return std::chrono::duration<double, std::ratio<3600>>(to - from).count();
}

inline Seconds hours(double h) {
  return Seconds(static_cast<long long>(h * 3600.0 + (h >= 0 ? 0.5 : -0.5)));
}

// Accepts "YYYY-MM-DD", "YYYY-MM-DDTHH:MM", "YYYY-MM-DDTHH:MM:SS", optionally
// followed by 'Z'. Everything is UTC.
inline Timestamp parse_iso8601(std::string_view text) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
  std::string buf(text);
  if (!buf.empty() && (buf.back() == 'Z' || buf.back() == 'z')) buf.pop_back();
  int consumed = 0;
  int n = std::sscanf(buf.c_str(), "%4d-%2d-%2d%n", &y, &mo, &d, &consumed);
  if (n != 3) throw error("invalid ISO-8601 timestamp: '" + std::string(text) + "'");
  if (static_cast<std::size_t>(consumed) < buf.size()) {
    char sep = buf[consumed];
    if (sep != 'T' && sep != ' ') throw error("invalid ISO-8601 timestamp: '" + std::string(text) + "'");
    int rest = 0;
    const char* tail = buf.c_str() + consumed + 1;
    n = std::sscanf(tail, "%2d:%2d:%2d%n", &h, &mi, &s, &rest);
    if (n < 3) {
      s = 0;
      n = std::sscanf(tail, "%2d:%2d%n", &h, &mi, &rest);
      if (n != 2) throw error("invalid ISO-8601 timestamp: '" + std::string(text) + "'");
    }
    if (static_cast<std::size_t>(consumed + 1 + rest) != buf.size())
      throw error("invalid ISO-8601 timestamp: '" + std::string(text) + "'");
  }
  using namespace std::chrono;
  year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h < 0 || h > 23 || mi < 0 || mi > 59 || s < 0 || s > 60)
    throw error("invalid ISO-8601 timestamp: '" + std::string(text) + "'");
  return sys_days{ymd} + std::chrono::hours{h} + minutes{mi} + seconds{s};
}

inline std::string format_iso8601(Timestamp t) {
  using namespace std::chrono;
  auto day_point = floor<days>(t);
  year_month_day ymd{day_point};
  hh_mm_ss<seconds> tod{t - day_point};
  char out[64];
  std::snprintf(out, sizeof out, "%04d-%02u-%02uT%02ld:%02ld:%02ldZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<long>(tod.hours().count()), static_cast<long>(tod.minutes().count()),
                static_cast<long>(tod.seconds().count()));
  return out;
}

}  // namespace adplan
