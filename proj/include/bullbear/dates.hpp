#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

#include "bullbear/errors.hpp"

namespace bullbear {

// Calendar date backed by std::chrono::sys_days. All I/O uses ISO-8601
// (YYYY-MM-DD); arithmetic is in whole days.
class Date {
 public:
  Date() = default;
  explicit Date(std::chrono::sys_days d) : days_(d) {}

  Date(int year, unsigned month, unsigned day)
      : days_(std::chrono::sys_days{std::chrono::year{year} /
                                    std::chrono::month{month} /
                                    std::chrono::day{day}}) {
    std::chrono::year_month_day ymd{days_};
    if (!ymd.ok()) throw DataError("invalid calendar date");
  }

  static Date parse(std::string_view iso) {
    int y = 0;
    unsigned m = 0, d = 0;
    if (std::sscanf(std::string(iso).c_str(), "%d-%u-%u", &y, &m, &d) != 3)
      throw DataError("unparseable date '" + std::string(iso) +
                      "' (expected YYYY-MM-DD)");
    return Date(y, m, d);
  }

  std::string to_string() const {
    std::chrono::year_month_day ymd{days_};
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", int(ymd.year()),
                  unsigned(ymd.month()), unsigned(ymd.day()));
    return buf;
  }

  std::chrono::sys_days sys() const { return days_; }
  std::chrono::weekday weekday() const { return std::chrono::weekday{days_}; }

  std::int64_t days_since_epoch() const {
    return days_.time_since_epoch().count();
  }

  Date plus_days(int n) const {
    return Date(days_ + std::chrono::days{n});
  }

  // Monday of the ISO week containing this date; used to bucket daily bars
  // into calendar weeks.
  Date week_monday() const {
    auto wd = std::chrono::weekday{days_};
    auto shift = (wd - std::chrono::Monday).count();
    return Date(days_ - std::chrono::days{shift});
  }

  friend auto operator<=>(const Date&, const Date&) = default;

 private:
  std::chrono::sys_days days_{};
};

inline std::int64_t days_between(Date from, Date to) {
  return to.days_since_epoch() - from.days_since_epoch();
}

}  // namespace bullbear
