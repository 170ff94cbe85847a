#include "harvestkit/time.hpp"

#include <cstdio>

namespace harvestkit {

std::string format_datestamp(Instant t) {
    using namespace std::chrono;
    const auto day = floor<std::chrono::days>(t);
    const year_month_day ymd{day};
    const hh_mm_ss hms{t - day};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                  static_cast<int>(hms.seconds().count()));
    return buf;
}

std::string format_day(Instant t) { return format_datestamp(t).substr(0, 10); }

Instant make_instant(int year, unsigned month, unsigned day, unsigned hour, unsigned minute, unsigned second) {
    using namespace std::chrono;
    const sys_days d{std::chrono::year{year} / std::chrono::month{month} / std::chrono::day{day}};
    return Instant{d} + Seconds{hour * 3600LL + minute * 60LL + second};
}

}  // namespace harvestkit
