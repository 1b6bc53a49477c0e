#pragma once

#include <chrono>
#include <string>
#include <string_view>

#include "loadfc/types.hpp"

namespace loadfc {

struct CivilHour {
    int year = 1970;
    unsigned month = 1;  // 1..12
    unsigned day = 1;    // 1..31
    unsigned hour = 0;   // 0..23
    unsigned weekday = 3;  // Monday = 0 .. Sunday = 6
};

inline Timestamp floor_to_hour(Timestamp t) {
    Timestamp r = t % kSecondsPerHour;
    if (r < 0) r += kSecondsPerHour;
    return t - r;
}

inline CivilHour civil_hour(Timestamp t) {
    using namespace std::chrono;
    const sys_seconds tp{seconds{t}};
    const sys_days day = floor<days>(tp);
    const year_month_day ymd{day};
    const auto since_midnight = duration_cast<hours>(tp - day);
    CivilHour out;
    out.year = static_cast<int>(ymd.year());
    out.month = static_cast<unsigned>(ymd.month());
    out.day = static_cast<unsigned>(ymd.day());
    out.hour = static_cast<unsigned>(since_midnight.count());
    out.weekday = weekday{day}.iso_encoding() - 1;
    return out;
}

inline Timestamp make_timestamp(int y, unsigned mo, unsigned d, unsigned h = 0) {
    using namespace std::chrono;
    const sys_days day{year{y} / month{mo} / std::chrono::day{d}};
    return day.time_since_epoch().count() * 86400LL + static_cast<Timestamp>(h) * kSecondsPerHour;
}

/// "YYYY-MM-DDTHH:00:00Z"
std::string format_iso_hour(Timestamp t);

/// Accepts "YYYY-MM-DDTHH:MM:SS" with optional trailing 'Z'; throws std::invalid_argument.
Timestamp parse_iso_hour(std::string_view text);

}  // namespace loadfc
