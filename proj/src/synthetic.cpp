#include "loadfc/synthetic.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>
#include <stdexcept>

#include "csv_util.hpp"

namespace loadfc {

namespace {

double bump(double hour, double centre, double width) {
    const double z = (hour - centre) / width;
    return std::exp(-0.5 * z * z);
}

std::string time_cell(Timestamp t) {
    using namespace std::chrono;
    const sys_seconds tp{seconds{t}};
    const auto day = floor<days>(tp);
    const year_month_day ymd{day};
    const hh_mm_ss hms{tp - day};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u %02d:%02d:%02d", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                  static_cast<int>(hms.seconds().count()));
    return buf;
}

}  // namespace

double regime_profile(const RegimeSwitchingConfig& c, unsigned day_of_week, double hour_of_day) {
    if (day_of_week >= 5) return c.weekend_load;
    return c.base_load + c.morning_peak * bump(hour_of_day, 7.5, 1.0) + c.evening_peak * bump(hour_of_day, 19.0, 1.5);
}

RawSeries regime_switching_raw(const RegimeSwitchingConfig& c) {
    if (c.days == 0 || c.readings_per_hour == 0) throw std::invalid_argument("synthetic series needs days and readings");
    if (floor_to_hour(c.start) != c.start) throw std::invalid_argument("synthetic start must be on an hour");

    std::mt19937_64 rng(c.seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);

    std::vector<double> shares;
    double total = 0.0;
    for (std::size_t k = 0; k < c.appliances; ++k) {
        shares.push_back(0.8 / std::pow(1.6, static_cast<double>(k + 1)));
        total += shares.back();
    }

    CsvSchema schema;
    schema.appliance_columns.resize(c.appliances);
    for (std::size_t k = 0; k < c.appliances; ++k) schema.appliance_columns[k] = "Appliance" + std::to_string(k + 1);

    RawSeries raw;
    raw.channel_names = schema.channel_names();
    raw.channels.resize(1 + c.appliances);
    const Timestamp step = kSecondsPerHour / static_cast<Timestamp>(c.readings_per_hour);
    for (std::size_t day = 0; day < c.days; ++day) {
        const double amplitude = 1.0 + c.amplitude_jitter * unit(rng);
        const bool outage = c.gap_days > 0 && day >= c.gap_start_day && day < c.gap_start_day + c.gap_days;
        for (std::size_t r = 0; r < 24 * c.readings_per_hour; ++r) {
            const Timestamp t = c.start + static_cast<Timestamp>(day) * 24 * kSecondsPerHour +
                                static_cast<Timestamp>(r) * step;
            const double eps = noise(rng);
            if (outage) continue;
            const CivilHour ch = civil_hour(t);
            const double hour = static_cast<double>(t % 86400) / 3600.0;
            double expected = regime_profile(c, ch.weekday, hour);
            if (ch.weekday < 5) expected = c.base_load + amplitude * (expected - c.base_load);
            const double sd = ch.weekday >= 5 ? std::min(c.noise_sd, 0.25 * c.weekend_load) : c.noise_sd;
            const double agg = std::round(std::max(0.0, expected + sd * eps));
            raw.timestamps.push_back(t);
            raw.channels[0].push_back(agg);
            for (std::size_t k = 0; k < c.appliances; ++k) {
                raw.channels[k + 1].push_back(std::round(agg * shares[k] / total * 0.8));
            }
        }
    }
    return raw;
}

HourlySeries regime_switching_hourly(const RegimeSwitchingConfig& config) {
    return resample_hourly(regime_switching_raw(config));
}

HourlySeries calendar_signal_series(Timestamp start, std::size_t hours,
                                    const std::function<double(unsigned, unsigned)>& f) {
    if (floor_to_hour(start) != start) throw std::invalid_argument("start must be on an hour");
    Channel values(hours);
    for (std::size_t i = 0; i < hours; ++i) {
        const CivilHour ch = civil_hour(start + static_cast<Timestamp>(i) * kSecondsPerHour);
        values[i] = f(ch.weekday, ch.hour);
    }
    return HourlySeries(start, {"Aggregate"}, {std::move(values)});
}

void write_meter_csv(const std::filesystem::path& path, const RawSeries& raw, const CsvSchema& schema) {
    const auto names = schema.channel_names();
    if (names.size() != raw.channels.size()) throw std::invalid_argument("schema does not match series channels");
    std::ostringstream out;
    out << "Time," << schema.timestamp_column;
    for (const auto& n : names) out << ',' << n;
    out << '\n';
    for (std::size_t i = 0; i < raw.size(); ++i) {
        out << time_cell(raw.timestamps[i]) << ',' << raw.timestamps[i];
        for (const auto& ch : raw.channels) {
            out << ',';
            if (std::isfinite(ch[i])) out << format_double(ch[i]);
        }
        out << '\n';
    }
    detail::write_text_file(path, out.str());
}

}  // namespace loadfc
