#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "loadfc/calendar.hpp"
#include "loadfc/series.hpp"

namespace loadfc {

/// Household-like load with two regimes: weekdays carry a morning and an evening peak,
/// weekends sit near zero. Appliance channels split the aggregate with fixed shares.
struct RegimeSwitchingConfig {
    Timestamp start = make_timestamp(2014, 1, 6);  // a Monday
    std::size_t days = 182;
    std::size_t readings_per_hour = 6;
    double base_load = 120.0;
    double morning_peak = 1400.0;
    double evening_peak = 2000.0;
    double weekend_load = 20.0;
    double noise_sd = 60.0;
    /// Day-to-day amplitude jitter: each weekday's peaks are scaled by 1 + U(-a, a).
    double amplitude_jitter = 0.2;
    std::size_t appliances = 9;
    /// Optional outage: readings dropped for [gap_start_day, gap_start_day + gap_days).
    std::size_t gap_start_day = 0;
    std::size_t gap_days = 0;
    std::uint64_t seed = 1;
};

/// Noise-free expected aggregate at a fractional hour of day.
double regime_profile(const RegimeSwitchingConfig& config, unsigned day_of_week, double hour_of_day);

/// Sub-hourly meter readings (Aggregate + Appliance1..N).
RawSeries regime_switching_raw(const RegimeSwitchingConfig& config);

/// Hourly means of regime_switching_raw.
HourlySeries regime_switching_hourly(const RegimeSwitchingConfig& config);

/// Single-channel "Aggregate" series with value f(day_of_week, hour) at every hour.
HourlySeries calendar_signal_series(Timestamp start, std::size_t hours,
                                    const std::function<double(unsigned, unsigned)>& f);

/// Meter CSV with a human-readable Time column followed by the schema's columns.
void write_meter_csv(const std::filesystem::path& path, const RawSeries& raw, const CsvSchema& schema = {});

}  // namespace loadfc
