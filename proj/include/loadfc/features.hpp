#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "loadfc/series.hpp"
#include "loadfc/types.hpp"

namespace loadfc {

/// Calendar columns: hour 0-23, dayofweek (Monday = 0), month 1-12, is_weekend.
struct CalendarColumns {
    std::vector<double> hour;
    std::vector<double> dayofweek;
    std::vector<double> month;
    std::vector<double> is_weekend;

    const std::vector<double>& by_name(const std::string& name) const;
};

inline const std::vector<std::string> kCalendarNames = {"dayofweek", "hour", "is_weekend", "month"};

CalendarColumns calendar_features(const std::vector<Timestamp>& timestamps);

/// lag_k at row t equals target[t - k]; rows start at t = max lag.
struct LagColumns {
    std::size_t first_row = 0;
    std::map<std::size_t, std::vector<double>> columns;
};

LagColumns lag_features(const std::vector<double>& target, const std::vector<std::size_t>& lags);

std::string lag_name(std::size_t lag);

struct FeatureConfig {
    std::string target_channel = "Aggregate";
    std::vector<std::string> calendar = {"hour", "dayofweek", "month", "is_weekend"};
    std::vector<std::size_t> lags = {1, 24, 168};
    /// Same-hour channel readings. Only valid for windowed (sequence) inputs, where
    /// a sample sees rows strictly before its target hour.
    std::vector<std::string> channels;
    /// Maps hour/dayofweek/month onto [0, 1] by their fixed ranges.
    bool normalize_calendar = false;
};

/// Tabular design matrix; row t carries target(t) as its label.
struct FeatureMatrix {
    std::vector<Timestamp> timestamps;
    std::vector<std::string> feature_order;
    DenseMatrix features;
    std::vector<double> targets;

    std::size_t rows() const { return targets.size(); }
    std::size_t feature_index(const std::string& name) const;
    FeatureMatrix slice_rows(IndexRange range) const;
};

/// Requires a gap-free series (every used channel present at every slot).
FeatureMatrix assemble_matrix(const HourlySeries& series, const FeatureConfig& config);

void write_feature_csv(const std::filesystem::path& path, const FeatureMatrix& matrix);

/// Sliding windows: sample i covers rows [i, i + window), targets rows i + window .. + horizon - 1.
struct WindowTensor {
    std::size_t samples = 0;
    std::size_t window = 0;
    std::size_t n_features = 0;
    std::size_t horizon = 1;
    std::vector<double> data;     // samples x window x n_features
    std::vector<double> targets;  // samples x horizon
    std::vector<Timestamp> target_timestamps;  // first target hour per sample

    std::span<const double> sample(std::size_t i) const {
        return {data.data() + i * window * n_features, window * n_features};
    }
    double target(std::size_t i, std::size_t h = 0) const { return targets[i * horizon + h]; }
    WindowTensor slice(IndexRange samples_range) const;
};

inline constexpr std::size_t kDefaultWindow = 48;

WindowTensor windowize(const FeatureMatrix& matrix, std::size_t window = kDefaultWindow, std::size_t horizon = 1);

}  // namespace loadfc
