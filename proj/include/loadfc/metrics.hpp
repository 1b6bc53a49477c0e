#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "loadfc/types.hpp"

namespace loadfc {

inline const std::vector<double> kDefaultQuantiles = {0.05, 0.50, 0.95};

/// Per-timestep quantile forecasts. values[k][t] is the forecast at levels[k] for timestamps[t].
struct ForecastDistribution {
    std::vector<Timestamp> timestamps;
    std::vector<double> levels;
    std::vector<std::vector<double>> values;

    std::size_t size() const { return values.empty() ? 0 : values.front().size(); }
    const std::vector<double>& lower() const { return values.front(); }
    const std::vector<double>& upper() const { return values.back(); }
    /// Level closest to 0.5.
    const std::vector<double>& median() const;

    /// Throws unless levels are strictly increasing in (0,1) and every row is non-decreasing.
    void validate() const;
};

/// Sorts each timestep's quantiles ascending (non-crossing repair).
void sort_quantiles(ForecastDistribution& dist);

double rmse(std::span<const double> y, std::span<const double> yhat);
double mae(std::span<const double> y, std::span<const double> yhat);

/// Mean pinball loss over every (point, level) pair.
double average_quantile_score(std::span<const double> y, const ForecastDistribution& dist);

/// Percentage of points with lower <= y <= upper.
double picp(std::span<const double> y, const ForecastDistribution& dist);

struct ReportEntry {
    std::string model;
    double rmse = 0.0;
    double mae = 0.0;
    std::optional<double> picp;
    std::optional<double> aqs;
    friend bool operator==(const ReportEntry&, const ReportEntry&) = default;
};

struct EvalReport {
    std::vector<ReportEntry> rows;

    const ReportEntry& row(const std::string& model) const;
};

ReportEntry score_point(const std::string& model, std::span<const double> y, std::span<const double> yhat);
ReportEntry score_distribution(const std::string& model, std::span<const double> y, const ForecastDistribution& dist);

EvalReport assemble_report(std::vector<ReportEntry> entries);

/// Model,RMSE,MAE,PICP,AQS with "N/A" for absent fields.
std::string report_to_csv(const EvalReport& report);
EvalReport report_from_csv(const std::string& text);
/// Aligned plain-text table.
std::string report_to_text(const EvalReport& report);

}  // namespace loadfc
