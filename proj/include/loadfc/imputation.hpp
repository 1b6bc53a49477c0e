#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "loadfc/series.hpp"

namespace loadfc {

/// Mean load keyed by (day_of_week, hour_of_day); Monday = 0.
struct SeasonalProfile {
    static constexpr std::size_t kCells = 7 * 24;

    std::array<double, kCells> mean{};
    std::array<std::size_t, kCells> count{};

    static std::size_t cell(unsigned day_of_week, unsigned hour) { return day_of_week * 24 + hour; }
    /// Empty when the cell had no observations.
    std::optional<double> at(unsigned day_of_week, unsigned hour) const {
        const std::size_t k = cell(day_of_week, hour);
        if (count[k] == 0) return std::nullopt;
        return mean[k];
    }
};

enum class ImputeMethod { Linear, Seasonal };

std::string to_string(ImputeMethod m);
/// Accepts "linear" or "seasonal".
ImputeMethod parse_impute_method(const std::string& name);

/// Fills missing runs of length <= max_gap with the mean of the k temporally nearest
/// present values of the same channel (ties go to the earlier slot).
HourlySeries knn_impute(const HourlySeries& series, std::size_t k, std::size_t max_gap);

/// Straight line between the nearest present anchors on both sides of `range`.
HourlySeries linear_impute(const HourlySeries& series, IndexRange range, std::size_t channel);

SeasonalProfile build_seasonal_profile(const HourlySeries& series, IndexRange exclude, std::size_t channel);

/// Profile lookup with linear, then channel-mean fallback for empty cells.
HourlySeries seasonal_impute(const HourlySeries& series, IndexRange range, const SeasonalProfile& profile,
                             std::size_t channel);

/// Builds the profile from everything outside `range` and fills it.
HourlySeries impute_range(const HourlySeries& series, IndexRange range, std::size_t channel,
                          ImputeMethod method);

/// Applies `method` to every missing run longer than `min_length`, channel by channel.
HourlySeries fill_long_gaps(const HourlySeries& series, ImputeMethod method, std::size_t min_length);

struct Histogram {
    double lo = 0.0;
    double bin_width = 1.0;
    std::vector<std::size_t> counts;

    double bin_left(std::size_t b) const { return lo + bin_width * static_cast<double>(b); }
    double bin_right(std::size_t b) const { return lo + bin_width * static_cast<double>(b + 1); }
};

/// Equal-width bins spanning [lo, hi]; values outside are clamped into the edge bins.
Histogram make_histogram(const std::vector<double>& values, double lo, double hi, std::size_t bins);

/// 1-D earth mover's distance between two histograms on the same binning, in value units.
double earth_movers_distance(const Histogram& a, const Histogram& b);

struct MethodScore {
    ImputeMethod method = ImputeMethod::Linear;
    double rmse = 0.0;
    double mae = 0.0;
    double distribution_distance = 0.0;
    std::vector<double> imputed;
    Histogram histogram;
};

struct ImputationTrial {
    IndexRange masked_range;
    std::vector<double> truth;
    Histogram truth_histogram;
    std::vector<MethodScore> method_results;
};

inline constexpr std::size_t kTrialHistogramBins = 50;

ImputationTrial run_imputation_trial(const HourlySeries& series, IndexRange mask,
                                     const std::vector<ImputeMethod>& methods, std::size_t channel = 0);

/// Lower distribution distance wins; ties go to the lower RMSE.
ImputeMethod choose_method(const ImputationTrial& trial);

}  // namespace loadfc
