#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "loadfc/types.hpp"

namespace loadfc {

/// Raised for malformed input files. Carries the 1-based line number when known.
class IngestError : public std::runtime_error {
public:
    IngestError(const std::string& what, std::size_t line = 0)
        : std::runtime_error(what), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

/// Column mapping for meter CSVs.
struct CsvSchema {
    std::string timestamp_column = "Unix";
    std::string aggregate_column = "Aggregate";
    std::vector<std::string> appliance_columns = {
        "Appliance1", "Appliance2", "Appliance3", "Appliance4", "Appliance5",
        "Appliance6", "Appliance7", "Appliance8", "Appliance9"};

    std::vector<std::string> channel_names() const;
};

/// Raw meter readings in columnar form. Channel 0 is the aggregate.
/// Invalid cells (empty, non-numeric, negative, non-finite) are stored as NaN.
struct RawSeries {
    std::vector<std::string> channel_names;
    std::vector<Timestamp> timestamps;
    std::vector<std::vector<double>> channels;

    std::size_t size() const { return timestamps.size(); }
    bool empty() const { return timestamps.empty(); }
};

using Channel = std::vector<std::optional<double>>;

/// Regular hourly grid with explicit missing values. Immutable after construction.
class HourlySeries {
public:
    HourlySeries() = default;
    HourlySeries(Timestamp start, std::vector<std::string> channel_names,
                 std::vector<Channel> channels);

    Timestamp start() const { return start_; }
    std::size_t size() const { return channels_.empty() ? 0 : channels_.front().size(); }
    std::size_t channel_count() const { return channels_.size(); }
    const std::vector<std::string>& channel_names() const { return names_; }

    const Channel& channel(std::size_t c) const { return channels_.at(c); }
    const std::vector<Channel>& channels() const { return channels_; }
    /// Throws std::out_of_range for an unknown name.
    std::size_t channel_index(const std::string& name) const;

    Timestamp timestamp_at(std::size_t i) const {
        return start_ + static_cast<Timestamp>(i) * kSecondsPerHour;
    }
    std::vector<Timestamp> timestamps() const;

    HourlySeries slice(IndexRange range) const;
    HourlySeries with_channel(std::size_t c, Channel values) const;
    HourlySeries select_channels(const std::vector<std::size_t>& keep) const;

    friend bool operator==(const HourlySeries&, const HourlySeries&) = default;

private:
    Timestamp start_ = 0;
    std::vector<std::string> names_;
    std::vector<Channel> channels_;
};

struct Gap {
    std::size_t start = 0;
    std::size_t length = 0;
    friend bool operator==(const Gap&, const Gap&) = default;
};

struct GapReport {
    std::vector<Gap> gaps;
    std::size_t structural_threshold = 24;
};

struct ScalerParams {
    std::vector<std::string> channel_names;
    std::vector<double> min;
    std::vector<double> max;

    std::size_t channel_count() const { return min.size(); }
    double transform(std::size_t c, double x) const;
    double inverse(std::size_t c, double x) const;
};

RawSeries ingest_csv(const std::filesystem::path& path, const CsvSchema& schema);

HourlySeries resample_hourly(const RawSeries& raw);

/// Maximal runs of missing slots of length >= threshold in one channel.
GapReport detect_gaps(const HourlySeries& series, std::size_t structural_threshold,
                      std::size_t channel = 0);

/// All maximal missing runs in one channel, regardless of length.
std::vector<Gap> missing_runs(const Channel& channel);

ScalerParams minmax_fit(const HourlySeries& series, IndexRange segment);
HourlySeries minmax_transform(const HourlySeries& series, const ScalerParams& params);
HourlySeries minmax_inverse(const HourlySeries& series, const ScalerParams& params);

std::pair<HourlySeries, HourlySeries> chronological_split(const HourlySeries& series,
                                                          double train_fraction);
/// Number of training slots chronological_split would produce.
std::size_t split_point(std::size_t n, double train_fraction);

/// Hourly cache: ISO-8601 hour column then one column per channel, empty cell = missing.
std::string hourly_to_csv(const HourlySeries& series);
void write_hourly_csv(const std::filesystem::path& path, const HourlySeries& series);
HourlySeries read_hourly_csv(const std::filesystem::path& path);

std::string format_double(double v);

}  // namespace loadfc
