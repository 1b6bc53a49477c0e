#include "loadfc/series.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "loadfc/calendar.hpp"
#include "csv_util.hpp"

namespace loadfc {

std::string format_iso_hour(Timestamp t) {
    const CivilHour c = civil_hour(t);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02u:00:00Z", c.year, c.month, c.day, c.hour);
    return buf;
}

Timestamp parse_iso_hour(std::string_view text) {
    if (!text.empty() && text.back() == 'Z') text.remove_suffix(1);
    int y = 0;
    unsigned mo = 0, d = 0, h = 0, mi = 0, s = 0;
    auto field = [&](std::size_t pos, std::size_t len, auto& out) {
        if (pos + len > text.size()) throw std::invalid_argument("bad ISO timestamp");
        const char* first = text.data() + pos;
        auto [p, ec] = std::from_chars(first, first + len, out);
        if (ec != std::errc{} || p != first + len) {
            throw std::invalid_argument("bad ISO timestamp: " + std::string(text));
        }
    };
    if (text.size() != 19 || text[4] != '-' || text[7] != '-' || (text[10] != 'T' && text[10] != ' ') ||
        text[13] != ':' || text[16] != ':') {
        throw std::invalid_argument("bad ISO timestamp: " + std::string(text));
    }
    field(0, 4, y);
    field(5, 2, mo);
    field(8, 2, d);
    field(11, 2, h);
    field(14, 2, mi);
    field(17, 2, s);
    return make_timestamp(y, mo, d, h) + mi * 60 + s;
}

std::string format_double(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc{}) throw std::runtime_error("format_double failed");
    return std::string(buf, p);
}

std::vector<std::string> CsvSchema::channel_names() const {
    std::vector<std::string> names{aggregate_column};
    names.insert(names.end(), appliance_columns.begin(), appliance_columns.end());
    return names;
}

HourlySeries::HourlySeries(Timestamp start, std::vector<std::string> channel_names,
                           std::vector<Channel> channels)
    : start_(start), names_(std::move(channel_names)), channels_(std::move(channels)) {
    if (names_.size() != channels_.size()) {
        throw std::invalid_argument("HourlySeries: channel name count does not match channels");
    }
    if (floor_to_hour(start_) != start_) {
        throw std::invalid_argument("HourlySeries: start is not hour-aligned");
    }
    for (const auto& ch : channels_) {
        if (ch.size() != channels_.front().size()) {
            throw std::invalid_argument("HourlySeries: channels differ in length");
        }
    }
}

std::size_t HourlySeries::channel_index(const std::string& name) const {
    auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) throw std::out_of_range("unknown channel: " + name);
    return static_cast<std::size_t>(it - names_.begin());
}

std::vector<Timestamp> HourlySeries::timestamps() const {
    std::vector<Timestamp> out(size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = timestamp_at(i);
    return out;
}

HourlySeries HourlySeries::slice(IndexRange range) const {
    if (range.end > size() || range.begin > range.end) {
        throw std::out_of_range("HourlySeries::slice: range outside series");
    }
    std::vector<Channel> out;
    out.reserve(channels_.size());
    for (const auto& ch : channels_) {
        out.emplace_back(ch.begin() + static_cast<std::ptrdiff_t>(range.begin),
                         ch.begin() + static_cast<std::ptrdiff_t>(range.end));
    }
    return HourlySeries(timestamp_at(range.begin), names_, std::move(out));
}

HourlySeries HourlySeries::with_channel(std::size_t c, Channel values) const {
    if (values.size() != size()) throw std::invalid_argument("with_channel: length mismatch");
    HourlySeries copy = *this;
    copy.channels_.at(c) = std::move(values);
    return copy;
}

HourlySeries HourlySeries::select_channels(const std::vector<std::size_t>& keep) const {
    std::vector<std::string> names;
    std::vector<Channel> chans;
    for (std::size_t c : keep) {
        names.push_back(names_.at(c));
        chans.push_back(channels_.at(c));
    }
    return HourlySeries(start_, std::move(names), std::move(chans));
}

namespace {

double parse_power(std::string_view cell, std::size_t line) {
    cell = detail::trim(cell);
    if (cell.empty()) return std::numeric_limits<double>::quiet_NaN();
    double v = 0.0;
    auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc{} || p != cell.data() + cell.size()) {
        if (cell == "nan" || cell == "NaN" || cell == "NA") return std::numeric_limits<double>::quiet_NaN();
        throw IngestError("line " + std::to_string(line) + ": unparseable value '" + std::string(cell) + "'",
                          line);
    }
    if (!std::isfinite(v) || v < 0.0) return std::numeric_limits<double>::quiet_NaN();
    return v;
}

Timestamp parse_unix(std::string_view cell, std::size_t line) {
    cell = detail::trim(cell);
    Timestamp t = 0;
    auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), t);
    if (ec == std::errc{} && p == cell.data() + cell.size() && !cell.empty()) return t;
    double d = 0.0;
    auto [p2, ec2] = std::from_chars(cell.data(), cell.data() + cell.size(), d);
    if (ec2 == std::errc{} && p2 == cell.data() + cell.size() && !cell.empty() && std::isfinite(d)) {
        return static_cast<Timestamp>(std::floor(d));
    }
    throw IngestError("line " + std::to_string(line) + ": unparseable timestamp '" + std::string(cell) + "'",
                      line);
}

}  // namespace

RawSeries ingest_csv(const std::filesystem::path& path, const CsvSchema& schema) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IngestError("cannot open " + path.string());

    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string_view> cells;

    if (!std::getline(in, line)) throw IngestError("empty series");
    ++line_no;
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);
    detail::split_csv(line, cells);
    std::vector<std::string> header(cells.begin(), cells.end());
    for (auto& h : header) h = std::string(detail::trim(h));

    auto column_of = [&](const std::string& name) {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw IngestError("missing column '" + name + "'", 1);
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t ts_col = column_of(schema.timestamp_column);
    std::vector<std::size_t> value_cols{column_of(schema.aggregate_column)};
    for (const auto& a : schema.appliance_columns) value_cols.push_back(column_of(a));

    RawSeries raw;
    raw.channel_names = schema.channel_names();
    raw.channels.resize(value_cols.size());

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (detail::trim(line).empty()) continue;
        detail::split_csv(line, cells);
        if (cells.size() != header.size()) {
            throw IngestError("line " + std::to_string(line_no) + ": expected " +
                                  std::to_string(header.size()) + " fields, got " +
                                  std::to_string(cells.size()),
                              line_no);
        }
        raw.timestamps.push_back(parse_unix(cells[ts_col], line_no));
        for (std::size_t c = 0; c < value_cols.size(); ++c) {
            raw.channels[c].push_back(parse_power(cells[value_cols[c]], line_no));
        }
    }
    if (raw.empty()) throw IngestError("empty series");

    // Stable order by timestamp; among duplicates the last row in file order wins.
    std::vector<std::size_t> order(raw.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return raw.timestamps[a] < raw.timestamps[b]; });
    std::vector<std::size_t> kept;
    kept.reserve(order.size());
    for (std::size_t k = 0; k < order.size(); ++k) {
        if (k + 1 < order.size() && raw.timestamps[order[k + 1]] == raw.timestamps[order[k]]) continue;
        kept.push_back(order[k]);
    }
    bool identity = kept.size() == raw.size();
    for (std::size_t k = 0; identity && k < kept.size(); ++k) identity = kept[k] == k;
    if (identity) return raw;

    RawSeries sorted;
    sorted.channel_names = raw.channel_names;
    sorted.timestamps.reserve(kept.size());
    for (std::size_t k : kept) sorted.timestamps.push_back(raw.timestamps[k]);
    sorted.channels.resize(raw.channels.size());
    for (std::size_t c = 0; c < raw.channels.size(); ++c) {
        sorted.channels[c].reserve(kept.size());
        for (std::size_t k : kept) sorted.channels[c].push_back(raw.channels[c][k]);
    }
    return sorted;
}

HourlySeries resample_hourly(const RawSeries& raw) {
    if (raw.empty()) throw std::invalid_argument("resample_hourly: empty raw series");
    const Timestamp first = floor_to_hour(raw.timestamps.front());
    const Timestamp last = floor_to_hour(raw.timestamps.back());
    if (last < first) throw std::invalid_argument("resample_hourly: timestamps not sorted");
    const auto n = static_cast<std::size_t>((last - first) / kSecondsPerHour) + 1;

    std::vector<Channel> channels(raw.channels.size(), Channel(n));
    std::vector<double> sum(n);
    std::vector<std::size_t> count(n);
    for (std::size_t c = 0; c < raw.channels.size(); ++c) {
        std::fill(sum.begin(), sum.end(), 0.0);
        std::fill(count.begin(), count.end(), 0);
        const auto& values = raw.channels[c];
        for (std::size_t r = 0; r < raw.size(); ++r) {
            if (std::isnan(values[r])) continue;
            const auto slot = static_cast<std::size_t>((floor_to_hour(raw.timestamps[r]) - first) / kSecondsPerHour);
            sum[slot] += values[r];
            ++count[slot];
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (count[i] > 0) channels[c][i] = sum[i] / static_cast<double>(count[i]);
        }
    }
    return HourlySeries(first, raw.channel_names, std::move(channels));
}

std::vector<Gap> missing_runs(const Channel& channel) {
    std::vector<Gap> runs;
    std::size_t i = 0;
    while (i < channel.size()) {
        if (channel[i].has_value()) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < channel.size() && !channel[j].has_value()) ++j;
        runs.push_back({i, j - i});
        i = j;
    }
    return runs;
}

GapReport detect_gaps(const HourlySeries& series, std::size_t structural_threshold, std::size_t channel) {
    if (structural_threshold < 1) throw std::invalid_argument("detect_gaps: threshold must be >= 1");
    GapReport report;
    report.structural_threshold = structural_threshold;
    for (const Gap& g : missing_runs(series.channel(channel))) {
        if (g.length >= structural_threshold) report.gaps.push_back(g);
    }
    return report;
}

double ScalerParams::transform(std::size_t c, double x) const {
    const double range = max.at(c) - min.at(c);
    if (range <= 0.0) return 0.0;
    return (x - min[c]) / range;
}

double ScalerParams::inverse(std::size_t c, double x) const {
    const double range = max.at(c) - min.at(c);
    if (range <= 0.0) return min[c];
    return x * range + min[c];
}

ScalerParams minmax_fit(const HourlySeries& series, IndexRange segment) {
    if (segment.empty() || segment.end > series.size()) {
        throw std::invalid_argument("minmax_fit: segment empty or outside series");
    }
    ScalerParams p;
    p.channel_names = series.channel_names();
    for (std::size_t c = 0; c < series.channel_count(); ++c) {
        const auto& ch = series.channel(c);
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        for (std::size_t i = segment.begin; i < segment.end; ++i) {
            if (!ch[i]) continue;
            lo = std::min(lo, *ch[i]);
            hi = std::max(hi, *ch[i]);
        }
        if (lo > hi) {
            throw std::invalid_argument("minmax_fit: channel '" + series.channel_names()[c] +
                                        "' has no present values in segment");
        }
        p.min.push_back(lo);
        p.max.push_back(hi);
    }
    return p;
}

namespace {

HourlySeries map_channels(const HourlySeries& series, const ScalerParams& params, bool forward) {
    if (params.channel_count() != series.channel_count()) {
        throw std::invalid_argument("scaler channel count does not match series");
    }
    std::vector<Channel> out = series.channels();
    for (std::size_t c = 0; c < out.size(); ++c) {
        for (auto& v : out[c]) {
            if (v) v = forward ? params.transform(c, *v) : params.inverse(c, *v);
        }
    }
    return HourlySeries(series.start(), series.channel_names(), std::move(out));
}

}  // namespace

HourlySeries minmax_transform(const HourlySeries& series, const ScalerParams& params) {
    return map_channels(series, params, true);
}

HourlySeries minmax_inverse(const HourlySeries& series, const ScalerParams& params) {
    return map_channels(series, params, false);
}

std::size_t split_point(std::size_t n, double train_fraction) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw std::invalid_argument("train fraction must lie in (0, 1)");
    }
    if (n < 2) throw std::invalid_argument("series needs at least 2 slots to split");
    const auto k = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(n)));
    if (k == 0 || k >= n) throw std::invalid_argument("train fraction yields an empty split");
    return k;
}

std::pair<HourlySeries, HourlySeries> chronological_split(const HourlySeries& series, double train_fraction) {
    const std::size_t k = split_point(series.size(), train_fraction);
    return {series.slice({0, k}), series.slice({k, series.size()})};
}

std::string hourly_to_csv(const HourlySeries& series) {
    std::ostringstream out;
    out << "timestamp";
    for (const auto& n : series.channel_names()) out << ',' << n;
    out << '\n';
    for (std::size_t i = 0; i < series.size(); ++i) {
        out << format_iso_hour(series.timestamp_at(i));
        for (std::size_t c = 0; c < series.channel_count(); ++c) {
            out << ',';
            if (const auto& v = series.channel(c)[i]) out << format_double(*v);
        }
        out << '\n';
    }
    return out.str();
}

void write_hourly_csv(const std::filesystem::path& path, const HourlySeries& series) {
    detail::write_text_file(path, hourly_to_csv(series));
}

HourlySeries read_hourly_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IngestError("cannot open " + path.string());
    std::string line;
    std::vector<std::string_view> cells;
    if (!std::getline(in, line)) throw IngestError("empty hourly cache " + path.string());
    detail::split_csv(line, cells);
    if (cells.empty() || detail::trim(cells[0]) != "timestamp") {
        throw IngestError("hourly cache must start with a timestamp column", 1);
    }
    std::vector<std::string> names;
    for (std::size_t c = 1; c < cells.size(); ++c) names.emplace_back(detail::trim(cells[c]));
    std::vector<Channel> channels(names.size());
    std::size_t line_no = 1;
    Timestamp start = 0;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        detail::split_csv(line, cells);
        if (cells.size() != names.size() + 1) {
            throw IngestError("line " + std::to_string(line_no) + ": wrong field count", line_no);
        }
        Timestamp t = 0;
        try {
            t = parse_iso_hour(detail::trim(cells[0]));
        } catch (const std::invalid_argument& e) {
            throw IngestError("line " + std::to_string(line_no) + ": " + e.what(), line_no);
        }
        if (rows == 0) start = t;
        if (t != start + static_cast<Timestamp>(rows) * kSecondsPerHour) {
            throw IngestError("line " + std::to_string(line_no) + ": hourly cache is not a regular grid", line_no);
        }
        for (std::size_t c = 0; c < names.size(); ++c) {
            auto cell = detail::trim(cells[c + 1]);
            if (cell.empty()) {
                channels[c].emplace_back();
            } else {
                double v = 0.0;
                auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
                if (ec != std::errc{} || p != cell.data() + cell.size()) {
                    throw IngestError("line " + std::to_string(line_no) + ": unparseable value", line_no);
                }
                channels[c].emplace_back(v);
            }
        }
        ++rows;
    }
    if (rows == 0) throw IngestError("empty series");
    return HourlySeries(start, std::move(names), std::move(channels));
}

}  // namespace loadfc
