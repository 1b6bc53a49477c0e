#include "loadfc/features.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

#include "loadfc/calendar.hpp"
#include "csv_util.hpp"

namespace loadfc {

const std::vector<double>& CalendarColumns::by_name(const std::string& name) const {
    if (name == "hour") return hour;
    if (name == "dayofweek") return dayofweek;
    if (name == "month") return month;
    if (name == "is_weekend") return is_weekend;
    throw std::invalid_argument("unknown calendar feature '" + name + "'");
}

CalendarColumns calendar_features(const std::vector<Timestamp>& timestamps) {
    CalendarColumns cols;
    const std::size_t n = timestamps.size();
    cols.hour.reserve(n);
    cols.dayofweek.reserve(n);
    cols.month.reserve(n);
    cols.is_weekend.reserve(n);
    for (Timestamp t : timestamps) {
        if (floor_to_hour(t) != t) throw std::invalid_argument("calendar_features: timestamp not hour-aligned");
        const CivilHour c = civil_hour(t);
        cols.hour.push_back(c.hour);
        cols.dayofweek.push_back(c.weekday);
        cols.month.push_back(c.month);
        cols.is_weekend.push_back(c.weekday >= 5 ? 1.0 : 0.0);
    }
    return cols;
}

std::string lag_name(std::size_t lag) { return "lag_" + std::to_string(lag); }

LagColumns lag_features(const std::vector<double>& target, const std::vector<std::size_t>& lags) {
    if (lags.empty()) throw std::invalid_argument("lag_features: no lags requested");
    const std::size_t max_lag = *std::max_element(lags.begin(), lags.end());
    if (*std::min_element(lags.begin(), lags.end()) == 0) throw std::invalid_argument("lag_features: lag 0");
    if (target.size() <= max_lag) {
        throw std::invalid_argument("lag_features: series of length " + std::to_string(target.size()) +
                                    " leaves no rows for lag " + std::to_string(max_lag));
    }
    LagColumns out;
    out.first_row = max_lag;
    for (std::size_t k : lags) {
        auto& col = out.columns[k];
        col.reserve(target.size() - max_lag);
        for (std::size_t t = max_lag; t < target.size(); ++t) col.push_back(target[t - k]);
    }
    return out;
}

std::size_t FeatureMatrix::feature_index(const std::string& name) const {
    auto it = std::find(feature_order.begin(), feature_order.end(), name);
    if (it == feature_order.end()) throw std::out_of_range("unknown feature '" + name + "'");
    return static_cast<std::size_t>(it - feature_order.begin());
}

FeatureMatrix FeatureMatrix::slice_rows(IndexRange range) const {
    if (range.end > rows() || range.begin > range.end) throw std::out_of_range("slice_rows: bad range");
    FeatureMatrix out;
    out.feature_order = feature_order;
    out.timestamps.assign(timestamps.begin() + static_cast<std::ptrdiff_t>(range.begin),
                          timestamps.begin() + static_cast<std::ptrdiff_t>(range.end));
    out.targets.assign(targets.begin() + static_cast<std::ptrdiff_t>(range.begin),
                       targets.begin() + static_cast<std::ptrdiff_t>(range.end));
    const std::size_t cols = features.cols();
    const auto& d = features.data();
    out.features = DenseMatrix(range.size(), cols,
                               std::vector<double>(d.begin() + static_cast<std::ptrdiff_t>(range.begin * cols),
                                                   d.begin() + static_cast<std::ptrdiff_t>(range.end * cols)));
    return out;
}

namespace {

double calendar_scale(const std::string& name) {
    if (name == "hour") return 23.0;
    if (name == "dayofweek") return 6.0;
    return 1.0;
}

}  // namespace

FeatureMatrix assemble_matrix(const HourlySeries& series, const FeatureConfig& config) {
    const std::size_t n = series.size();
    const Channel& target = series.channel(series.channel_index(config.target_channel));

    std::vector<std::string> calendar = config.calendar;
    std::sort(calendar.begin(), calendar.end());
    calendar.erase(std::unique(calendar.begin(), calendar.end()), calendar.end());
    std::vector<std::size_t> lags = config.lags;
    std::sort(lags.begin(), lags.end(), [](std::size_t a, std::size_t b) { return lag_name(a) < lag_name(b); });
    lags.erase(std::unique(lags.begin(), lags.end()), lags.end());
    std::vector<std::string> channels = config.channels;
    std::sort(channels.begin(), channels.end());
    channels.erase(std::unique(channels.begin(), channels.end()), channels.end());

    std::size_t max_lag = 0;
    for (std::size_t k : lags) {
        if (k == 0) throw std::invalid_argument("assemble_matrix: lag 0 is the label itself");
        max_lag = std::max(max_lag, k);
    }
    if (n <= max_lag) {
        throw std::invalid_argument("assemble_matrix: series shorter than the largest lag");
    }

    FeatureMatrix m;
    m.feature_order = calendar;
    for (std::size_t k : lags) m.feature_order.push_back(lag_name(k));
    m.feature_order.insert(m.feature_order.end(), channels.begin(), channels.end());
    if (m.feature_order.empty()) throw std::invalid_argument("assemble_matrix: no features configured");

    const CalendarColumns cal = calendar_features(series.timestamps());
    std::vector<const Channel*> channel_cols;
    for (const auto& name : channels) channel_cols.push_back(&series.channel(series.channel_index(name)));

    std::vector<double> data;
    std::vector<double> row;
    for (std::size_t t = max_lag; t < n; ++t) {
        if (!target[t]) continue;
        row.clear();
        for (const auto& name : calendar) {
            double v = cal.by_name(name)[t];
            if (config.normalize_calendar) {
                v = name == "month" ? (v - 1.0) / 11.0 : v / calendar_scale(name);
            }
            row.push_back(v);
        }
        bool defined = true;
        for (std::size_t k : lags) {
            if (!target[t - k]) {
                defined = false;
                break;
            }
            row.push_back(*target[t - k]);
        }
        for (const Channel* ch : channel_cols) {
            if (!defined || !(*ch)[t]) {
                defined = false;
                break;
            }
            row.push_back(*(*ch)[t]);
        }
        if (!defined) continue;
        data.insert(data.end(), row.begin(), row.end());
        m.timestamps.push_back(series.timestamp_at(t));
        m.targets.push_back(*target[t]);
    }
    if (m.targets.empty()) throw std::invalid_argument("assemble_matrix: no row has every feature defined");
    m.features = DenseMatrix(m.targets.size(), m.feature_order.size(), std::move(data));
    return m;
}

void write_feature_csv(const std::filesystem::path& path, const FeatureMatrix& matrix) {
    std::ostringstream out;
    out << "timestamp";
    for (const auto& f : matrix.feature_order) out << ',' << f;
    out << ",target\n";
    for (std::size_t r = 0; r < matrix.rows(); ++r) {
        out << format_iso_hour(matrix.timestamps[r]);
        for (double v : matrix.features.row(r)) out << ',' << format_double(v);
        out << ',' << format_double(matrix.targets[r]) << '\n';
    }
    detail::write_text_file(path, out.str());
}

WindowTensor WindowTensor::slice(IndexRange r) const {
    if (r.end > samples || r.begin > r.end) throw std::out_of_range("WindowTensor::slice: bad range");
    WindowTensor out;
    out.samples = r.size();
    out.window = window;
    out.n_features = n_features;
    out.horizon = horizon;
    const std::size_t stride = window * n_features;
    out.data.assign(data.begin() + static_cast<std::ptrdiff_t>(r.begin * stride),
                    data.begin() + static_cast<std::ptrdiff_t>(r.end * stride));
    out.targets.assign(targets.begin() + static_cast<std::ptrdiff_t>(r.begin * horizon),
                       targets.begin() + static_cast<std::ptrdiff_t>(r.end * horizon));
    out.target_timestamps.assign(target_timestamps.begin() + static_cast<std::ptrdiff_t>(r.begin),
                                 target_timestamps.begin() + static_cast<std::ptrdiff_t>(r.end));
    return out;
}

WindowTensor windowize(const FeatureMatrix& matrix, std::size_t window, std::size_t horizon) {
    if (window == 0 || horizon == 0) throw std::invalid_argument("windowize: window and horizon must be >= 1");
    const std::size_t rows = matrix.rows();
    if (rows < window + horizon) {
        throw std::invalid_argument("windowize: " + std::to_string(rows) + " rows cannot fill a window of " +
                                    std::to_string(window) + " plus horizon " + std::to_string(horizon));
    }
    for (std::size_t r = 1; r < rows; ++r) {
        if (matrix.timestamps[r] != matrix.timestamps[r - 1] + kSecondsPerHour) {
            throw std::invalid_argument("windowize: matrix rows are not contiguous hours");
        }
    }
    WindowTensor w;
    w.samples = rows - window - horizon + 1;
    w.window = window;
    w.horizon = horizon;
    w.n_features = matrix.features.cols();
    const auto& d = matrix.features.data();
    const std::size_t stride = window * w.n_features;
    w.data.resize(w.samples * stride);
    w.targets.resize(w.samples * horizon);
    w.target_timestamps.resize(w.samples);
    for (std::size_t i = 0; i < w.samples; ++i) {
        std::copy(d.begin() + static_cast<std::ptrdiff_t>(i * w.n_features),
                  d.begin() + static_cast<std::ptrdiff_t>((i + window) * w.n_features),
                  w.data.begin() + static_cast<std::ptrdiff_t>(i * stride));
        for (std::size_t h = 0; h < horizon; ++h) w.targets[i * horizon + h] = matrix.targets[i + window + h];
        w.target_timestamps[i] = matrix.timestamps[i + window];
    }
    return w;
}

}  // namespace loadfc
