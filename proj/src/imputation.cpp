#include "loadfc/imputation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "loadfc/calendar.hpp"

namespace loadfc {

std::string to_string(ImputeMethod m) {
    switch (m) {
        case ImputeMethod::Linear: return "linear";
        case ImputeMethod::Seasonal: return "seasonal";
    }
    return "unknown";
}

ImputeMethod parse_impute_method(const std::string& name) {
    if (name == "linear") return ImputeMethod::Linear;
    if (name == "seasonal") return ImputeMethod::Seasonal;
    throw std::invalid_argument("unknown imputation method '" + name + "'");
}

HourlySeries knn_impute(const HourlySeries& series, std::size_t k, std::size_t max_gap) {
    if (k < 1) throw std::invalid_argument("knn_impute: k must be >= 1");
    std::vector<Channel> out = series.channels();
    for (std::size_t c = 0; c < out.size(); ++c) {
        const Channel& src = series.channel(c);
        std::vector<Gap> runs = missing_runs(src);
        runs.erase(std::remove_if(runs.begin(), runs.end(), [&](const Gap& g) { return g.length > max_gap; }),
                   runs.end());
        if (runs.empty()) continue;

        std::vector<std::size_t> present;
        for (std::size_t i = 0; i < src.size(); ++i) {
            if (src[i]) present.push_back(i);
        }
        if (present.size() < k) {
            throw std::invalid_argument("knn_impute: channel '" + series.channel_names()[c] + "' has fewer than " +
                                        std::to_string(k) + " present values");
        }
        for (const Gap& g : runs) {
            for (std::size_t i = g.start; i < g.start + g.length; ++i) {
                auto right = static_cast<std::size_t>(std::lower_bound(present.begin(), present.end(), i) -
                                                      present.begin());
                std::size_t left = right;  // one past the next left candidate
                double sum = 0.0;
                for (std::size_t taken = 0; taken < k; ++taken) {
                    const bool has_left = left > 0;
                    const bool has_right = right < present.size();
                    bool take_left = has_left;
                    if (has_left && has_right) take_left = i - present[left - 1] <= present[right] - i;
                    if (take_left) {
                        sum += *src[present[--left]];
                    } else {
                        sum += *src[present[right++]];
                    }
                }
                out[c][i] = sum / static_cast<double>(k);
            }
        }
    }
    return HourlySeries(series.start(), series.channel_names(), std::move(out));
}

namespace {

struct Anchors {
    std::size_t left;
    double left_value;
    std::size_t right;
    double right_value;

    double at(std::size_t i) const {
        const double span = static_cast<double>(right - left);
        return left_value + (right_value - left_value) * static_cast<double>(i - left) / span;
    }
};

std::optional<Anchors> find_anchors(const Channel& ch, IndexRange range) {
    std::optional<std::size_t> left, right;
    for (std::size_t j = range.begin; j-- > 0;) {
        if (ch[j]) {
            left = j;
            break;
        }
    }
    for (std::size_t j = range.end; j < ch.size(); ++j) {
        if (ch[j]) {
            right = j;
            break;
        }
    }
    if (!left || !right) return std::nullopt;
    return Anchors{*left, *ch[*left], *right, *ch[*right]};
}

void check_range(const HourlySeries& series, IndexRange range, std::size_t channel) {
    if (range.end > series.size() || range.begin > range.end) {
        throw std::out_of_range("imputation range outside series");
    }
    if (channel >= series.channel_count()) throw std::out_of_range("imputation channel out of range");
}

}  // namespace

HourlySeries linear_impute(const HourlySeries& series, IndexRange range, std::size_t channel) {
    check_range(series, range, channel);
    const Channel& src = series.channel(channel);
    const auto anchors = find_anchors(src, range);
    if (!anchors) throw std::invalid_argument("linear_impute: gap touches the series boundary");
    Channel out = src;
    for (std::size_t i = range.begin; i < range.end; ++i) {
        if (!out[i]) out[i] = anchors->at(i);
    }
    return series.with_channel(channel, std::move(out));
}

SeasonalProfile build_seasonal_profile(const HourlySeries& series, IndexRange exclude, std::size_t channel) {
    const Channel& ch = series.channel(channel);
    SeasonalProfile profile;
    for (std::size_t i = 0; i < ch.size(); ++i) {
        if (exclude.contains(i) || !ch[i]) continue;
        const CivilHour t = civil_hour(series.timestamp_at(i));
        const std::size_t k = SeasonalProfile::cell(t.weekday, t.hour);
        // Running mean keeps constant cells bit-exact.
        ++profile.count[k];
        profile.mean[k] += (*ch[i] - profile.mean[k]) / static_cast<double>(profile.count[k]);
    }
    return profile;
}

HourlySeries seasonal_impute(const HourlySeries& series, IndexRange range, const SeasonalProfile& profile,
                             std::size_t channel) {
    check_range(series, range, channel);
    const Channel& src = series.channel(channel);
    Channel out = src;
    std::optional<Anchors> anchors;
    bool anchors_searched = false;
    std::optional<double> global_mean;
    bool mean_computed = false;

    for (std::size_t i = range.begin; i < range.end; ++i) {
        if (out[i]) continue;
        const CivilHour t = civil_hour(series.timestamp_at(i));
        if (auto v = profile.at(t.weekday, t.hour)) {
            out[i] = *v;
            continue;
        }
        if (!anchors_searched) {
            anchors = find_anchors(src, range);
            anchors_searched = true;
        }
        if (anchors) {
            out[i] = anchors->at(i);
            continue;
        }
        if (!mean_computed) {
            double mean = 0.0;
            std::size_t n = 0;
            for (std::size_t j = 0; j < src.size(); ++j) {
                if (range.contains(j) || !src[j]) continue;
                ++n;
                mean += (*src[j] - mean) / static_cast<double>(n);
            }
            if (n > 0) global_mean = mean;
            mean_computed = true;
        }
        if (!global_mean) {
            throw std::invalid_argument("seasonal_impute: empty profile cell and no fallback for channel '" +
                                        series.channel_names()[channel] + "'");
        }
        out[i] = *global_mean;
    }
    return series.with_channel(channel, std::move(out));
}

HourlySeries impute_range(const HourlySeries& series, IndexRange range, std::size_t channel, ImputeMethod method) {
    switch (method) {
        case ImputeMethod::Linear: return linear_impute(series, range, channel);
        case ImputeMethod::Seasonal:
            return seasonal_impute(series, range, build_seasonal_profile(series, range, channel), channel);
    }
    throw std::invalid_argument("impute_range: unknown method");
}

HourlySeries fill_long_gaps(const HourlySeries& series, ImputeMethod method, std::size_t min_length) {
    HourlySeries out = series;
    for (std::size_t c = 0; c < series.channel_count(); ++c) {
        const std::vector<Gap> runs = missing_runs(series.channel(c));
        if (runs.empty()) continue;
        const SeasonalProfile profile = build_seasonal_profile(series, {0, 0}, c);
        for (const Gap& g : runs) {
            if (g.length <= min_length) continue;
            const IndexRange range{g.start, g.start + g.length};
            if (method == ImputeMethod::Seasonal) {
                out = seasonal_impute(out, range, profile, c);
            } else {
                out = linear_impute(out, range, c);
            }
        }
    }
    return out;
}

Histogram make_histogram(const std::vector<double>& values, double lo, double hi, std::size_t bins) {
    if (bins == 0) throw std::invalid_argument("make_histogram: need at least one bin");
    Histogram h;
    if (!(hi > lo)) {
        lo -= 0.5;
        hi = lo + 1.0;
    }
    h.lo = lo;
    h.bin_width = (hi - lo) / static_cast<double>(bins);
    h.counts.assign(bins, 0);
    for (double v : values) {
        double pos = std::floor((v - lo) / h.bin_width);
        pos = std::clamp(pos, 0.0, static_cast<double>(bins - 1));
        ++h.counts[static_cast<std::size_t>(pos)];
    }
    return h;
}

double earth_movers_distance(const Histogram& a, const Histogram& b) {
    if (a.counts.size() != b.counts.size()) throw std::invalid_argument("earth_movers_distance: bin mismatch");
    double total_a = 0.0, total_b = 0.0;
    for (auto c : a.counts) total_a += static_cast<double>(c);
    for (auto c : b.counts) total_b += static_cast<double>(c);
    if (total_a == 0.0 || total_b == 0.0) {
        if (total_a == total_b) return 0.0;
        throw std::invalid_argument("earth_movers_distance: one histogram is empty");
    }
    double cdf_a = 0.0, cdf_b = 0.0, distance = 0.0;
    for (std::size_t i = 0; i < a.counts.size(); ++i) {
        cdf_a += static_cast<double>(a.counts[i]) / total_a;
        cdf_b += static_cast<double>(b.counts[i]) / total_b;
        distance += std::abs(cdf_a - cdf_b);
    }
    return distance * a.bin_width;
}

ImputationTrial run_imputation_trial(const HourlySeries& series, IndexRange mask,
                                     const std::vector<ImputeMethod>& methods, std::size_t channel) {
    check_range(series, mask, channel);
    if (mask.empty() || mask.begin == 0 || mask.end >= series.size()) {
        throw std::invalid_argument("run_imputation_trial: mask must be non-empty and interior");
    }
    const Channel& src = series.channel(channel);
    ImputationTrial trial;
    trial.masked_range = mask;
    for (std::size_t i = mask.begin; i < mask.end; ++i) {
        if (!src[i]) throw std::invalid_argument("run_imputation_trial: mask overlaps missing data");
        trial.truth.push_back(*src[i]);
    }
    Channel masked = src;
    for (std::size_t i = mask.begin; i < mask.end; ++i) masked[i].reset();
    const HourlySeries holdout = series.with_channel(channel, std::move(masked));

    const auto [lo, hi] = std::minmax_element(trial.truth.begin(), trial.truth.end());
    trial.truth_histogram = make_histogram(trial.truth, *lo, *hi, kTrialHistogramBins);

    for (ImputeMethod m : methods) {
        const HourlySeries filled = impute_range(holdout, mask, channel, m);
        MethodScore score;
        score.method = m;
        double sq = 0.0, abs_sum = 0.0;
        for (std::size_t i = mask.begin; i < mask.end; ++i) {
            const double v = *filled.channel(channel)[i];
            const double e = v - trial.truth[i - mask.begin];
            sq += e * e;
            abs_sum += std::abs(e);
            score.imputed.push_back(v);
        }
        const auto n = static_cast<double>(mask.size());
        score.rmse = std::sqrt(sq / n);
        score.mae = abs_sum / n;
        score.histogram = make_histogram(score.imputed, *lo, *hi, kTrialHistogramBins);
        score.distribution_distance = earth_movers_distance(trial.truth_histogram, score.histogram);
        trial.method_results.push_back(std::move(score));
    }
    return trial;
}

ImputeMethod choose_method(const ImputationTrial& trial) {
    if (trial.method_results.empty()) throw std::invalid_argument("choose_method: trial has no results");
    const MethodScore* best = &trial.method_results.front();
    for (const auto& s : trial.method_results) {
        if (s.distribution_distance < best->distribution_distance ||
            (s.distribution_distance == best->distribution_distance && s.rmse < best->rmse)) {
            best = &s;
        }
    }
    return best->method;
}

}  // namespace loadfc
