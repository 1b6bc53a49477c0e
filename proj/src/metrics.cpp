#include "loadfc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>
#include <stdexcept>

#include "loadfc/quantile_loss.hpp"
#include "csv_util.hpp"

namespace loadfc {

const std::vector<double>& ForecastDistribution::median() const {
    if (levels.empty()) throw std::logic_error("ForecastDistribution has no levels");
    std::size_t best = 0;
    for (std::size_t k = 1; k < levels.size(); ++k) {
        if (std::abs(levels[k] - 0.5) < std::abs(levels[best] - 0.5)) best = k;
    }
    return values[best];
}

void ForecastDistribution::validate() const {
    if (levels.empty() || levels.size() != values.size()) {
        throw std::invalid_argument("ForecastDistribution: levels and values disagree");
    }
    for (std::size_t k = 0; k < levels.size(); ++k) {
        if (!(levels[k] > 0.0 && levels[k] < 1.0)) throw std::invalid_argument("quantile level outside (0,1)");
        if (k > 0 && !(levels[k] > levels[k - 1])) throw std::invalid_argument("quantile levels not increasing");
        if (values[k].size() != values[0].size()) throw std::invalid_argument("quantile rows differ in length");
    }
    if (!timestamps.empty() && timestamps.size() != size()) {
        throw std::invalid_argument("ForecastDistribution: timestamps misaligned");
    }
    for (std::size_t t = 0; t < size(); ++t) {
        for (std::size_t k = 1; k < levels.size(); ++k) {
            if (values[k][t] < values[k - 1][t]) throw std::invalid_argument("crossed quantiles");
        }
    }
}

void sort_quantiles(ForecastDistribution& dist) {
    std::vector<double> row(dist.values.size());
    for (std::size_t t = 0; t < dist.size(); ++t) {
        for (std::size_t k = 0; k < row.size(); ++k) row[k] = dist.values[k][t];
        std::sort(row.begin(), row.end());
        for (std::size_t k = 0; k < row.size(); ++k) dist.values[k][t] = row[k];
    }
}

namespace {

void check_pair(std::span<const double> y, std::size_t n) {
    if (y.empty()) throw std::invalid_argument("metric on empty input");
    if (y.size() != n) throw std::invalid_argument("metric inputs differ in length");
}

}  // namespace

double rmse(std::span<const double> y, std::span<const double> yhat) {
    check_pair(y, yhat.size());
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double e = y[i] - yhat[i];
        s += e * e;
    }
    return std::sqrt(s / static_cast<double>(y.size()));
}

double mae(std::span<const double> y, std::span<const double> yhat) {
    check_pair(y, yhat.size());
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += std::abs(y[i] - yhat[i]);
    return s / static_cast<double>(y.size());
}

double average_quantile_score(std::span<const double> y, const ForecastDistribution& dist) {
    check_pair(y, dist.size());
    double s = 0.0;
    for (std::size_t k = 0; k < dist.levels.size(); ++k) {
        for (std::size_t i = 0; i < y.size(); ++i) s += pinball_loss(y[i], dist.values[k][i], dist.levels[k]);
    }
    return s / static_cast<double>(y.size() * dist.levels.size());
}

double picp(std::span<const double> y, const ForecastDistribution& dist) {
    check_pair(y, dist.size());
    const auto& lo = dist.lower();
    const auto& hi = dist.upper();
    std::size_t covered = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (lo[i] <= y[i] && y[i] <= hi[i]) ++covered;
    }
    return 100.0 * static_cast<double>(covered) / static_cast<double>(y.size());
}

const ReportEntry& EvalReport::row(const std::string& model) const {
    for (const auto& r : rows) {
        if (r.model == model) return r;
    }
    throw std::out_of_range("no report row for model '" + model + "'");
}

ReportEntry score_point(const std::string& model, std::span<const double> y, std::span<const double> yhat) {
    return {model, rmse(y, yhat), mae(y, yhat), std::nullopt, std::nullopt};
}

ReportEntry score_distribution(const std::string& model, std::span<const double> y, const ForecastDistribution& dist) {
    const auto& mid = dist.median();
    return {model, rmse(y, mid), mae(y, mid), picp(y, dist), average_quantile_score(y, dist)};
}

EvalReport assemble_report(std::vector<ReportEntry> entries) {
    if (entries.empty()) throw std::invalid_argument("assemble_report: no entries");
    std::set<std::string> seen;
    for (const auto& e : entries) {
        if (!seen.insert(e.model).second) throw std::invalid_argument("assemble_report: duplicate model '" + e.model + "'");
        if (e.picp && (*e.picp < 0.0 || *e.picp > 100.0)) throw std::invalid_argument("PICP outside [0, 100]");
    }
    return EvalReport{std::move(entries)};
}

namespace {

std::string fixed4(double v) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(4) << v;
    return s.str();
}

std::string picp_cell(const std::optional<double>& v) {
    if (!v) return "N/A";
    std::ostringstream s;
    s << std::fixed << std::setprecision(2) << *v << '%';
    return s.str();
}

std::string opt4(const std::optional<double>& v) { return v ? fixed4(*v) : "N/A"; }

}  // namespace

std::string report_to_csv(const EvalReport& report) {
    std::ostringstream out;
    out << "Model,RMSE,MAE,PICP,AQS\n";
    for (const auto& r : report.rows) {
        out << r.model << ',' << fixed4(r.rmse) << ',' << fixed4(r.mae) << ',' << picp_cell(r.picp) << ','
            << opt4(r.aqs) << '\n';
    }
    return out.str();
}

EvalReport report_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    if (detail::trim(line) != "Model,RMSE,MAE,PICP,AQS") throw std::invalid_argument("not a report CSV");
    std::vector<ReportEntry> rows;
    std::vector<std::string_view> cells;
    auto optional_number = [](std::string_view s) -> std::optional<double> {
        s = detail::trim(s);
        if (s == "N/A") return std::nullopt;
        if (!s.empty() && s.back() == '%') s.remove_suffix(1);
        return std::stod(std::string(s));
    };
    while (std::getline(in, line)) {
        if (detail::trim(line).empty()) continue;
        detail::split_csv(line, cells);
        if (cells.size() != 5) throw std::invalid_argument("report CSV row has wrong field count");
        rows.push_back({std::string(detail::trim(cells[0])), std::stod(std::string(cells[1])),
                        std::stod(std::string(cells[2])), optional_number(cells[3]), optional_number(cells[4])});
    }
    return assemble_report(std::move(rows));
}

std::string report_to_text(const EvalReport& report) {
    const std::vector<std::string> header = {"Model", "RMSE", "MAE", "PICP (90%)", "Avg. Quantile Score"};
    std::vector<std::vector<std::string>> cells;
    for (const auto& r : report.rows) {
        cells.push_back({r.model, fixed4(r.rmse), fixed4(r.mae), picp_cell(r.picp), opt4(r.aqs)});
    }
    std::vector<std::size_t> width(header.size());
    for (std::size_t c = 0; c < header.size(); ++c) {
        width[c] = header[c].size();
        for (const auto& row : cells) width[c] = std::max(width[c], row[c].size());
    }
    std::ostringstream out;
    auto emit = [&](const std::vector<std::string>& row) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c == 0) {
                out << std::left << std::setw(static_cast<int>(width[c])) << row[c];
            } else {
                out << "  " << std::right << std::setw(static_cast<int>(width[c])) << row[c];
            }
        }
        out << '\n';
    };
    emit(header);
    std::size_t total = 0;
    for (auto w : width) total += w;
    out << std::string(total + 2 * (width.size() - 1), '-') << '\n';
    for (const auto& row : cells) emit(row);
    return out.str();
}

}  // namespace loadfc
