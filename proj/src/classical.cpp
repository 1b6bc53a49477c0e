#include "loadfc/classical.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace loadfc {

std::vector<double> seasonal_naive_forecast(std::span<const double> history, std::size_t period,
                                            std::size_t horizon) {
    if (period == 0) throw std::invalid_argument("seasonal_naive_forecast: period must be >= 1");
    if (history.size() < period) {
        throw std::invalid_argument("seasonal_naive_forecast: history shorter than one period");
    }
    std::vector<double> path(history.end() - static_cast<std::ptrdiff_t>(period), history.end());
    path.reserve(period + horizon);
    for (std::size_t h = 0; h < horizon; ++h) path.push_back(path[h]);
    return {path.begin() + static_cast<std::ptrdiff_t>(period), path.end()};
}

std::vector<double> differencing_polynomial(std::size_t d, std::size_t D, std::size_t s) {
    std::vector<double> poly{1.0};
    auto multiply = [&](std::size_t lag) {
        std::vector<double> next(poly.size() + lag, 0.0);
        for (std::size_t i = 0; i < poly.size(); ++i) {
            next[i] += poly[i];
            next[i + lag] -= poly[i];
        }
        poly = std::move(next);
    };
    for (std::size_t i = 0; i < d; ++i) multiply(1);
    for (std::size_t i = 0; i < D; ++i) multiply(s);
    return poly;
}

namespace {

void check_differencing(std::size_t D, std::size_t s) {
    if (s == 0) throw std::invalid_argument("season length must be >= 1");
    if (D > 0 && s < 2) throw std::invalid_argument("seasonal differencing needs s > 1");
}

}  // namespace

Differenced difference(std::span<const double> series, std::size_t d, std::size_t D, std::size_t s) {
    check_differencing(D, s);
    const std::vector<double> poly = differencing_polynomial(d, D, s);
    const std::size_t span = poly.size() - 1;
    if (series.size() <= span) throw std::invalid_argument("difference: series too short for the requested order");
    Differenced out;
    out.state = {d, D, s, std::vector<double>(series.begin(), series.begin() + static_cast<std::ptrdiff_t>(span))};
    out.values.reserve(series.size() - span);
    for (std::size_t t = span; t < series.size(); ++t) {
        double w = series[t];
        for (std::size_t j = 1; j < poly.size(); ++j) {
            if (poly[j] != 0.0) w += poly[j] * series[t - j];
        }
        out.values.push_back(w);
    }
    return out;
}

std::vector<double> integrate_forecast(std::span<const double> history, std::span<const double> future_diffs,
                                       std::size_t d, std::size_t D, std::size_t s) {
    check_differencing(D, s);
    const std::vector<double> poly = differencing_polynomial(d, D, s);
    const std::size_t span = poly.size() - 1;
    if (history.size() < span) throw std::invalid_argument("integrate: history shorter than differencing span");
    std::vector<double> path(history.end() - static_cast<std::ptrdiff_t>(span), history.end());
    path.reserve(span + future_diffs.size());
    for (double w : future_diffs) {
        const std::size_t t = path.size();
        double y = w;
        for (std::size_t j = 1; j < poly.size(); ++j) {
            if (poly[j] != 0.0) y -= poly[j] * path[t - j];
        }
        path.push_back(y);
    }
    return {path.begin() + static_cast<std::ptrdiff_t>(span), path.end()};
}

std::vector<double> integrate(std::span<const double> differenced, const DifferencingState& state) {
    std::vector<double> out = state.prefix;
    const std::vector<double> tail = integrate_forecast(state.prefix, differenced, state.d, state.D, state.s);
    out.insert(out.end(), tail.begin(), tail.end());
    return out;
}

NelderMeadResult nelder_mead(const std::function<double(std::span<const double>)>& objective,
                             std::vector<double> x0, const NelderMeadOptions& options) {
    const std::size_t n = x0.size();
    auto eval = [&](const std::vector<double>& x) {
        const double v = objective(x);
        return std::isfinite(v) ? v : std::numeric_limits<double>::max();
    };

    NelderMeadResult result;
    if (n == 0) {
        result.x = x0;
        result.value = eval(x0);
        result.converged = true;
        return result;
    }

    std::vector<std::vector<double>> simplex(n + 1, x0);
    for (std::size_t i = 0; i < n; ++i) simplex[i + 1][i] += options.initial_step;
    std::vector<double> values(n + 1);
    for (std::size_t i = 0; i <= n; ++i) values[i] = eval(simplex[i]);

    std::vector<std::size_t> order(n + 1);
    std::vector<double> centroid(n), trial(n), trial2(n);

    auto sort_simplex = [&] {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
        std::vector<std::vector<double>> s2;
        std::vector<double> v2;
        for (std::size_t i : order) {
            s2.push_back(simplex[i]);
            v2.push_back(values[i]);
        }
        simplex = std::move(s2);
        values = std::move(v2);
    };
    auto point = [&](double coef, const std::vector<double>& worst, std::vector<double>& out) {
        for (std::size_t j = 0; j < n; ++j) out[j] = centroid[j] + coef * (worst[j] - centroid[j]);
    };

    sort_simplex();
    while (true) {
        const double spread = values[n] - values[0];
        if (spread <= options.tolerance * std::max(1.0, std::abs(values[0]))) {
            result.converged = true;
            break;
        }
        if (result.iterations >= options.max_iterations) break;
        ++result.iterations;

        std::fill(centroid.begin(), centroid.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) centroid[j] += simplex[i][j] / static_cast<double>(n);
        }
        const std::vector<double>& worst = simplex[n];

        point(-1.0, worst, trial);  // reflection
        const double fr = eval(trial);
        if (fr < values[0]) {
            point(-2.0, worst, trial2);  // expansion
            const double fe = eval(trial2);
            if (fe < fr) {
                simplex[n] = trial2;
                values[n] = fe;
            } else {
                simplex[n] = trial;
                values[n] = fr;
            }
        } else if (fr < values[n - 1]) {
            simplex[n] = trial;
            values[n] = fr;
        } else {
            const bool outside = fr < values[n];
            point(outside ? -0.5 : 0.5, worst, trial2);  // contraction
            const double fc = eval(trial2);
            if (fc < (outside ? fr : values[n])) {
                simplex[n] = trial2;
                values[n] = fc;
            } else {
                for (std::size_t i = 1; i <= n; ++i) {  // shrink towards the best vertex
                    for (std::size_t j = 0; j < n; ++j) simplex[i][j] = simplex[0][j] + 0.5 * (simplex[i][j] - simplex[0][j]);
                    values[i] = eval(simplex[i]);
                }
            }
        }
        sort_simplex();
        result.best_history.push_back(values[0]);
    }
    result.x = simplex[0];
    result.value = values[0];
    return result;
}

void SarimaxOrder::validate() const {
    if (s < 1) throw std::invalid_argument("SarimaxOrder: s must be >= 1");
    if (P + D + Q > 0 && s < 2) throw std::invalid_argument("SarimaxOrder: seasonal terms need s > 1");
}

namespace {

/// (1 - sum c_i B^{i*lag}) expanded; returns lag-indexed coefficients a_j with the sign convention
/// poly = 1 - sum a_j B^j.
std::vector<double> multiply_lag_polys(std::span<const double> c1, std::span<const double> c2, std::size_t lag2,
                                       double sign) {
    // Represent as full polynomials with leading 1.
    std::vector<double> p1(c1.size() + 1, 0.0), p2(c2.size() * lag2 + 1, 0.0);
    p1[0] = 1.0;
    p2[0] = 1.0;
    for (std::size_t i = 0; i < c1.size(); ++i) p1[i + 1] = sign * c1[i];
    for (std::size_t i = 0; i < c2.size(); ++i) p2[(i + 1) * lag2] = sign * c2[i];
    std::vector<double> prod(p1.size() + p2.size() - 1, 0.0);
    for (std::size_t i = 0; i < p1.size(); ++i) {
        if (p1[i] == 0.0) continue;
        for (std::size_t j = 0; j < p2.size(); ++j) prod[i + j] += p1[i] * p2[j];
    }
    std::vector<double> out(prod.size() - 1);
    for (std::size_t j = 1; j < prod.size(); ++j) out[j - 1] = sign * prod[j];
    return out;
}

struct ArmaPolys {
    std::vector<double> ar;  // a_1..a_pa
    std::vector<double> ma;  // b_1..b_qb
};

ArmaPolys expand(const SarimaxOrder& o, std::span<const double> ar, std::span<const double> ma,
                 std::span<const double> sar, std::span<const double> sma) {
    // AR: 1 - sum a_j B^j = (1 - sum phi B^i)(1 - sum Phi B^{is})
    // MA: 1 + sum b_j B^j = (1 + sum theta B^i)(1 + sum Theta B^{is})
    return {multiply_lag_polys(ar, sar, o.s, -1.0), multiply_lag_polys(ma, sma, o.s, 1.0)};
}

struct ParamSplit {
    std::span<const double> ar, ma, sar, sma;
};

ParamSplit split_params(const SarimaxOrder& o, std::span<const double> x) {
    return {x.subspan(0, o.p), x.subspan(o.p, o.q), x.subspan(o.p + o.q, o.P), x.subspan(o.p + o.q + o.P, o.Q)};
}

/// Inverse ARMA filter with zero pre-sample shocks: e_t = x_t - sum a_j x_{t-j} - sum b_j e_{t-j}, t >= start.
void arma_filter(std::span<const double> x, const ArmaPolys& polys, std::size_t start, std::vector<double>& e) {
    e.assign(x.size(), 0.0);
    const std::size_t pa = polys.ar.size();
    const std::size_t qb = polys.ma.size();
    for (std::size_t t = start; t < x.size(); ++t) {
        double v = x[t];
        for (std::size_t j = 1; j <= pa; ++j) v -= polys.ar[j - 1] * x[t - j];
        for (std::size_t j = 1; j <= qb && j <= t; ++j) v -= polys.ma[j - 1] * e[t - j];
        e[t] = v;
    }
}

/// Least squares by modified Gram-Schmidt; near-dependent columns get coefficient 0.
std::vector<double> least_squares(const std::vector<std::vector<double>>& cols, std::span<const double> y,
                                  std::size_t begin) {
    const std::size_t k = cols.size();
    const std::size_t n = y.size();
    std::vector<std::vector<double>> q;
    std::vector<std::size_t> kept;
    std::vector<std::vector<double>> r(k, std::vector<double>(k, 0.0));
    for (std::size_t c = 0; c < k; ++c) {
        std::vector<double> v(cols[c].begin() + static_cast<std::ptrdiff_t>(begin), cols[c].end());
        double norm0 = 0.0;
        for (double a : v) norm0 += a * a;
        norm0 = std::sqrt(norm0);
        for (std::size_t qi = 0; qi < q.size(); ++qi) {
            double dot = 0.0;
            for (std::size_t i = 0; i < v.size(); ++i) dot += q[qi][i] * v[i];
            r[qi][c] = dot;
            for (std::size_t i = 0; i < v.size(); ++i) v[i] -= dot * q[qi][i];
        }
        double norm = 0.0;
        for (double a : v) norm += a * a;
        norm = std::sqrt(norm);
        if (norm0 == 0.0 || norm <= 1e-10 * norm0) continue;
        for (double& a : v) a /= norm;
        r[q.size()][c] = norm;
        q.push_back(std::move(v));
        kept.push_back(c);
    }
    std::vector<double> qty(q.size(), 0.0);
    for (std::size_t qi = 0; qi < q.size(); ++qi) {
        for (std::size_t i = 0; i < n - begin; ++i) qty[qi] += q[qi][i] * y[begin + i];
    }
    std::vector<double> coef(k, 0.0);
    for (std::size_t qi = q.size(); qi-- > 0;) {
        double v = qty[qi];
        for (std::size_t qj = qi + 1; qj < q.size(); ++qj) v -= r[qi][kept[qj]] * coef[kept[qj]];
        coef[kept[qi]] = v / r[qi][kept[qi]];
    }
    return coef;
}

struct DifferencedProblem {
    std::vector<double> w;
    std::vector<std::vector<double>> regressors;  // intercept column first when present
};

DifferencedProblem prepare(std::span<const double> endog, const DenseMatrix& exog, const SarimaxOrder& order) {
    order.validate();
    if (exog.cols() > 0 && exog.rows() != endog.size()) {
        throw std::invalid_argument("sarimax: exogenous rows do not match endogenous length");
    }
    DifferencedProblem p;
    p.w = difference(endog, order.d, order.D, order.s).values;
    if (order.has_intercept()) p.regressors.emplace_back(p.w.size(), 1.0);
    for (std::size_t c = 0; c < exog.cols(); ++c) {
        p.regressors.push_back(difference(exog.column(c), order.d, order.D, order.s).values);
    }
    return p;
}

struct CssEvaluation {
    double sse = 0.0;
    std::size_t n_effective = 0;
    std::vector<double> coef;  // intercept (if any) then beta
    std::vector<double> residuals;
};

CssEvaluation evaluate_css(const DifferencedProblem& prob, const ArmaPolys& polys) {
    const std::size_t start = polys.ar.size();
    CssEvaluation out;
    if (prob.w.size() <= start) {
        out.sse = std::numeric_limits<double>::infinity();
        return out;
    }
    std::vector<double> fw;
    arma_filter(prob.w, polys, start, fw);
    std::vector<std::vector<double>> fcols(prob.regressors.size());
    for (std::size_t c = 0; c < prob.regressors.size(); ++c) arma_filter(prob.regressors[c], polys, start, fcols[c]);
    out.coef = least_squares(fcols, fw, start);
    out.residuals = fw;
    for (std::size_t c = 0; c < fcols.size(); ++c) {
        if (out.coef[c] == 0.0) continue;
        for (std::size_t t = start; t < fw.size(); ++t) out.residuals[t] -= out.coef[c] * fcols[c][t];
    }
    out.n_effective = fw.size() - start;
    for (std::size_t t = start; t < fw.size(); ++t) out.sse += out.residuals[t] * out.residuals[t];
    if (!std::isfinite(out.sse)) out.sse = std::numeric_limits<double>::infinity();
    return out;
}

std::vector<double> durand_kerner_moduli(std::span<const double> monic_tail) {
    // Roots of z^p + m_1 z^{p-1} + ... + m_p.
    const std::size_t p = monic_tail.size();
    using C = std::complex<double>;
    std::vector<C> roots(p);
    const C seed(0.4, 0.9);
    C acc(1.0, 0.0);
    for (std::size_t i = 0; i < p; ++i) {
        roots[i] = acc;
        acc *= seed;
    }
    auto eval = [&](C z) {
        C v(1.0, 0.0);
        for (double m : monic_tail) v = v * z + m;
        return v;
    };
    for (int iter = 0; iter < 1000; ++iter) {
        double change = 0.0;
        for (std::size_t i = 0; i < p; ++i) {
            C denom(1.0, 0.0);
            for (std::size_t j = 0; j < p; ++j) {
                if (j != i) denom *= roots[i] - roots[j];
            }
            if (std::abs(denom) == 0.0) denom = C(1e-12, 0.0);
            const C delta = eval(roots[i]) / denom;
            roots[i] -= delta;
            change = std::max(change, std::abs(delta));
        }
        if (change < 1e-14) break;
    }
    std::vector<double> out;
    for (const C& r : roots) out.push_back(std::abs(r));
    return out;
}

}  // namespace

std::vector<double> inverse_root_moduli(std::span<const double> coefficients) {
    std::size_t p = coefficients.size();
    while (p > 0 && coefficients[p - 1] == 0.0) --p;
    if (p == 0) return {};
    if (p == 1) return {std::abs(coefficients[0])};
    // Inverse roots of 1 - sum c_i z^i are the roots of z^p - c_1 z^{p-1} - ... - c_p.
    std::vector<double> tail(p);
    for (std::size_t i = 0; i < p; ++i) tail[i] = -coefficients[i];
    return durand_kerner_moduli(tail);
}

std::vector<double> expanded_ar(const SarimaxModel& m) { return expand(m.order, m.ar, m.ma, m.sar, m.sma).ar; }
std::vector<double> expanded_ma(const SarimaxModel& m) { return expand(m.order, m.ar, m.ma, m.sar, m.sma).ma; }

double sarimax_css(std::span<const double> endog, const DenseMatrix& exog, const SarimaxOrder& order,
                   std::span<const double> arma_params) {
    if (arma_params.size() != order.arma_parameter_count()) {
        throw std::invalid_argument("sarimax_css: parameter count does not match order");
    }
    const DifferencedProblem prob = prepare(endog, exog, order);
    const auto sp = split_params(order, arma_params);
    const CssEvaluation ev = evaluate_css(prob, expand(order, sp.ar, sp.ma, sp.sar, sp.sma));
    return ev.n_effective > 0 ? ev.sse / static_cast<double>(ev.n_effective) : ev.sse;
}

SarimaxModel sarimax_fit(std::span<const double> endog, const DenseMatrix& exog, const SarimaxOrder& order,
                         const NelderMeadOptions& options) {
    const DifferencedProblem prob = prepare(endog, exog, order);
    const std::size_t free_params = order.arma_parameter_count() + prob.regressors.size();
    if (prob.w.size() <= 10 * std::max<std::size_t>(free_params, 1)) {
        throw std::invalid_argument("sarimax_fit: " + std::to_string(prob.w.size()) +
                                    " differenced observations are too few for " + std::to_string(free_params) +
                                    " parameters");
    }

    auto objective = [&](std::span<const double> x) {
        const auto sp = split_params(order, x);
        const CssEvaluation ev = evaluate_css(prob, expand(order, sp.ar, sp.ma, sp.sar, sp.sma));
        return ev.n_effective > 0 ? ev.sse / static_cast<double>(ev.n_effective) : ev.sse;
    };
    const NelderMeadResult nm = nelder_mead(objective, std::vector<double>(order.arma_parameter_count(), 0.0), options);

    SarimaxModel model;
    model.order = order;
    const auto sp = split_params(order, nm.x);
    model.ar.assign(sp.ar.begin(), sp.ar.end());
    model.ma.assign(sp.ma.begin(), sp.ma.end());
    model.sar.assign(sp.sar.begin(), sp.sar.end());
    model.sma.assign(sp.sma.begin(), sp.sma.end());

    const ArmaPolys polys = expand(order, model.ar, model.ma, model.sar, model.sma);
    const CssEvaluation ev = evaluate_css(prob, polys);
    std::size_t ci = 0;
    if (order.has_intercept()) model.intercept = ev.coef[ci++];
    model.beta.assign(ev.coef.begin() + static_cast<std::ptrdiff_t>(ci), ev.coef.end());
    model.css = ev.sse;
    model.n_effective = ev.n_effective;
    model.sigma2 = std::max(ev.sse / static_cast<double>(ev.n_effective), std::numeric_limits<double>::denorm_min());

    // Forecast state.
    const std::size_t span = order.differencing_span();
    model.endog_tail.assign(endog.end() - static_cast<std::ptrdiff_t>(span), endog.end());
    if (exog.cols() > 0) {
        std::vector<double> rows;
        for (std::size_t r = exog.rows() - span; r < exog.rows(); ++r) {
            const auto row = exog.row(r);
            rows.insert(rows.end(), row.begin(), row.end());
        }
        model.exog_tail = DenseMatrix(span, exog.cols(), std::move(rows));
    }
    std::vector<double> noise(prob.w.size());
    for (std::size_t t = 0; t < noise.size(); ++t) {
        double v = prob.w[t];
        for (std::size_t c = 0; c < prob.regressors.size(); ++c) v -= ev.coef[c] * prob.regressors[c][t];
        noise[t] = v;
    }
    const std::size_t pa = polys.ar.size();
    const std::size_t qb = polys.ma.size();
    model.noise_tail.assign(noise.end() - static_cast<std::ptrdiff_t>(std::min(pa, noise.size())), noise.end());
    std::vector<double> shocks(ev.residuals);
    for (std::size_t t = 0; t < std::min(pa, shocks.size()); ++t) shocks[t] = 0.0;
    model.shock_tail.assign(shocks.end() - static_cast<std::ptrdiff_t>(std::min(qb, shocks.size())), shocks.end());

    model.diagnostics.converged = nm.converged;
    model.diagnostics.iterations = nm.iterations;
    if (!nm.converged) {
        model.diagnostics.warnings.push_back("simplex did not converge within " +
                                             std::to_string(options.max_iterations) + " iterations");
    }
    for (const auto* coefs : {&model.ar, &model.sar}) {
        for (double modulus : inverse_root_moduli(*coefs)) {
            if (std::abs(modulus - 1.0) < 1e-3) {
                model.diagnostics.near_unit_root = true;
                model.diagnostics.warnings.push_back("autoregressive root within 1e-3 of the unit circle");
            } else if (modulus > 1.0) {
                model.diagnostics.warnings.push_back("non-stationary autoregressive root");
            }
        }
    }
    return model;
}

std::vector<double> sarimax_forecast(const SarimaxModel& model, std::size_t steps, const DenseMatrix& exog_future) {
    const SarimaxOrder& o = model.order;
    const std::size_t k = model.beta.size();
    if (k > 0 && (exog_future.rows() != steps || exog_future.cols() != k)) {
        throw std::invalid_argument("sarimax_forecast: exog_future must have " + std::to_string(steps) + " rows and " +
                                    std::to_string(k) + " columns");
    }
    const ArmaPolys polys = expand(o, model.ar, model.ma, model.sar, model.sma);
    const std::size_t pa = polys.ar.size();
    const std::size_t qb = polys.ma.size();
    if (model.noise_tail.size() < pa || model.shock_tail.size() < qb) {
        throw std::invalid_argument("sarimax_forecast: model state shorter than its polynomial lags");
    }

    // Differenced future exogenous values.
    std::vector<std::vector<double>> z(k);
    for (std::size_t c = 0; c < k; ++c) {
        std::vector<double> col;
        for (std::size_t r = 0; r < model.exog_tail.rows(); ++r) col.push_back(model.exog_tail(r, c));
        for (std::size_t r = 0; r < steps; ++r) col.push_back(exog_future(r, c));
        if (o.differencing_span() > 0) {
            z[c] = difference(col, o.d, o.D, o.s).values;
        } else {
            z[c] = std::move(col);
        }
    }

    std::vector<double> noise(model.noise_tail);
    std::vector<double> shocks(model.shock_tail);
    const std::size_t n0 = noise.size();
    const std::size_t e0 = shocks.size();
    std::vector<double> w(steps);
    for (std::size_t h = 0; h < steps; ++h) {
        double n = 0.0;
        for (std::size_t j = 1; j <= pa; ++j) n += polys.ar[j - 1] * noise[n0 + h - j];
        for (std::size_t j = 1; j <= qb; ++j) {
            if (j > h) n += polys.ma[j - 1] * shocks[e0 + h - j];
        }
        noise.push_back(n);
        shocks.push_back(0.0);
        double v = model.intercept + n;
        for (std::size_t c = 0; c < k; ++c) v += model.beta[c] * z[c][h];
        w[h] = v;
    }
    if (o.differencing_span() == 0) return w;
    return integrate_forecast(model.endog_tail, w, o.d, o.D, o.s);
}

}  // namespace loadfc
