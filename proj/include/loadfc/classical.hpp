#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "loadfc/types.hpp"

namespace loadfc {

// ---------------------------------------------------------------------------
// Seasonal naive
// ---------------------------------------------------------------------------

/// forecast[t] = value one period earlier, recursing into the forecast beyond one period.
std::vector<double> seasonal_naive_forecast(std::span<const double> history, std::size_t period,
                                            std::size_t horizon);

// ---------------------------------------------------------------------------
// Differencing
// ---------------------------------------------------------------------------

/// Coefficients of (1 - B)^d (1 - B^s)^D, index = lag; element 0 is 1.
std::vector<double> differencing_polynomial(std::size_t d, std::size_t D, std::size_t s);

struct DifferencingState {
    std::size_t d = 0;
    std::size_t D = 0;
    std::size_t s = 1;
    std::vector<double> prefix;  // the first d + D*s original values
};

struct Differenced {
    std::vector<double> values;
    DifferencingState state;
};

Differenced difference(std::span<const double> series, std::size_t d, std::size_t D, std::size_t s);
std::vector<double> integrate(std::span<const double> differenced, const DifferencingState& state);

/// Extends `history` (original scale) with values whose differences equal `future_diffs`.
std::vector<double> integrate_forecast(std::span<const double> history, std::span<const double> future_diffs,
                                       std::size_t d, std::size_t D, std::size_t s);

// ---------------------------------------------------------------------------
// Nelder-Mead simplex
// ---------------------------------------------------------------------------

struct NelderMeadOptions {
    std::size_t max_iterations = 500;
    double tolerance = 1e-8;  // relative spread of simplex objective values
    double initial_step = 0.1;
};

struct NelderMeadResult {
    std::vector<double> x;
    double value = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
    std::vector<double> best_history;  // best objective after each iteration
};

NelderMeadResult nelder_mead(const std::function<double(std::span<const double>)>& objective,
                             std::vector<double> x0, const NelderMeadOptions& options = {});

// ---------------------------------------------------------------------------
// SARIMAX-lite
// ---------------------------------------------------------------------------

struct SarimaxOrder {
    std::size_t p = 0, d = 0, q = 0;
    std::size_t P = 0, D = 0, Q = 0;
    std::size_t s = 1;

    void validate() const;
    std::size_t arma_parameter_count() const { return p + q + P + Q; }
    std::size_t differencing_span() const { return d + D * s; }
    bool has_intercept() const { return d + D == 0; }
};

struct SarimaxDiagnostics {
    bool converged = true;
    std::size_t iterations = 0;
    bool near_unit_root = false;
    std::vector<std::string> warnings;
};

/// Regression with seasonal ARMA errors on the differenced series:
///   w_t = c + beta . z_t + n_t,   phi(B) Phi(B^s) n_t = theta(B) Theta(B^s) e_t
/// where w, z are the differenced target and exogenous columns.
struct SarimaxModel {
    SarimaxOrder order;
    std::vector<double> ar, ma, sar, sma;
    std::vector<double> beta;
    double intercept = 0.0;
    double sigma2 = 0.0;
    double css = 0.0;
    std::size_t n_effective = 0;

    // Forecast state
    std::vector<double> endog_tail;   // last d + D*s original-scale values
    DenseMatrix exog_tail;            // last d + D*s exogenous rows
    std::vector<double> noise_tail;   // last AR-span values of n_t
    std::vector<double> shock_tail;   // last MA-span residuals e_t

    SarimaxDiagnostics diagnostics;
};

/// Expanded polynomial lags: n_t = sum a_j n_{t-j} + e_t + sum b_j e_{t-j}.
std::vector<double> expanded_ar(const SarimaxModel& m);
std::vector<double> expanded_ma(const SarimaxModel& m);

/// Conditional-sum-of-squares fit. `exog` may have zero columns; rows must match endog.
SarimaxModel sarimax_fit(std::span<const double> endog, const DenseMatrix& exog, const SarimaxOrder& order,
                         const NelderMeadOptions& options = {});

/// Concentrated CSS objective (intercept and beta solved by least squares) for given ARMA parameters.
double sarimax_css(std::span<const double> endog, const DenseMatrix& exog, const SarimaxOrder& order,
                   std::span<const double> arma_params);

std::vector<double> sarimax_forecast(const SarimaxModel& model, std::size_t steps,
                                     const DenseMatrix& exog_future = {});

/// Moduli of the inverse roots of 1 - c_1 z - ... - c_p z^p.
std::vector<double> inverse_root_moduli(std::span<const double> coefficients);

}  // namespace loadfc
