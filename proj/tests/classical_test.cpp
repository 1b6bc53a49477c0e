#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "loadfc/classical.hpp"

using namespace loadfc;

namespace {

std::vector<double> simulate_ar1(double phi, std::size_t n, std::uint64_t seed, double c = 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> e(0.0, 1.0);
    std::vector<double> x(n);
    double prev = 0.0;
    for (std::size_t i = 0; i < 200 + n; ++i) {
        prev = c + phi * prev + e(rng);
        if (i >= 200) x[i - 200] = prev;
    }
    return x;
}

}  // namespace

TEST(SeasonalNaive, PeriodicSignalIsExact) {
    std::vector<double> signal(24 * 5);
    for (std::size_t i = 0; i < signal.size(); ++i) signal[i] = std::sin(static_cast<double>(i % 24)) * 300 + 500;
    const std::span<const double> history(signal.data(), 24 * 4);
    const auto f = seasonal_naive_forecast(history, 24, 24);
    for (std::size_t h = 0; h < 24; ++h) EXPECT_EQ(f[h], signal[24 * 4 + h]);
}

TEST(SeasonalNaive, SecondDayRepeatsFirst) {
    std::vector<double> history(30);
    std::iota(history.begin(), history.end(), 1.0);
    const auto f = seasonal_naive_forecast(history, 24, 48);
    ASSERT_EQ(f.size(), 48u);
    for (std::size_t h = 0; h < 24; ++h) EXPECT_EQ(f[h + 24], f[h]);
    EXPECT_EQ(f[0], history[history.size() - 24]);
}

TEST(SeasonalNaive, ShortHistoryThrows) {
    EXPECT_THROW(seasonal_naive_forecast(std::vector<double>(23, 1.0), 24, 1), std::invalid_argument);
}

TEST(Differencing, RampAndSeasonalCancellation) {
    EXPECT_EQ(difference(std::vector<double>{0, 1, 2, 3}, 1, 0, 1).values, (std::vector<double>{1, 1, 1}));
    std::vector<double> periodic(24 * 4);
    for (std::size_t i = 0; i < periodic.size(); ++i) periodic[i] = static_cast<double>((i * 7) % 24);
    for (double w : difference(periodic, 0, 1, 24).values) EXPECT_EQ(w, 0.0);
}

TEST(Differencing, PolynomialCoefficients) {
    EXPECT_EQ(differencing_polynomial(2, 0, 1), (std::vector<double>{1, -2, 1}));
    const auto p = differencing_polynomial(1, 1, 4);  // (1 - B)(1 - B^4)
    EXPECT_EQ(p, (std::vector<double>{1, -1, 0, 0, -1, 1}));
}

TEST(Differencing, Errors) {
    EXPECT_THROW(difference(std::vector<double>{1, 2}, 2, 0, 1), std::invalid_argument);
    EXPECT_THROW(difference(std::vector<double>(10, 1.0), 0, 1, 1), std::invalid_argument);
}

TEST(Differencing, RoundTripProperty) {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> ints(-5000, 5000);
    std::uniform_real_distribution<double> reals(-1000.0, 1000.0);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t d = trial % 3, D = (trial / 3) % 2, s = 2 + trial % 25;
        std::vector<double> x(d + D * s + 1 + trial);
        // Integer-valued series are exact in double arithmetic, so the round trip is bit-identical.
        for (auto& v : x) v = ints(rng);
        const Differenced diff = difference(x, d, D, s);
        EXPECT_EQ(integrate(diff.values, diff.state), x);
        for (auto& v : x) v = reals(rng);
        const Differenced diff2 = difference(x, d, D, s);
        const auto back = integrate(diff2.values, diff2.state);
        for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(back[i], x[i], 1e-6);
    }
}

TEST(NelderMead, MinimizesQuadratic) {
    auto f = [](std::span<const double> x) { return (x[0] - 3) * (x[0] - 3) + 10 * (x[1] + 1) * (x[1] + 1); };
    const auto r = nelder_mead(f, {0.0, 0.0}, {2000, 1e-14, 0.5});
    EXPECT_TRUE(r.converged);
    EXPECT_NEAR(r.x[0], 3.0, 1e-4);
    EXPECT_NEAR(r.x[1], -1.0, 1e-4);
}

TEST(NelderMead, BestValueNonIncreasingProperty) {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int trial = 0; trial < 30; ++trial) {
        const double a = u(rng), b = u(rng);
        auto rosen = [&](std::span<const double> x) {
            return (a - x[0]) * (a - x[0]) + 100 * (x[1] - x[0] * x[0]) * (x[1] - x[0] * x[0]) + b * b * x[2] * x[2];
        };
        const auto r = nelder_mead(rosen, {u(rng), u(rng), u(rng)}, {300, 1e-12, 0.3});
        for (std::size_t i = 1; i < r.best_history.size(); ++i) EXPECT_LE(r.best_history[i], r.best_history[i - 1]);
        EXPECT_EQ(r.best_history.back(), r.value);
    }
}

TEST(NelderMead, IterationCapReportsNonConvergence) {
    auto f = [](std::span<const double> x) { return (x[0] - 100) * (x[0] - 100); };
    const auto r = nelder_mead(f, {0.0}, {3, 1e-12, 0.1});
    EXPECT_FALSE(r.converged);
    EXPECT_EQ(r.iterations, 3u);
}

TEST(Sarimax, RecoversAr1Coefficient) {
    const auto x = simulate_ar1(0.7, 5000, 2024);
    SarimaxOrder order;
    order.p = 1;
    const SarimaxModel m = sarimax_fit(x, DenseMatrix{}, order);
    ASSERT_EQ(m.ar.size(), 1u);
    EXPECT_GE(m.ar[0], 0.6);
    EXPECT_LE(m.ar[0], 0.8);
    EXPECT_GT(m.sigma2, 0.0);
    EXPECT_NEAR(m.sigma2, 1.0, 0.1);
}

TEST(Sarimax, WhiteNoiseInterceptIsSampleMean) {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> e(5.0, 2.0);
    std::vector<double> x(2000);
    for (auto& v : x) v = e(rng);
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    const SarimaxModel m = sarimax_fit(x, DenseMatrix{}, SarimaxOrder{});
    EXPECT_NEAR(m.intercept, mean, 2.0 * 2.0 / std::sqrt(2000.0));
    EXPECT_NEAR(m.intercept, mean, 1e-9);
}

TEST(Sarimax, PerfectRegressor) {
    const auto x = simulate_ar1(0.3, 500, 5, 4.0);
    const DenseMatrix exog(x.size(), 1, x);
    const SarimaxModel m = sarimax_fit(x, exog, SarimaxOrder{});
    ASSERT_EQ(m.beta.size(), 1u);
    EXPECT_NEAR(m.beta[0], 1.0, 1e-9);
    EXPECT_LT(m.sigma2, 1e-18);
    EXPECT_GT(m.sigma2, 0.0);
}

TEST(Sarimax, ForecastClosedFormAr1) {
    SarimaxModel m;
    m.order.p = 1;
    m.ar = {0.5};
    m.noise_tail = {8.0};
    EXPECT_EQ(sarimax_forecast(m, 3), (std::vector<double>{4, 2, 1}));
}

TEST(Sarimax, ZeroCoefficientsGiveInterceptAndFlatIntegration) {
    SarimaxModel c;
    c.intercept = 12.5;
    EXPECT_EQ(sarimax_forecast(c, 4), std::vector<double>(4, 12.5));

    SarimaxModel level;
    level.order.d = 1;
    level.endog_tail = {42.0};
    EXPECT_EQ(sarimax_forecast(level, 3), std::vector<double>(3, 42.0));
}

TEST(Sarimax, ForecastNeedsExogRows) {
    SarimaxModel m;
    m.beta = {1.0};
    EXPECT_THROW(sarimax_forecast(m, 2), std::invalid_argument);
    EXPECT_EQ(sarimax_forecast(m, 2, DenseMatrix(2, 1, std::vector<double>{3, 4})), (std::vector<double>{3, 4}));
}

TEST(Sarimax, SeasonalOrderExpandsMultiplicatively) {
    SarimaxModel m;
    m.order = {1, 0, 0, 1, 0, 0, 4};
    m.ar = {0.5};
    m.sar = {0.2};
    // (1 - 0.5B)(1 - 0.2B^4) = 1 - 0.5B - 0.2B^4 + 0.1B^5
    const auto a = expanded_ar(m);
    ASSERT_EQ(a.size(), 5u);
    EXPECT_DOUBLE_EQ(a[0], 0.5);
    EXPECT_DOUBLE_EQ(a[1], 0.0);
    EXPECT_DOUBLE_EQ(a[3], 0.2);
    EXPECT_DOUBLE_EQ(a[4], -0.1);
}

TEST(Sarimax, TooFewObservationsThrows) {
    SarimaxOrder order{1, 1, 1, 1, 1, 0, 24};
    EXPECT_THROW(sarimax_fit(std::vector<double>(50, 1.0), DenseMatrix{}, order), std::invalid_argument);
    EXPECT_THROW((SarimaxOrder{0, 0, 0, 1, 0, 0, 1}).validate(), std::invalid_argument);
}

TEST(Sarimax, CssMatchesFittedObjective) {
    const auto x = simulate_ar1(0.5, 800, 77);
    SarimaxOrder order;
    order.p = 1;
    const SarimaxModel m = sarimax_fit(x, DenseMatrix{}, order);
    EXPECT_NEAR(sarimax_css(x, DenseMatrix{}, order, m.ar), m.sigma2, 1e-12);
    EXPECT_LE(m.sigma2, sarimax_css(x, DenseMatrix{}, order, std::vector<double>{0.0}));
}

TEST(Sarimax, InverseRoots) {
    const auto one = inverse_root_moduli(std::vector<double>{0.5});
    ASSERT_EQ(one.size(), 1u);
    EXPECT_NEAR(one[0], 0.5, 1e-9);
    // 1 - 1.5z + 0.5z^2 = (1 - z)(1 - 0.5z)
    auto two = inverse_root_moduli(std::vector<double>{1.5, -0.5});
    std::sort(two.begin(), two.end());
    ASSERT_EQ(two.size(), 2u);
    EXPECT_NEAR(two[0], 0.5, 1e-6);
    EXPECT_NEAR(two[1], 1.0, 1e-6);
}

TEST(Sarimax, ForecastFiniteAndBoundedProperty) {
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
        const double phi = -0.8 + 0.2 * static_cast<double>(seed);
        const auto x = simulate_ar1(phi, 600, seed, 10.0);
        const SarimaxModel m = sarimax_fit(x, DenseMatrix{}, SarimaxOrder{1, 0, 1, 0, 0, 0, 1});
        const auto f = sarimax_forecast(m, 300);
        const double bound = 10.0 * *std::max_element(x.begin(), x.end(), [](double a, double b) {
            return std::abs(a) < std::abs(b);
        });
        for (double v : f) {
            EXPECT_TRUE(std::isfinite(v));
            EXPECT_LE(std::abs(v), std::abs(bound));
        }
    }
}

TEST(Sarimax, DailyOrderFitsAndForecastsFinite) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> e(0.0, 0.05);
    std::vector<double> x(720);
    DenseMatrix exog(720, 2);
    for (std::size_t t = 0; t < x.size(); ++t) {
        x[t] = 0.5 + 0.3 * std::sin(2 * M_PI * static_cast<double>(t % 24) / 24.0) + e(rng);
        exog(t, 0) = static_cast<double>(t % 24);
        exog(t, 1) = static_cast<double>((t / 24) % 7);
    }
    const SarimaxModel m = sarimax_fit(x, exog, SarimaxOrder{1, 1, 1, 1, 1, 0, 24});
    DenseMatrix future(48, 2);
    for (std::size_t h = 0; h < 48; ++h) {
        future(h, 0) = static_cast<double>((720 + h) % 24);
        future(h, 1) = static_cast<double>(((720 + h) / 24) % 7);
    }
    for (double v : sarimax_forecast(m, 48, future)) EXPECT_TRUE(std::isfinite(v));
}
