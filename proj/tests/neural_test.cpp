#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "loadfc/neural.hpp"
#include "loadfc/quantile_loss.hpp"
#include "lstm_check.hpp"
#include "test_util.hpp"

using namespace loadfc;

namespace {

struct LayerParams {
    std::vector<double> W, U, b;
    LstmLayerRef ref(std::size_t n_in, std::size_t n_hidden) const { return {n_in, n_hidden, W, U, b}; }
};

LayerParams zero_layer(std::size_t n_in, std::size_t n_hidden) {
    return {std::vector<double>(4 * n_hidden * n_in), std::vector<double>(4 * n_hidden * n_hidden),
            std::vector<double>(4 * n_hidden)};
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

WindowTensor constant_tensor(const LstmShape& shape, std::size_t n, double input, double target) {
    WindowTensor t;
    t.samples = n;
    t.window = shape.window;
    t.n_features = shape.n_features;
    t.data.assign(n * shape.window * shape.n_features, input);
    t.targets.assign(n, target);
    t.target_timestamps.assign(n, 0);
    return t;
}

}  // namespace

TEST(Pinball, HandValues) {
    EXPECT_EQ(pinball_loss(5, 5, 0.3), 0.0);
    EXPECT_DOUBLE_EQ(pinball_loss(10, 8, 0.9), 1.8);
    EXPECT_DOUBLE_EQ(pinball_loss(8, 10, 0.9), 0.2);
    EXPECT_DOUBLE_EQ(pinball_grad(10, 8, 0.9), -0.9);
    EXPECT_DOUBLE_EQ(pinball_grad(7, 7, 0.9), 1.0 - 0.9);
    EXPECT_THROW(pinball_loss(1, 2, 0.0), std::invalid_argument);
    EXPECT_THROW(pinball_grad(1, 2, 1.0), std::invalid_argument);
}

TEST(Pinball, NonNegativeZeroOnlyAtResidualZeroConvexProperty) {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(-50, 50), tau(0.01, 0.99);
    for (int i = 0; i < 2000; ++i) {
        const double y = u(rng), a = u(rng), b = u(rng), t = tau(rng);
        const double la = pinball_loss(y, a, t);
        EXPECT_GE(la, 0.0);
        if (a != y) EXPECT_GT(la, 0.0);
        EXPECT_LE(pinball_loss(y, 0.5 * (a + b), t), 0.5 * (la + pinball_loss(y, b, t)) + 1e-12);
    }
}

TEST(Cell, ZeroParameters) {
    const LayerParams p = zero_layer(2, 1);
    const std::vector<double> x = {3.0, -1.0}, h = {0.7}, c = {2.0};
    const CellOutput out = lstm_cell_forward(x, h, c, p.ref(2, 1));
    EXPECT_DOUBLE_EQ(out.cache.i[0], 0.5);
    EXPECT_DOUBLE_EQ(out.cache.f[0], 0.5);
    EXPECT_DOUBLE_EQ(out.cache.o[0], 0.5);
    EXPECT_DOUBLE_EQ(out.cache.g[0], 0.0);
    EXPECT_DOUBLE_EQ(out.c[0], 1.0);
    EXPECT_DOUBLE_EQ(out.h[0], 0.5 * std::tanh(1.0));
}

TEST(Cell, SaturatedGatesKeepMemory) {
    LayerParams p = zero_layer(1, 1);
    p.b = {-60.0, 60.0, 0.0, 0.0};  // i, f, o, g
    const CellOutput out = lstm_cell_forward(std::vector<double>{5.0}, std::vector<double>{0.0},
                                             std::vector<double>{0.37}, p.ref(1, 1));
    EXPECT_NEAR(out.c[0], 0.37, 1e-12);
}

TEST(Cell, ZeroInputZeroStateGivesZero) {
    LayerParams p = zero_layer(2, 3);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1, 1);
    for (auto& v : p.W) v = u(rng);
    for (auto& v : p.U) v = u(rng);
    const CellOutput out = lstm_cell_forward(std::vector<double>(2, 0.0), std::vector<double>(3, 0.0),
                                             std::vector<double>(3, 0.0), p.ref(2, 3));
    for (double v : out.h) EXPECT_EQ(v, 0.0);
}

TEST(Cell, GateEquationsOracle) {
    // One unit, one input, gate blocks in order i, f, o, g.
    LayerParams p = zero_layer(1, 1);
    p.W = {0.1, 0.2, 0.3, 0.4};
    p.U = {-0.5, 0.6, -0.7, 0.8};
    p.b = {0.01, 0.02, 0.03, 0.04};
    const double x = 0.9, h = -0.4, c = 0.25;
    const CellOutput out = lstm_cell_forward(std::vector<double>{x}, std::vector<double>{h},
                                             std::vector<double>{c}, p.ref(1, 1));
    const double i = sigmoid(0.1 * x - 0.5 * h + 0.01), f = sigmoid(0.2 * x + 0.6 * h + 0.02);
    const double o = sigmoid(0.3 * x - 0.7 * h + 0.03), g = std::tanh(0.4 * x + 0.8 * h + 0.04);
    EXPECT_NEAR(out.c[0], f * c + i * g, 1e-15);
    EXPECT_NEAR(out.h[0], o * std::tanh(f * c + i * g), 1e-15);
}

TEST(Model, ParameterLayoutAndInit) {
    LstmShape s = testutil::tiny_shape();
    const QuantileLstmModel m = QuantileLstmModel::initialized(s, 5);
    const std::size_t expected = 4 * 4 * 3 + 4 * 4 * 4 + 4 * 4 + 4 * 3 * 4 + 4 * 3 * 3 + 4 * 3 + 3 * 3 + 3;
    EXPECT_EQ(m.parameter_count(), expected);
    const auto& o = m.offsets();
    EXPECT_EQ(o.head_b + 3, o.total);
    const LstmLayerRef l1 = m.layer(0);
    for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(l1.b[4 + k], 1.0);  // forget block
    for (double w : l1.W) EXPECT_LE(std::abs(w), 1.0 / std::sqrt(4.0));
    EXPECT_EQ(m.head_weights().size(), 9u);
    EXPECT_EQ(QuantileLstmModel::initialized(s, 5).params()[0], m.params()[0]);
    s.quantiles = {0.5, 0.05};
    EXPECT_THROW(QuantileLstmModel{s}, std::invalid_argument);
}

TEST(Forward, EvalIsDeterministicAndIgnoresSeed) {
    const QuantileLstmModel m = QuantileLstmModel::initialized(testutil::tiny_shape(), 3);
    std::vector<double> w(15);
    for (std::size_t k = 0; k < w.size(); ++k) w[k] = std::sin(static_cast<double>(k));
    const auto a = forward(m, w, false, 1).outputs;
    EXPECT_EQ(forward(m, w, false, 1).outputs, a);
    EXPECT_EQ(forward(m, w, false, 999).outputs, a);
    EXPECT_NE(forward(m, w, true, 1).outputs, a);
    EXPECT_EQ(forward(m, w, true, 1).outputs, forward(m, w, true, 1).outputs);
}

TEST(Forward, NoDropoutTrainEqualsEval) {
    const QuantileLstmModel m = QuantileLstmModel::initialized(testutil::tiny_shape(0.0), 3);
    const std::vector<double> w(15, 0.4);
    EXPECT_EQ(forward(m, w, true, 17).outputs, forward(m, w, false).outputs);
}

TEST(Forward, ZeroModelOutputsHeadBias) {
    QuantileLstmModel m(testutil::tiny_shape());
    auto p = m.mutable_params();
    const auto& o = m.offsets();
    p[o.head_b] = 0.1;
    p[o.head_b + 1] = 0.2;
    p[o.head_b + 2] = 0.3;
    EXPECT_EQ(forward(m, std::vector<double>(15, 0.8), false).outputs, (std::vector<double>{0.1, 0.2, 0.3}));
}

TEST(Forward, ShapeMismatchThrows) {
    const QuantileLstmModel m = QuantileLstmModel::initialized(testutil::tiny_shape(), 3);
    EXPECT_THROW(forward(m, std::vector<double>(14, 0.0), false), std::invalid_argument);
}

TEST(Backward, MatchesFiniteDifferencesProperty) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        EXPECT_LT(testutil::lstm_gradient_check(seed, false).max_relative_error, 1e-4) << "seed " << seed;
        EXPECT_LT(testutil::lstm_gradient_check(seed, true).max_relative_error, 1e-4) << "seed " << seed;
    }
}

TEST(Backward, ZeroUpstreamGivesZeroGradients) {
    const QuantileLstmModel m = QuantileLstmModel::initialized(testutil::tiny_shape(), 3);
    const auto r = forward(m, std::vector<double>(15, 0.5), true, 4);
    for (double g : backward(m, r.cache, std::vector<double>(3, 0.0))) EXPECT_EQ(g, 0.0);
}

TEST(Backward, ExcludedQuantileHeadRowHasZeroGradient) {
    const QuantileLstmModel m = QuantileLstmModel::initialized(testutil::tiny_shape(), 3);
    const auto r = forward(m, std::vector<double>(15, 0.5), false);
    const auto g = backward(m, r.cache, std::vector<double>{1.0, 0.0, -2.0});
    const auto& o = m.offsets();
    const std::size_t H2 = m.shape().hidden2;
    for (std::size_t j = 0; j < H2; ++j) EXPECT_EQ(g[o.head_w + 1 * H2 + j], 0.0);
    EXPECT_EQ(g[o.head_b + 1], 0.0);
    EXPECT_EQ(g[o.head_b], 1.0);
    EXPECT_EQ(g[o.head_b + 2], -2.0);
}

TEST(Backward, StaleCacheThrows) {
    QuantileLstmModel m = QuantileLstmModel::initialized(testutil::tiny_shape(), 3);
    const auto r = forward(m, std::vector<double>(15, 0.5), false);
    m.mutable_params()[0] += 1e-3;
    EXPECT_THROW(backward(m, r.cache, std::vector<double>(3, 1.0)), std::logic_error);
}

TEST(Adam, FirstStepMagnitudeIsLearningRate) {
    std::vector<double> p(4, 2.0);
    AdamState s;
    adam_step(p, std::vector<double>(4, 1.0), s);
    for (double v : p) EXPECT_NEAR(v, 2.0 - 0.001, 1e-10);
    EXPECT_EQ(s.step, 1u);
}

TEST(Adam, ZeroGradientLeavesParameters) {
    std::vector<double> p = {1, -2, 3};
    AdamState s;
    adam_step(p, std::vector<double>(3, 0.0), s);
    EXPECT_EQ(p, (std::vector<double>{1, -2, 3}));
}

TEST(Adam, FirstStepScaleInvariantProperty) {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(-3, 3);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> g(5), p1(5), p2;
        for (auto& v : g) v = u(rng);
        for (auto& v : p1) v = u(rng);
        p2 = p1;
        std::vector<double> g10 = g;
        for (auto& v : g10) v *= 10.0;
        AdamState a, b;
        adam_step(p1, g, a);
        adam_step(p2, g10, b);
        // Identical up to epsilon: lr * g / (|g| + eps) differs by at most lr * eps / |g|.
        for (std::size_t k = 0; k < 5; ++k) EXPECT_NEAR(p1[k], p2[k], 1e-3 * 1e-8 / std::abs(g[k]) + 1e-15);
    }
}

TEST(Adam, MatchesHandRecurrenceOverSteps) {
    std::vector<double> p = {0.0};
    AdamState s;
    s.learning_rate = 0.1;
    double m = 0, v = 0, theta = 0;
    const std::vector<double> grads = {0.5, -1.0, 2.0, 0.25};
    for (std::size_t t = 1; t <= grads.size(); ++t) {
        const double g = grads[t - 1];
        adam_step(p, std::vector<double>{g}, s);
        m = 0.9 * m + 0.1 * g;
        v = 0.999 * v + 0.001 * g * g;
        theta -= 0.1 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
        EXPECT_NEAR(p[0], theta, 1e-14);
    }
}

TEST(EarlyStop, WorseningFromSecondEpochStopsAtPatiencePlusOne) {
    EarlyStopping es(5);
    std::size_t stopped = 0;
    for (std::size_t e = 1; e <= 50 && !stopped; ++e) {
        if (es.update(e, static_cast<double>(e))) stopped = e;
    }
    EXPECT_EQ(stopped, 6u);
    EXPECT_EQ(es.best_epoch(), 1u);
}

TEST(EarlyStop, EqualLossIsNotImprovement) {
    EarlyStopping es(2);
    EXPECT_FALSE(es.update(1, 1.0));
    EXPECT_FALSE(es.update(2, 1.0));
    EXPECT_TRUE(es.update(3, 1.0));
    EXPECT_EQ(es.best_epoch(), 1u);
}

TEST(Train, ConstantTargetCollapsesQuantiles) {
    // Without dropout the fixed point is exact; with dropout the quantiles learn the mask noise.
    LstmShape shape = testutil::tiny_shape(0.0);
    const QuantileLstmModel m0 = QuantileLstmModel::initialized(shape, 1);
    const WindowTensor data = constant_tensor(shape, 128, 0.5, 0.7);
    TrainConfig cfg;
    cfg.max_epochs = 150;
    cfg.patience = 20;
    cfg.batch_size = 32;
    cfg.learning_rate = 0.01;
    const TrainResult r = train(m0, data, data, cfg);
    const ForecastDistribution d = predict_scaled(r.model, data);
    for (std::size_t q = 0; q < 3; ++q) EXPECT_NEAR(d.values[q][0], 0.7, 0.03);
}

TEST(Train, FullBatchLossNonIncreasingEarly) {
    const LstmShape shape = testutil::tiny_shape(0.0);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0, 1);
    WindowTensor t = constant_tensor(shape, 64, 0.0, 0.0);
    for (std::size_t i = 0; i < t.samples; ++i) {
        double s = 0;
        for (std::size_t k = 0; k < shape.window * shape.n_features; ++k) {
            t.data[i * 15 + k] = u(rng);
            s += t.data[i * 15 + k];
        }
        t.targets[i] = std::sin(s / 5.0);
    }
    TrainConfig cfg;
    cfg.max_epochs = 5;
    cfg.batch_size = t.samples;
    cfg.shuffle = false;
    cfg.learning_rate = 1e-3;
    const TrainResult r = train(QuantileLstmModel::initialized(shape, 3), t, t, cfg);
    ASSERT_EQ(r.history.size(), 5u);
    for (std::size_t e = 1; e < 5; ++e) EXPECT_LE(r.history[e].train_loss, r.history[e - 1].train_loss);
}

TEST(Train, RestoresBestEpochAndIsDeterministic) {
    const LstmShape shape = testutil::tiny_shape();
    const WindowTensor tr = testutil::uniform_noise_tensor(shape, 96, 1);
    const WindowTensor va = testutil::uniform_noise_tensor(shape, 32, 2);
    TrainConfig cfg;
    cfg.max_epochs = 12;
    cfg.patience = 3;
    cfg.batch_size = 16;
    cfg.learning_rate = 0.02;
    cfg.seed = 9;
    const TrainResult a = train(QuantileLstmModel::initialized(shape, 4), tr, va, cfg);
    const TrainResult b = train(QuantileLstmModel::initialized(shape, 4), tr, va, cfg);
    EXPECT_EQ(std::vector<double>(a.model.params().begin(), a.model.params().end()),
              std::vector<double>(b.model.params().begin(), b.model.params().end()));
    std::size_t argmin = 0;
    for (std::size_t e = 0; e < a.history.size(); ++e) {
        if (a.history[e].val_loss < a.history[argmin].val_loss) argmin = e;
    }
    EXPECT_EQ(a.best_epoch, argmin + 1);
    EXPECT_DOUBLE_EQ(quantile_loss(a.model, va), a.history[argmin].val_loss);
    EXPECT_LE(a.history.size(), a.best_epoch + cfg.patience);
}

TEST(Train, DivergenceRaises) {
    QuantileLstmModel m(testutil::tiny_shape());
    m.mutable_params()[m.offsets().head_b] = std::numeric_limits<double>::infinity();
    const WindowTensor t = constant_tensor(m.shape(), 4, 0.5, 0.5);
    EXPECT_THROW(train(m, t, t, TrainConfig{}), TrainingDiverged);
}

TEST(Predict, SortsAndRescales) {
    QuantileLstmModel m(testutil::tiny_shape());
    auto p = m.mutable_params();
    p[m.offsets().head_b] = 0.3;
    p[m.offsets().head_b + 1] = 0.2;
    p[m.offsets().head_b + 2] = 0.9;
    const WindowTensor t = constant_tensor(m.shape(), 2, 0.1, 0.0);

    const ScalerParams identity{{"Aggregate"}, {0.0}, {1.0}};
    const ForecastDistribution raw = predict_quantiles(m, t, identity, 0);
    EXPECT_EQ(raw.values[0][0], 0.2);
    EXPECT_EQ(raw.values[1][0], 0.3);
    EXPECT_EQ(raw.values[2][0], 0.9);

    const ScalerParams watts{{"Aggregate"}, {0.0}, {1000.0}};
    const ForecastDistribution w = predict_quantiles(m, t, watts, 0);
    EXPECT_NEAR(w.values[0][1], 200.0, 1e-9);
    EXPECT_NEAR(w.values[1][1], 300.0, 1e-9);
    EXPECT_NEAR(w.values[2][1], 900.0, 1e-9);
    EXPECT_THROW(predict_quantiles(m, t, watts, 1), std::invalid_argument);
}

TEST(Predict, MonotoneAfterRepairProperty) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const QuantileLstmModel m = QuantileLstmModel::initialized(testutil::tiny_shape(), seed);
        const ForecastDistribution d = predict_scaled(m, testutil::uniform_noise_tensor(m.shape(), 50, seed));
        EXPECT_NO_THROW(d.validate());
    }
}

TEST(Checkpoint, RoundTripIsExact) {
    testutil::TempDir dir("ckpt");
    QuantileLstmModel m = QuantileLstmModel::initialized(testutil::tiny_shape(), 12);
    m.target_scale = TargetScale{10.0, 4000.0};
    m.feature_order = {"a", "b", "c"};
    save_checkpoint(m, dir / "lstm.json");
    EXPECT_TRUE(std::filesystem::exists(dir / "lstm.bin"));
    const QuantileLstmModel back = load_checkpoint(dir / "lstm.json");
    EXPECT_EQ(std::vector<double>(back.params().begin(), back.params().end()),
              std::vector<double>(m.params().begin(), m.params().end()));
    EXPECT_EQ(back.seed, 12u);
    EXPECT_EQ(back.feature_order, m.feature_order);
    ASSERT_TRUE(back.target_scale.has_value());
    EXPECT_EQ(back.target_scale->max, 4000.0);
    EXPECT_EQ(back.shape().hidden1, 4u);
    const std::vector<double> w(15, 0.3);
    EXPECT_EQ(forward(back, w, false).outputs, forward(m, w, false).outputs);
}

TEST(Checkpoint, TruncatedBinaryRejected) {
    testutil::TempDir dir("ckpt_bad");
    save_checkpoint(QuantileLstmModel::initialized(testutil::tiny_shape(), 1), dir / "lstm.json");
    std::string bin = testutil::read_file(dir / "lstm.bin");
    testutil::write_file(dir / "lstm.bin", bin.substr(0, bin.size() - 8));
    EXPECT_ANY_THROW(load_checkpoint(dir / "lstm.json"));
}

TEST(History, CsvLayout) {
    const std::string csv = history_to_csv({{1, 0.5, 0.25}, {2, 0.4, 0.3}});
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "epoch,train_loss,val_loss");
    EXPECT_NE(csv.find("\n2,0.4,0.3"), std::string::npos);
}
