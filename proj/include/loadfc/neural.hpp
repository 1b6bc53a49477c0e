#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "loadfc/features.hpp"
#include "loadfc/metrics.hpp"
#include "loadfc/series.hpp"

namespace loadfc {

/// Architecture of the two-layer quantile LSTM.
struct LstmShape {
    std::size_t n_features = 18;
    std::size_t hidden1 = 100;
    std::size_t hidden2 = 50;
    std::size_t window = kDefaultWindow;
    std::vector<double> quantiles = kDefaultQuantiles;
    double dropout_rate = 0.2;
    /// relu on each layer's emitted outputs; the recurrence itself stays on the raw hidden state.
    bool relu_outputs = true;

    void validate() const;
};

/// One LSTM layer's parameters. Gate blocks are stacked in the order input, forget, output, candidate:
/// W is (4*n_hidden x n_in), U is (4*n_hidden x n_hidden), b is (4*n_hidden), all row-major.
struct LstmLayerRef {
    std::size_t n_in = 0;
    std::size_t n_hidden = 0;
    std::span<const double> W;
    std::span<const double> U;
    std::span<const double> b;
};

struct CellCache {
    std::vector<double> x, h_prev, c_prev;
    std::vector<double> i, f, o, g;  // activated gates
    std::vector<double> c, tanh_c;
};

struct CellOutput {
    std::vector<double> h;
    std::vector<double> c;
    CellCache cache;
};

CellOutput lstm_cell_forward(std::span<const double> x, std::span<const double> h_prev,
                             std::span<const double> c_prev, const LstmLayerRef& params);

/// Scale of the forecast target, used to map head outputs back to watts.
struct TargetScale {
    double min = 0.0;
    double max = 1.0;
};

/// Flat parameter vector. Order: layer1 W, U, b; layer2 W, U, b; head W (quantiles x hidden2), head b.
class QuantileLstmModel {
public:
    QuantileLstmModel() = default;
    /// All parameters zero.
    explicit QuantileLstmModel(LstmShape shape);
    /// uniform(-1/sqrt(hidden), 1/sqrt(hidden)) per matrix, forget-gate bias 1.
    static QuantileLstmModel initialized(LstmShape shape, std::uint64_t seed);

    const LstmShape& shape() const { return shape_; }
    std::size_t parameter_count() const { return params_.size(); }
    std::span<const double> params() const { return params_; }
    /// Mutable access; invalidates forward caches taken earlier.
    std::span<double> mutable_params() {
        ++generation_;
        return params_;
    }
    std::uint64_t generation() const { return generation_; }

    LstmLayerRef layer(std::size_t index) const;
    std::span<const double> head_weights() const;
    std::span<const double> head_bias() const;

    struct Offsets {
        std::size_t w1, u1, b1, w2, u2, b2, head_w, head_b, total;
    };
    const Offsets& offsets() const { return offsets_; }

    std::uint64_t seed = 0;
    std::optional<TargetScale> target_scale;
    std::vector<std::string> feature_order;

private:
    LstmShape shape_;
    Offsets offsets_{};
    std::vector<double> params_;
    std::uint64_t generation_ = 0;
};

/// Activations retained by forward() for backward().
struct ForwardCache {
    std::uint64_t generation = 0;
    std::size_t window = 0;
    std::vector<double> x;                   // window x n_features
    std::vector<double> gates1, c1, h1, a1;  // per step; a1 = dropout(relu(h1))
    std::vector<double> mask1;               // per step dropout scale (0 or 1/(1-p))
    std::vector<double> gates2, c2, h2;
    std::vector<double> a2, mask2;  // final layer-2 output fed to the head
    std::vector<double> outputs;    // one per quantile
};

struct ForwardResult {
    std::vector<double> outputs;
    ForwardCache cache;
};

/// train_mode enables dropout with masks drawn from dropout_seed; eval mode is deterministic.
ForwardResult forward(const QuantileLstmModel& model, std::span<const double> window, bool train_mode,
                      std::uint64_t dropout_seed = 0);

/// Gradient of sum_q doutputs[q] * outputs[q] with respect to every parameter (flat layout).
std::vector<double> backward(const QuantileLstmModel& model, const ForwardCache& cache,
                             std::span<const double> doutputs);

struct AdamState {
    std::size_t step = 0;
    std::vector<double> m;
    std::vector<double> v;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double learning_rate = 1e-3;
};

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state);

class TrainingDiverged : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct TrainConfig {
    std::size_t max_epochs = 50;
    std::size_t patience = 5;
    std::size_t batch_size = 64;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
    bool shuffle = true;
};

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_loss = 0.0;
};

/// Patience-based early stopping on a validation metric.
class EarlyStopping {
public:
    explicit EarlyStopping(std::size_t patience) : patience_(patience) {}
    /// Records one epoch; returns true when training should stop.
    bool update(std::size_t epoch, double val_loss);
    std::size_t best_epoch() const { return best_epoch_; }
    double best_loss() const { return best_loss_; }
    bool improved_last() const { return improved_last_; }

private:
    std::size_t patience_;
    std::size_t best_epoch_ = 0;
    double best_loss_ = 0.0;
    std::size_t stale_ = 0;
    bool improved_last_ = false;
};

struct TrainResult {
    QuantileLstmModel model;  // parameters of the best validation epoch
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;
};

/// Mean pinball loss over samples and quantiles (eval mode).
double quantile_loss(const QuantileLstmModel& model, const WindowTensor& tensors);

TrainResult train(QuantileLstmModel model, const WindowTensor& train_set, const WindowTensor& val_set,
                  const TrainConfig& config);

/// Eval-mode head outputs, one row per sample, sorted ascending.
ForecastDistribution predict_scaled(const QuantileLstmModel& model, const WindowTensor& tensors);

/// Eval-mode forecast mapped back through the target channel's min-max scaler.
ForecastDistribution predict_quantiles(const QuantileLstmModel& model, const WindowTensor& tensors,
                                       const ScalerParams& scaler, std::size_t target_channel);

void save_checkpoint(const QuantileLstmModel& model, const std::filesystem::path& json_path);
QuantileLstmModel load_checkpoint(const std::filesystem::path& json_path);

std::string history_to_csv(const std::vector<EpochRecord>& history);

}  // namespace loadfc
