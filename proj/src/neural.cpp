#include "loadfc/neural.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "json.hpp"
#include "loadfc/quantile_loss.hpp"
#include "csv_util.hpp"

namespace loadfc {

void LstmShape::validate() const {
    if (n_features == 0 || hidden1 == 0 || hidden2 == 0 || window == 0) {
        throw std::invalid_argument("LstmShape: sizes must be positive");
    }
    if (quantiles.empty()) throw std::invalid_argument("LstmShape: no quantiles");
    for (std::size_t k = 0; k < quantiles.size(); ++k) {
        if (!(quantiles[k] > 0.0 && quantiles[k] < 1.0)) throw std::invalid_argument("LstmShape: quantile outside (0,1)");
        if (k > 0 && !(quantiles[k] > quantiles[k - 1])) {
            throw std::invalid_argument("LstmShape: quantiles must be strictly increasing");
        }
    }
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw std::invalid_argument("LstmShape: dropout outside [0,1)");
}

namespace {

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

/// z = b + W x + U h
void gate_preactivations(const LstmLayerRef& p, const double* x, const double* h, double* z) {
    const std::size_t rows = 4 * p.n_hidden;
    const double* W = p.W.data();
    const double* U = p.U.data();
    for (std::size_t r = 0; r < rows; ++r) {
        double s = p.b[r];
        const double* wr = W + r * p.n_in;
        for (std::size_t j = 0; j < p.n_in; ++j) s += wr[j] * x[j];
        const double* ur = U + r * p.n_hidden;
        for (std::size_t j = 0; j < p.n_hidden; ++j) s += ur[j] * h[j];
        z[r] = s;
    }
}

/// gates receives activated (i, f, o, g) blocks.
void cell_step(const LstmLayerRef& p, const double* x, const double* h_prev, const double* c_prev, double* gates,
               double* c, double* h) {
    gate_preactivations(p, x, h_prev, gates);
    const std::size_t H = p.n_hidden;
    for (std::size_t k = 0; k < H; ++k) {
        const double i = sigmoid(gates[k]);
        const double f = sigmoid(gates[H + k]);
        const double o = sigmoid(gates[2 * H + k]);
        const double g = std::tanh(gates[3 * H + k]);
        gates[k] = i;
        gates[H + k] = f;
        gates[2 * H + k] = o;
        gates[3 * H + k] = g;
        c[k] = f * c_prev[k] + i * g;
        h[k] = o * std::tanh(c[k]);
    }
}

void layer_forward(const LstmLayerRef& p, const double* X, std::size_t T, std::vector<double>& gates,
                   std::vector<double>& c, std::vector<double>& h) {
    const std::size_t H = p.n_hidden;
    gates.resize(T * 4 * H);
    c.resize(T * H);
    h.resize(T * H);
    const std::vector<double> zeros(H, 0.0);
    for (std::size_t t = 0; t < T; ++t) {
        const double* hp = t == 0 ? zeros.data() : h.data() + (t - 1) * H;
        const double* cp = t == 0 ? zeros.data() : c.data() + (t - 1) * H;
        cell_step(p, X + t * p.n_in, hp, cp, gates.data() + t * 4 * H, c.data() + t * H, h.data() + t * H);
    }
}

struct LayerGrads {
    double* W;
    double* U;
    double* b;
};

/// Backpropagation through time for one layer. dh_ext holds dLoss/dh_t from outside the recurrence.
void layer_backward(const LstmLayerRef& p, const double* X, std::size_t T, const std::vector<double>& gates,
                    const std::vector<double>& c, const std::vector<double>& h, const double* dh_ext,
                    LayerGrads out, double* dX) {
    const std::size_t H = p.n_hidden;
    const std::size_t n_in = p.n_in;
    std::vector<double> dh_next(H, 0.0), dc_next(H, 0.0), dz(4 * H);
    const double* W = p.W.data();
    const double* U = p.U.data();
    for (std::size_t t = T; t-- > 0;) {
        const double* g_t = gates.data() + t * 4 * H;
        const double* c_t = c.data() + t * H;
        const double* c_prev = t > 0 ? c.data() + (t - 1) * H : nullptr;
        const double* h_prev = t > 0 ? h.data() + (t - 1) * H : nullptr;
        for (std::size_t k = 0; k < H; ++k) {
            const double i = g_t[k], f = g_t[H + k], o = g_t[2 * H + k], g = g_t[3 * H + k];
            const double dh = dh_ext[t * H + k] + dh_next[k];
            const double tc = std::tanh(c_t[k]);
            const double d_o = dh * tc;
            const double dc = dc_next[k] + dh * o * (1.0 - tc * tc);
            const double cp = c_prev ? c_prev[k] : 0.0;
            dz[k] = dc * g * i * (1.0 - i);
            dz[H + k] = dc * cp * f * (1.0 - f);
            dz[2 * H + k] = d_o * o * (1.0 - o);
            dz[3 * H + k] = dc * i * (1.0 - g * g);
            dc_next[k] = dc * f;
        }
        std::fill(dh_next.begin(), dh_next.end(), 0.0);
        const double* x_t = X + t * n_in;
        double* dx_t = dX ? dX + t * n_in : nullptr;
        for (std::size_t r = 0; r < 4 * H; ++r) {
            const double d = dz[r];
            if (d == 0.0) continue;
            out.b[r] += d;
            double* dw = out.W + r * n_in;
            const double* wr = W + r * n_in;
            for (std::size_t j = 0; j < n_in; ++j) dw[j] += d * x_t[j];
            if (dx_t) {
                for (std::size_t j = 0; j < n_in; ++j) dx_t[j] += wr[j] * d;
            }
            const double* ur = U + r * H;
            if (h_prev) {
                double* du = out.U + r * H;
                for (std::size_t j = 0; j < H; ++j) du[j] += d * h_prev[j];
            }
            for (std::size_t j = 0; j < H; ++j) dh_next[j] += ur[j] * d;
        }
    }
}

void backward_accumulate(const QuantileLstmModel& model, const ForwardCache& cache, std::span<const double> dout,
                         std::span<double> grads) {
    if (cache.generation != model.generation()) {
        throw std::logic_error("backward: forward cache is stale (parameters changed since forward)");
    }
    const LstmShape& s = model.shape();
    if (dout.size() != s.quantiles.size()) throw std::invalid_argument("backward: wrong number of output gradients");
    if (grads.size() != model.parameter_count()) throw std::invalid_argument("backward: gradient buffer size");
    const auto& off = model.offsets();
    const std::size_t T = cache.window;
    const std::size_t H1 = s.hidden1, H2 = s.hidden2, Q = s.quantiles.size();

    // Head.
    const auto hw = model.head_weights();
    std::vector<double> da2(H2, 0.0);
    for (std::size_t q = 0; q < Q; ++q) {
        grads[off.head_b + q] += dout[q];
        for (std::size_t j = 0; j < H2; ++j) {
            grads[off.head_w + q * H2 + j] += dout[q] * cache.a2[j];
            da2[j] += dout[q] * hw[q * H2 + j];
        }
    }
    std::vector<double> dh2(T * H2, 0.0);
    const double* h2_last = cache.h2.data() + (T - 1) * H2;
    for (std::size_t j = 0; j < H2; ++j) {
        const double act = s.relu_outputs ? (h2_last[j] > 0.0 ? 1.0 : 0.0) : 1.0;
        dh2[(T - 1) * H2 + j] = da2[j] * cache.mask2[j] * act;
    }
    std::vector<double> da1(T * H1, 0.0);
    layer_backward(model.layer(1), cache.a1.data(), T, cache.gates2, cache.c2, cache.h2, dh2.data(),
                   {grads.data() + off.w2, grads.data() + off.u2, grads.data() + off.b2}, da1.data());
    for (std::size_t k = 0; k < T * H1; ++k) {
        const double act = s.relu_outputs ? (cache.h1[k] > 0.0 ? 1.0 : 0.0) : 1.0;
        da1[k] *= cache.mask1[k] * act;
    }
    layer_backward(model.layer(0), cache.x.data(), T, cache.gates1, cache.c1, cache.h1, da1.data(),
                   {grads.data() + off.w1, grads.data() + off.u1, grads.data() + off.b1}, nullptr);
}

void forward_into(const QuantileLstmModel& model, std::span<const double> window, bool train_mode,
                  std::uint64_t dropout_seed, ForwardCache& cache) {
    const LstmShape& s = model.shape();
    const std::size_t F = s.n_features;
    if (window.size() != s.window * F) {
        throw std::invalid_argument("forward: window has " + std::to_string(window.size()) + " values, expected " +
                                    std::to_string(s.window * F));
    }
    const std::size_t T = s.window;
    const std::size_t H1 = s.hidden1, H2 = s.hidden2, Q = s.quantiles.size();
    cache.generation = model.generation();
    cache.window = T;
    cache.x.assign(window.begin(), window.end());

    const bool dropout = train_mode && s.dropout_rate > 0.0;
    std::mt19937_64 rng(dropout_seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double keep_scale = 1.0 / (1.0 - s.dropout_rate);
    auto draw = [&] { return unit(rng) < s.dropout_rate ? 0.0 : keep_scale; };
    auto act = [&](double h) { return s.relu_outputs ? std::max(h, 0.0) : h; };

    layer_forward(model.layer(0), cache.x.data(), T, cache.gates1, cache.c1, cache.h1);
    cache.mask1.resize(T * H1);
    cache.a1.resize(T * H1);
    for (std::size_t k = 0; k < T * H1; ++k) {
        cache.mask1[k] = dropout ? draw() : 1.0;
        cache.a1[k] = act(cache.h1[k]) * cache.mask1[k];
    }
    layer_forward(model.layer(1), cache.a1.data(), T, cache.gates2, cache.c2, cache.h2);
    cache.mask2.resize(H2);
    cache.a2.resize(H2);
    const double* h2_last = cache.h2.data() + (T - 1) * H2;
    for (std::size_t j = 0; j < H2; ++j) {
        cache.mask2[j] = dropout ? draw() : 1.0;
        cache.a2[j] = act(h2_last[j]) * cache.mask2[j];
    }
    const auto hw = model.head_weights();
    const auto hb = model.head_bias();
    cache.outputs.resize(Q);
    for (std::size_t q = 0; q < Q; ++q) {
        double v = hb[q];
        for (std::size_t j = 0; j < H2; ++j) v += hw[q * H2 + j] * cache.a2[j];
        cache.outputs[q] = v;
    }
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    std::uint64_t x = a * 0x9E3779B97F4A7C15ULL ^ (b + 0x632BE59BD9B4E019ULL) * 0xBF58476D1CE4E5B9ULL;
    x ^= (c + 0x94D049BB133111EBULL) * 0x94D049BB133111EBULL;
    x ^= x >> 31;
    x *= 0xBF58476D1CE4E5B9ULL;
    x ^= x >> 27;
    return x;
}

}  // namespace

CellOutput lstm_cell_forward(std::span<const double> x, std::span<const double> h_prev,
                             std::span<const double> c_prev, const LstmLayerRef& params) {
    const std::size_t H = params.n_hidden;
    if (x.size() != params.n_in || h_prev.size() != H || c_prev.size() != H || params.W.size() != 4 * H * params.n_in ||
        params.U.size() != 4 * H * H || params.b.size() != 4 * H) {
        throw std::invalid_argument("lstm_cell_forward: shape mismatch");
    }
    std::vector<double> gates(4 * H);
    CellOutput out;
    out.c.resize(H);
    out.h.resize(H);
    cell_step(params, x.data(), h_prev.data(), c_prev.data(), gates.data(), out.c.data(), out.h.data());
    out.cache.x.assign(x.begin(), x.end());
    out.cache.h_prev.assign(h_prev.begin(), h_prev.end());
    out.cache.c_prev.assign(c_prev.begin(), c_prev.end());
    out.cache.i.assign(gates.begin(), gates.begin() + static_cast<std::ptrdiff_t>(H));
    out.cache.f.assign(gates.begin() + static_cast<std::ptrdiff_t>(H), gates.begin() + static_cast<std::ptrdiff_t>(2 * H));
    out.cache.o.assign(gates.begin() + static_cast<std::ptrdiff_t>(2 * H), gates.begin() + static_cast<std::ptrdiff_t>(3 * H));
    out.cache.g.assign(gates.begin() + static_cast<std::ptrdiff_t>(3 * H), gates.end());
    out.cache.c = out.c;
    out.cache.tanh_c.resize(H);
    for (std::size_t k = 0; k < H; ++k) out.cache.tanh_c[k] = std::tanh(out.c[k]);
    return out;
}

QuantileLstmModel::QuantileLstmModel(LstmShape shape) : shape_(std::move(shape)) {
    shape_.validate();
    const std::size_t F = shape_.n_features, H1 = shape_.hidden1, H2 = shape_.hidden2;
    const std::size_t Q = shape_.quantiles.size();
    std::size_t at = 0;
    auto take = [&](std::size_t n) {
        const std::size_t o = at;
        at += n;
        return o;
    };
    offsets_.w1 = take(4 * H1 * F);
    offsets_.u1 = take(4 * H1 * H1);
    offsets_.b1 = take(4 * H1);
    offsets_.w2 = take(4 * H2 * H1);
    offsets_.u2 = take(4 * H2 * H2);
    offsets_.b2 = take(4 * H2);
    offsets_.head_w = take(Q * H2);
    offsets_.head_b = take(Q);
    offsets_.total = at;
    params_.assign(at, 0.0);
}

QuantileLstmModel QuantileLstmModel::initialized(LstmShape shape, std::uint64_t seed) {
    QuantileLstmModel m(std::move(shape));
    m.seed = seed;
    std::mt19937_64 rng(seed);
    const auto& o = m.offsets_;
    const LstmShape& s = m.shape_;
    auto fill = [&](std::size_t begin, std::size_t count, std::size_t fan) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (std::size_t k = 0; k < count; ++k) m.params_[begin + k] = dist(rng);
    };
    fill(o.w1, 4 * s.hidden1 * s.n_features, s.hidden1);
    fill(o.u1, 4 * s.hidden1 * s.hidden1, s.hidden1);
    fill(o.w2, 4 * s.hidden2 * s.hidden1, s.hidden2);
    fill(o.u2, 4 * s.hidden2 * s.hidden2, s.hidden2);
    fill(o.head_w, s.quantiles.size() * s.hidden2, s.hidden2);
    for (std::size_t k = 0; k < s.hidden1; ++k) m.params_[o.b1 + s.hidden1 + k] = 1.0;
    for (std::size_t k = 0; k < s.hidden2; ++k) m.params_[o.b2 + s.hidden2 + k] = 1.0;
    return m;
}

LstmLayerRef QuantileLstmModel::layer(std::size_t index) const {
    const std::span<const double> p(params_);
    if (index == 0) {
        const std::size_t H = shape_.hidden1, n_in = shape_.n_features;
        return {n_in, H, p.subspan(offsets_.w1, 4 * H * n_in), p.subspan(offsets_.u1, 4 * H * H),
                p.subspan(offsets_.b1, 4 * H)};
    }
    if (index == 1) {
        const std::size_t H = shape_.hidden2, n_in = shape_.hidden1;
        return {n_in, H, p.subspan(offsets_.w2, 4 * H * n_in), p.subspan(offsets_.u2, 4 * H * H),
                p.subspan(offsets_.b2, 4 * H)};
    }
    throw std::out_of_range("QuantileLstmModel has two layers");
}

std::span<const double> QuantileLstmModel::head_weights() const {
    return std::span<const double>(params_).subspan(offsets_.head_w, shape_.quantiles.size() * shape_.hidden2);
}

std::span<const double> QuantileLstmModel::head_bias() const {
    return std::span<const double>(params_).subspan(offsets_.head_b, shape_.quantiles.size());
}

ForwardResult forward(const QuantileLstmModel& model, std::span<const double> window, bool train_mode,
                      std::uint64_t dropout_seed) {
    ForwardResult r;
    forward_into(model, window, train_mode, dropout_seed, r.cache);
    r.outputs = r.cache.outputs;
    return r;
}

std::vector<double> backward(const QuantileLstmModel& model, const ForwardCache& cache,
                             std::span<const double> doutputs) {
    std::vector<double> grads(model.parameter_count(), 0.0);
    backward_accumulate(model, cache, doutputs, grads);
    return grads;
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state) {
    if (params.size() != grads.size()) throw std::invalid_argument("adam_step: gradient size mismatch");
    if (state.m.empty()) state.m.assign(params.size(), 0.0);
    if (state.v.empty()) state.v.assign(params.size(), 0.0);
    if (state.m.size() != params.size() || state.v.size() != params.size()) {
        throw std::invalid_argument("adam_step: state size mismatch");
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(state.beta1, t);
    const double c2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t k = 0; k < params.size(); ++k) {
        const double g = grads[k];
        state.m[k] = state.beta1 * state.m[k] + (1.0 - state.beta1) * g;
        state.v[k] = state.beta2 * state.v[k] + (1.0 - state.beta2) * g * g;
        const double m_hat = state.m[k] / c1;
        const double v_hat = state.v[k] / c2;
        params[k] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
}

bool EarlyStopping::update(std::size_t epoch, double val_loss) {
    if (best_epoch_ == 0 || val_loss < best_loss_) {
        best_epoch_ = epoch;
        best_loss_ = val_loss;
        stale_ = 0;
        improved_last_ = true;
        return false;
    }
    improved_last_ = false;
    ++stale_;
    return stale_ >= patience_;
}

namespace {

void check_tensor(const QuantileLstmModel& model, const WindowTensor& w, const char* what) {
    if (w.samples == 0) throw std::invalid_argument(std::string(what) + ": no samples");
    if (w.window != model.shape().window || w.n_features != model.shape().n_features) {
        throw std::invalid_argument(std::string(what) + ": tensor shape does not match the model");
    }
}

double sample_loss(const std::vector<double>& out, double y, const std::vector<double>& taus) {
    double s = 0.0;
    for (std::size_t q = 0; q < taus.size(); ++q) s += pinball_loss(y, out[q], taus[q]);
    return s / static_cast<double>(taus.size());
}

}  // namespace

double quantile_loss(const QuantileLstmModel& model, const WindowTensor& tensors) {
    check_tensor(model, tensors, "quantile_loss");
    ForwardCache cache;
    double total = 0.0;
    for (std::size_t i = 0; i < tensors.samples; ++i) {
        forward_into(model, tensors.sample(i), false, 0, cache);
        total += sample_loss(cache.outputs, tensors.target(i), model.shape().quantiles);
    }
    return total / static_cast<double>(tensors.samples);
}

TrainResult train(QuantileLstmModel model, const WindowTensor& train_set, const WindowTensor& val_set,
                  const TrainConfig& config) {
    check_tensor(model, train_set, "train");
    check_tensor(model, val_set, "train (validation)");
    if (config.batch_size == 0) throw std::invalid_argument("train: batch_size must be >= 1");

    const std::vector<double>& taus = model.shape().quantiles;
    const std::size_t Q = taus.size();
    AdamState adam;
    adam.learning_rate = config.learning_rate;
    EarlyStopping stopper(config.patience);
    TrainResult result;
    result.model = model;

    std::vector<std::size_t> order(train_set.samples);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<double> grads(model.parameter_count());
    std::vector<double> dout(Q);
    ForwardCache cache;
    std::mt19937_64 shuffler(mix_seed(config.seed, 0x5eed, 0));

    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        if (config.shuffle) {
            for (std::size_t k = order.size(); k > 1; --k) {
                std::uniform_int_distribution<std::size_t> pick(0, k - 1);
                std::swap(order[k - 1], order[pick(shuffler)]);
            }
        }
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            const double inv_batch = 1.0 / static_cast<double>(end - start);
            std::fill(grads.begin(), grads.end(), 0.0);
            for (std::size_t k = start; k < end; ++k) {
                const std::size_t i = order[k];
                forward_into(model, train_set.sample(i), true, mix_seed(config.seed, epoch, i), cache);
                const double y = train_set.target(i);
                const double loss = sample_loss(cache.outputs, y, taus);
                if (!std::isfinite(loss)) {
                    throw TrainingDiverged("LSTM training diverged: non-finite loss at epoch " + std::to_string(epoch) +
                                           ", sample " + std::to_string(i));
                }
                epoch_loss += loss;
                for (std::size_t q = 0; q < Q; ++q) {
                    dout[q] = pinball_grad(y, cache.outputs[q], taus[q]) * inv_batch / static_cast<double>(Q);
                }
                backward_accumulate(model, cache, dout, grads);
            }
            adam_step(model.mutable_params(), grads, adam);
        }
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = epoch_loss / static_cast<double>(order.size());
        rec.val_loss = quantile_loss(model, val_set);
        if (!std::isfinite(rec.val_loss)) {
            throw TrainingDiverged("LSTM training diverged: non-finite validation loss at epoch " + std::to_string(epoch));
        }
        result.history.push_back(rec);
        const bool stop = stopper.update(epoch, rec.val_loss);
        if (stopper.improved_last()) result.model = model;
        if (stop) break;
    }
    result.best_epoch = stopper.best_epoch();
    return result;
}

ForecastDistribution predict_scaled(const QuantileLstmModel& model, const WindowTensor& tensors) {
    check_tensor(model, tensors, "predict");
    const std::size_t Q = model.shape().quantiles.size();
    ForecastDistribution dist;
    dist.timestamps = tensors.target_timestamps;
    dist.levels = model.shape().quantiles;
    dist.values.assign(Q, std::vector<double>(tensors.samples));
    ForwardCache cache;
    for (std::size_t i = 0; i < tensors.samples; ++i) {
        forward_into(model, tensors.sample(i), false, 0, cache);
        for (std::size_t q = 0; q < Q; ++q) dist.values[q][i] = cache.outputs[q];
    }
    sort_quantiles(dist);
    return dist;
}

ForecastDistribution predict_quantiles(const QuantileLstmModel& model, const WindowTensor& tensors,
                                       const ScalerParams& scaler, std::size_t target_channel) {
    if (target_channel >= scaler.channel_count()) {
        throw std::invalid_argument("predict_quantiles: scaler has " + std::to_string(scaler.channel_count()) +
                                    " channels, target channel index " + std::to_string(target_channel));
    }
    ForecastDistribution dist = predict_scaled(model, tensors);
    for (auto& row : dist.values) {
        for (double& v : row) v = scaler.inverse(target_channel, v);
    }
    dist.validate();
    return dist;
}

void save_checkpoint(const QuantileLstmModel& model, const std::filesystem::path& json_path) {
    const LstmShape& s = model.shape();
    std::filesystem::path bin_path = json_path;
    bin_path.replace_extension(".bin");
    nlohmann::json doc;
    doc["format"] = "loadfc-lstm";
    doc["version"] = 1;
    doc["shape"] = {{"n_features", s.n_features},   {"hidden1", s.hidden1},
                    {"hidden2", s.hidden2},         {"window", s.window},
                    {"dropout_rate", s.dropout_rate}, {"relu_outputs", s.relu_outputs}};
    doc["quantiles"] = s.quantiles;
    doc["seed"] = model.seed;
    doc["feature_order"] = model.feature_order;
    doc["target_scale"] = model.target_scale
                              ? nlohmann::json{{"min", model.target_scale->min}, {"max", model.target_scale->max}}
                              : nlohmann::json(nullptr);
    doc["parameter_count"] = model.parameter_count();
    doc["parameter_order"] = {"layer1.W[4*hidden1 x n_features]", "layer1.U[4*hidden1 x hidden1]",
                              "layer1.b[4*hidden1]",              "layer2.W[4*hidden2 x hidden1]",
                              "layer2.U[4*hidden2 x hidden2]",    "layer2.b[4*hidden2]",
                              "head.W[quantiles x hidden2]",      "head.b[quantiles]"};
    doc["gate_order"] = {"input", "forget", "output", "candidate"};
    doc["params_file"] = bin_path.filename().string();
    doc["encoding"] = "float64 little-endian";
    detail::write_text_file(json_path, doc.dump(2) + "\n");

    std::ofstream out(bin_path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + bin_path.string());
    for (double v : model.params()) {
        auto bits = std::bit_cast<std::uint64_t>(v);
        unsigned char bytes[8];
        for (int b = 0; b < 8; ++b) bytes[b] = static_cast<unsigned char>(bits >> (8 * b));
        out.write(reinterpret_cast<const char*>(bytes), 8);
    }
    if (!out) throw std::runtime_error("write failed for " + bin_path.string());
}

QuantileLstmModel load_checkpoint(const std::filesystem::path& json_path) {
    const nlohmann::json doc = nlohmann::json::parse(detail::read_text_file(json_path));
    if (doc.value("format", "") != "loadfc-lstm") throw std::invalid_argument("not an LSTM checkpoint");
    LstmShape s;
    const auto& js = doc.at("shape");
    s.n_features = js.at("n_features").get<std::size_t>();
    s.hidden1 = js.at("hidden1").get<std::size_t>();
    s.hidden2 = js.at("hidden2").get<std::size_t>();
    s.window = js.at("window").get<std::size_t>();
    s.dropout_rate = js.at("dropout_rate").get<double>();
    s.relu_outputs = js.at("relu_outputs").get<bool>();
    s.quantiles = doc.at("quantiles").get<std::vector<double>>();
    QuantileLstmModel model(s);
    model.seed = doc.at("seed").get<std::uint64_t>();
    model.feature_order = doc.at("feature_order").get<std::vector<std::string>>();
    if (!doc.at("target_scale").is_null()) {
        model.target_scale = TargetScale{doc["target_scale"].at("min").get<double>(),
                                         doc["target_scale"].at("max").get<double>()};
    }
    if (doc.at("parameter_count").get<std::size_t>() != model.parameter_count()) {
        throw std::invalid_argument("checkpoint parameter count does not match its shape");
    }
    const std::filesystem::path bin_path = json_path.parent_path() / doc.at("params_file").get<std::string>();
    std::ifstream in(bin_path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + bin_path.string());
    auto params = model.mutable_params();
    for (double& v : params) {
        unsigned char bytes[8];
        if (!in.read(reinterpret_cast<char*>(bytes), 8)) throw std::runtime_error("truncated parameter file");
        std::uint64_t bits = 0;
        for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
        v = std::bit_cast<double>(bits);
    }
    return model;
}

std::string history_to_csv(const std::vector<EpochRecord>& history) {
    std::ostringstream out;
    out << "epoch,train_loss,val_loss\n";
    for (const auto& r : history) {
        out << r.epoch << ',' << format_double(r.train_loss) << ',' << format_double(r.val_loss) << '\n';
    }
    return out.str();
}

}  // namespace loadfc
