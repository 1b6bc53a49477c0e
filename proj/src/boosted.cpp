#include "loadfc/boosted.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "loadfc/quantile_loss.hpp"

namespace loadfc {

Gradients loss_gradients(const BoostLoss& loss, std::span<const double> y, std::span<const double> pred) {
    if (y.size() != pred.size()) throw std::invalid_argument("loss_gradients: length mismatch");
    Gradients g;
    g.grad.resize(y.size());
    g.hess.assign(y.size(), 1.0);
    if (loss.kind == BoostLoss::Kind::Squared) {
        for (std::size_t i = 0; i < y.size(); ++i) g.grad[i] = pred[i] - y[i];
    } else {
        for (std::size_t i = 0; i < y.size(); ++i) g.grad[i] = pinball_grad(y[i], pred[i], loss.tau);
    }
    return g;
}

double RegressionTree::predict(std::span<const double> x) const {
    std::size_t k = 0;
    while (!nodes[k].is_leaf()) {
        const TreeNode& n = nodes[k];
        k = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left : n.right);
    }
    return nodes[k].value;
}

std::size_t RegressionTree::depth() const {
    std::vector<std::size_t> d(nodes.size(), 0);
    std::size_t best = 0;
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        best = std::max(best, d[k]);
        if (!nodes[k].is_leaf()) {
            d[static_cast<std::size_t>(nodes[k].left)] = d[k] + 1;
            d[static_cast<std::size_t>(nodes[k].right)] = d[k] + 1;
        }
    }
    return best;
}

std::size_t RegressionTree::leaf_count() const {
    return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

namespace {

using SortedIndex = std::vector<std::vector<std::uint32_t>>;

SortedIndex presort(const DenseMatrix& X) {
    SortedIndex out(X.cols());
    for (std::size_t f = 0; f < X.cols(); ++f) {
        auto& idx = out[f];
        idx.resize(X.rows());
        std::iota(idx.begin(), idx.end(), 0u);
        std::stable_sort(idx.begin(), idx.end(), [&](std::uint32_t a, std::uint32_t b) { return X(a, f) < X(b, f); });
    }
    return out;
}

struct NodeStats {
    double g = 0.0;
    double h = 0.0;
    std::size_t count = 0;
};

struct SplitCandidate {
    double gain = 0.0;
    int feature = -1;
    double threshold = 0.0;
};

struct ScanState {
    double gl = 0.0;
    double hl = 0.0;
    std::size_t nl = 0;
    double last = 0.0;
};

constexpr double kRelativeGainFloor = 1e-12;

RegressionTree grow_tree(const DenseMatrix& X, const SortedIndex& sorted, std::span<const double> grad,
                         std::span<const double> hess, const TreeParams& params) {
    const std::size_t n = X.rows();
    if (n == 0) {
        throw std::invalid_argument("fit_tree: no rows");
    }
    if (grad.size() != n || hess.size() != n) throw std::invalid_argument("fit_tree: gradient length mismatch");

    RegressionTree tree;
    tree.max_depth = params.max_depth;
    tree.nodes.emplace_back();
    std::vector<int> node_of(n, 0);
    std::vector<int> frontier{0};
    const std::size_t min_leaf = std::max<std::size_t>(params.min_samples_leaf, 1);

    for (std::size_t depth = 0; !frontier.empty(); ++depth) {
        const std::size_t n_nodes = tree.nodes.size();
        std::vector<NodeStats> stats(n_nodes);
        for (std::size_t r = 0; r < n; ++r) {
            auto& s = stats[static_cast<std::size_t>(node_of[r])];
            s.g += grad[r];
            s.h += hess[r];
            ++s.count;
        }
        for (int k : frontier) {
            const auto& s = stats[static_cast<std::size_t>(k)];
            tree.nodes[static_cast<std::size_t>(k)].value = s.h > 0.0 ? -s.g / s.h : 0.0;
        }
        if (depth >= params.max_depth) break;

        std::vector<char> in_frontier(n_nodes, 0);
        for (int k : frontier) in_frontier[static_cast<std::size_t>(k)] = 1;
        std::vector<SplitCandidate> best(n_nodes);
        std::vector<ScanState> scan(n_nodes);

        for (std::size_t f = 0; f < X.cols(); ++f) {
            for (int k : frontier) scan[static_cast<std::size_t>(k)] = ScanState{};
            for (std::uint32_t r : sorted[f]) {
                const auto k = static_cast<std::size_t>(node_of[r]);
                if (!in_frontier[k]) continue;
                ScanState& st = scan[k];
                const double x = X(r, f);
                const NodeStats& tot = stats[k];
                if (st.nl >= min_leaf && tot.count - st.nl >= min_leaf && x > st.last) {
                    const double gr = tot.g - st.gl;
                    const double hr = tot.h - st.hl;
                    if (st.hl > 0.0 && hr > 0.0) {
                        const double sl = st.gl * st.gl / st.hl;
                        const double sr = gr * gr / hr;
                        const double sp = tot.g * tot.g / tot.h;
                        const double gain = sl + sr - sp;
                        if (gain > kRelativeGainFloor * (sl + sr + sp) && gain > best[k].gain) {
                            double thr = 0.5 * (st.last + x);
                            if (!(thr > st.last)) thr = x;
                            best[k] = {gain, static_cast<int>(f), thr};
                        }
                    }
                }
                st.gl += grad[r];
                st.hl += hess[r];
                ++st.nl;
                st.last = x;
            }
        }

        std::vector<int> next;
        for (int k : frontier) {
            const SplitCandidate& b = best[static_cast<std::size_t>(k)];
            if (b.feature < 0) continue;
            const int left = static_cast<int>(tree.nodes.size());
            tree.nodes.emplace_back();
            tree.nodes.emplace_back();
            TreeNode& node = tree.nodes[static_cast<std::size_t>(k)];
            node.feature = b.feature;
            node.threshold = b.threshold;
            node.left = left;
            node.right = left + 1;
            next.push_back(left);
            next.push_back(left + 1);
        }
        if (next.empty()) break;
        for (std::size_t r = 0; r < n; ++r) {
            const TreeNode& node = tree.nodes[static_cast<std::size_t>(node_of[r])];
            if (node.is_leaf()) continue;
            node_of[r] = X(r, static_cast<std::size_t>(node.feature)) < node.threshold ? node.left : node.right;
        }
        frontier = std::move(next);
    }
    return tree;
}

double eval_metric(const BoostLoss& loss, std::span<const double> y, std::span<const double> pred) {
    double s = 0.0;
    if (loss.kind == BoostLoss::Kind::Squared) {
        for (std::size_t i = 0; i < y.size(); ++i) s += (y[i] - pred[i]) * (y[i] - pred[i]);
        return std::sqrt(s / static_cast<double>(y.size()));
    }
    for (std::size_t i = 0; i < y.size(); ++i) s += pinball_loss(y[i], pred[i], loss.tau);
    return s / static_cast<double>(y.size());
}

double training_loss(const BoostLoss& loss, std::span<const double> y, std::span<const double> pred) {
    double s = 0.0;
    if (loss.kind == BoostLoss::Kind::Squared) {
        for (std::size_t i = 0; i < y.size(); ++i) s += 0.5 * (y[i] - pred[i]) * (y[i] - pred[i]);
        return s / static_cast<double>(y.size());
    }
    return eval_metric(loss, y, pred);
}

}  // namespace

RegressionTree fit_tree(const DenseMatrix& X, std::span<const double> grad, std::span<const double> hess,
                        const TreeParams& params) {
    if (X.rows() < 2 * std::max<std::size_t>(params.min_samples_leaf, 1)) {
        throw std::invalid_argument("fit_tree: need at least 2 * min_samples_leaf rows");
    }
    return grow_tree(X, presort(X), grad, hess, params);
}

double empirical_quantile(std::vector<double> values, double tau) {
    if (values.empty()) throw std::invalid_argument("empirical_quantile: empty input");
    std::sort(values.begin(), values.end());
    const double pos = tau * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

double GbdtModel::predict_row(std::span<const double> x) const {
    double v = base_score;
    const std::size_t n = std::min(best_iteration, trees.size());
    for (std::size_t m = 0; m < n; ++m) v += learning_rate * trees[m].predict(x);
    return v;
}

GbdtModel gbdt_fit(const DenseMatrix& X_train, std::span<const double> y_train, const DenseMatrix& X_val,
                   std::span<const double> y_val, const GbdtParams& params, std::vector<std::string> feature_order) {
    if (X_train.rows() == 0 || X_val.rows() == 0) throw std::invalid_argument("gbdt_fit: empty train or validation set");
    if (X_train.rows() != y_train.size() || X_val.rows() != y_val.size()) {
        throw std::invalid_argument("gbdt_fit: feature rows do not match targets");
    }
    if (X_train.cols() != X_val.cols()) throw std::invalid_argument("gbdt_fit: train/validation feature mismatch");
    if (!(params.learning_rate > 0.0 && params.learning_rate <= 1.0)) {
        throw std::invalid_argument("gbdt_fit: learning_rate must lie in (0, 1]");
    }
    if (params.loss.kind == BoostLoss::Kind::Pinball) check_tau(params.loss.tau);

    GbdtModel model;
    model.learning_rate = params.learning_rate;
    model.loss = params.loss;
    model.params = params;
    model.feature_order = std::move(feature_order);
    model.base_score = params.loss.kind == BoostLoss::Kind::Squared
                           ? std::accumulate(y_train.begin(), y_train.end(), 0.0) / static_cast<double>(y_train.size())
                           : empirical_quantile({y_train.begin(), y_train.end()}, params.loss.tau);

    std::vector<double> pred_train(y_train.size(), model.base_score);
    std::vector<double> pred_val(y_val.size(), model.base_score);
    model.validation_history.push_back(eval_metric(params.loss, y_val, pred_val));
    model.training_history.push_back(training_loss(params.loss, y_train, pred_train));
    double best = model.validation_history.back();
    model.best_iteration = 0;

    const SortedIndex sorted = presort(X_train);
    for (std::size_t m = 1; m <= params.n_estimators; ++m) {
        const Gradients g = loss_gradients(params.loss, y_train, pred_train);
        RegressionTree tree = grow_tree(X_train, sorted, g.grad, g.hess, params.tree);
        for (std::size_t r = 0; r < X_train.rows(); ++r) pred_train[r] += params.learning_rate * tree.predict(X_train.row(r));
        for (std::size_t r = 0; r < X_val.rows(); ++r) pred_val[r] += params.learning_rate * tree.predict(X_val.row(r));
        model.trees.push_back(std::move(tree));

        const double metric = eval_metric(params.loss, y_val, pred_val);
        model.validation_history.push_back(metric);
        model.training_history.push_back(training_loss(params.loss, y_train, pred_train));
        if (metric < best) {
            best = metric;
            model.best_iteration = m;
        } else if (params.early_stopping_rounds > 0 && m - model.best_iteration >= params.early_stopping_rounds) {
            break;
        }
    }
    return model;
}

std::vector<double> gbdt_predict(const GbdtModel& model, const DenseMatrix& X) {
    std::vector<double> out(X.rows());
    for (std::size_t r = 0; r < X.rows(); ++r) out[r] = model.predict_row(X.row(r));
    return out;
}

std::vector<double> gbdt_predict(const GbdtModel& model, const DenseMatrix& X,
                                 const std::vector<std::string>& feature_order) {
    if (feature_order != model.feature_order) {
        for (const auto& name : feature_order) {
            if (std::find(model.feature_order.begin(), model.feature_order.end(), name) == model.feature_order.end()) {
                throw std::invalid_argument("gbdt_predict: unknown feature '" + name + "'");
            }
        }
        throw std::invalid_argument("gbdt_predict: feature order differs from training");
    }
    return gbdt_predict(model, X);
}

ForecastDistribution gbdt_predict_quantiles(const std::vector<GbdtModel>& models, const DenseMatrix& X,
                                            const std::vector<Timestamp>& timestamps) {
    if (models.empty()) throw std::invalid_argument("gbdt_predict_quantiles: no models");
    ForecastDistribution dist;
    dist.timestamps = timestamps;
    std::vector<std::size_t> order(models.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return models[a].loss.tau < models[b].loss.tau; });
    for (std::size_t k : order) {
        if (models[k].loss.kind != BoostLoss::Kind::Pinball) {
            throw std::invalid_argument("gbdt_predict_quantiles: model is not a quantile model");
        }
        dist.levels.push_back(models[k].loss.tau);
        dist.values.push_back(gbdt_predict(models[k], X));
    }
    sort_quantiles(dist);
    dist.validate();
    return dist;
}

nlohmann::json gbdt_to_json(const GbdtModel& model) {
    nlohmann::json doc;
    doc["format"] = "loadfc-gbdt";
    doc["version"] = 1;
    doc["learning_rate"] = model.learning_rate;
    doc["base_score"] = model.base_score;
    doc["loss"] = {{"kind", model.loss.kind == BoostLoss::Kind::Squared ? "squared" : "pinball"},
                   {"tau", model.loss.tau}};
    doc["best_iteration"] = model.best_iteration;
    doc["feature_order"] = model.feature_order;
    doc["params"] = {{"n_estimators", model.params.n_estimators},
                     {"learning_rate", model.params.learning_rate},
                     {"max_depth", model.params.tree.max_depth},
                     {"min_samples_leaf", model.params.tree.min_samples_leaf},
                     {"early_stopping_rounds", model.params.early_stopping_rounds}};
    doc["validation_history"] = model.validation_history;
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& t : model.trees) {
        nlohmann::json jt;
        std::vector<int> feature, left, right;
        std::vector<double> threshold, value;
        for (const auto& n : t.nodes) {
            feature.push_back(n.feature);
            threshold.push_back(n.threshold);
            left.push_back(n.left);
            right.push_back(n.right);
            value.push_back(n.value);
        }
        jt["max_depth"] = t.max_depth;
        jt["feature"] = feature;
        jt["threshold"] = threshold;
        jt["left"] = left;
        jt["right"] = right;
        jt["value"] = value;
        trees.push_back(std::move(jt));
    }
    doc["trees"] = std::move(trees);
    return doc;
}

GbdtModel gbdt_from_json(const nlohmann::json& doc) {
    if (doc.value("format", "") != "loadfc-gbdt") throw std::invalid_argument("not a GBDT model document");
    GbdtModel m;
    m.learning_rate = doc.at("learning_rate").get<double>();
    m.base_score = doc.at("base_score").get<double>();
    const auto& loss = doc.at("loss");
    m.loss.kind = loss.at("kind").get<std::string>() == "squared" ? BoostLoss::Kind::Squared : BoostLoss::Kind::Pinball;
    m.loss.tau = loss.at("tau").get<double>();
    m.best_iteration = doc.at("best_iteration").get<std::size_t>();
    m.feature_order = doc.at("feature_order").get<std::vector<std::string>>();
    const auto& p = doc.at("params");
    m.params.n_estimators = p.at("n_estimators").get<std::size_t>();
    m.params.learning_rate = p.at("learning_rate").get<double>();
    m.params.tree.max_depth = p.at("max_depth").get<std::size_t>();
    m.params.tree.min_samples_leaf = p.at("min_samples_leaf").get<std::size_t>();
    m.params.early_stopping_rounds = p.at("early_stopping_rounds").get<std::size_t>();
    m.params.loss = m.loss;
    m.validation_history = doc.at("validation_history").get<std::vector<double>>();
    for (const auto& jt : doc.at("trees")) {
        RegressionTree t;
        t.max_depth = jt.at("max_depth").get<std::size_t>();
        const auto feature = jt.at("feature").get<std::vector<int>>();
        const auto threshold = jt.at("threshold").get<std::vector<double>>();
        const auto left = jt.at("left").get<std::vector<int>>();
        const auto right = jt.at("right").get<std::vector<int>>();
        const auto value = jt.at("value").get<std::vector<double>>();
        const std::size_t n = feature.size();
        if (threshold.size() != n || left.size() != n || right.size() != n || value.size() != n || n == 0) {
            throw std::invalid_argument("GBDT tree arrays disagree in length");
        }
        for (std::size_t k = 0; k < n; ++k) {
            const TreeNode node{feature[k], threshold[k], left[k], right[k], value[k]};
            if (!node.is_leaf() && (node.left <= static_cast<int>(k) || node.right <= static_cast<int>(k) ||
                                    node.left >= static_cast<int>(n) || node.right >= static_cast<int>(n))) {
                throw std::invalid_argument("GBDT tree has invalid child index");
            }
            t.nodes.push_back(node);
        }
        m.trees.push_back(std::move(t));
    }
    return m;
}

}  // namespace loadfc
