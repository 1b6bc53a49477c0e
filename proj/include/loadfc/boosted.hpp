#pragma once

#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "loadfc/metrics.hpp"
#include "loadfc/types.hpp"

namespace loadfc {

struct BoostLoss {
    enum class Kind { Squared, Pinball };
    Kind kind = Kind::Squared;
    double tau = 0.5;

    static BoostLoss squared() { return {}; }
    static BoostLoss pinball(double tau) { return {Kind::Pinball, tau}; }
};

struct Gradients {
    std::vector<double> grad;
    std::vector<double> hess;
};

/// Squared: grad = pred - y, hess = 1. Pinball: subgradient of the pinball loss, hess = 1.
Gradients loss_gradients(const BoostLoss& loss, std::span<const double> y, std::span<const double> pred);

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;  // leaf output

    bool is_leaf() const { return feature < 0; }
};

struct RegressionTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root
    std::size_t max_depth = 0;

    /// Rows with x[feature] < threshold go left.
    double predict(std::span<const double> x) const;
    std::size_t depth() const;
    std::size_t leaf_count() const;
};

struct TreeParams {
    std::size_t max_depth = 6;
    std::size_t min_samples_leaf = 1;
};

/// Level-wise exact greedy growth; gain = GL^2/HL + GR^2/HR - G^2/H, leaf = -G/H.
RegressionTree fit_tree(const DenseMatrix& X, std::span<const double> grad, std::span<const double> hess,
                        const TreeParams& params);

struct GbdtParams {
    std::size_t n_estimators = 1000;
    double learning_rate = 0.05;
    TreeParams tree;
    std::size_t early_stopping_rounds = 10;
    BoostLoss loss;
};

struct GbdtModel {
    std::vector<RegressionTree> trees;
    double learning_rate = 0.05;
    double base_score = 0.0;
    BoostLoss loss;
    std::size_t best_iteration = 0;
    GbdtParams params;
    std::vector<std::string> feature_order;
    std::vector<double> validation_history;  // metric after 0, 1, 2, ... trees
    std::vector<double> training_history;    // training loss after 0, 1, 2, ... trees

    double predict_row(std::span<const double> x) const;
};

GbdtModel gbdt_fit(const DenseMatrix& X_train, std::span<const double> y_train, const DenseMatrix& X_val,
                   std::span<const double> y_val, const GbdtParams& params,
                   std::vector<std::string> feature_order = {});

std::vector<double> gbdt_predict(const GbdtModel& model, const DenseMatrix& X);
/// Checks `feature_order` against the model's training order.
std::vector<double> gbdt_predict(const GbdtModel& model, const DenseMatrix& X,
                                 const std::vector<std::string>& feature_order);

/// One model per quantile level, rows repaired by sorting.
ForecastDistribution gbdt_predict_quantiles(const std::vector<GbdtModel>& models, const DenseMatrix& X,
                                            const std::vector<Timestamp>& timestamps);

/// numpy-style linearly interpolated empirical quantile.
double empirical_quantile(std::vector<double> values, double tau);

nlohmann::json gbdt_to_json(const GbdtModel& model);
GbdtModel gbdt_from_json(const nlohmann::json& doc);

}  // namespace loadfc
