#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "json.hpp"
#include "optbin/labels.hpp"
#include "optbin/learning.hpp"

namespace optbin {

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;  // x[feature] <= threshold goes left
    double value = 0.0;
    int left = -1;
    int right = -1;

    bool is_leaf() const { return feature < 0; }

    friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

/// Axis-aligned regression tree; node 0 is the root.
class RegressionTree {
public:
    RegressionTree() = default;
    explicit RegressionTree(std::vector<TreeNode> nodes);

    double predict(std::span<const double> x) const;
    int depth() const;
    std::size_t leaf_count() const;
    const std::vector<TreeNode>& nodes() const { return nodes_; }

    /// Preorder dump: {"split": [feature, threshold]} or {"leaf": value}.
    nlohmann::json to_json() const;
    static RegressionTree from_json(const nlohmann::json& j);

    friend bool operator==(const RegressionTree&, const RegressionTree&) = default;

private:
    std::vector<TreeNode> nodes_;
};

/// Column-major copy of a feature matrix with each column's sample order
/// sorted by value. Built once per boosting run and shared by every tree.
class SortedColumns {
public:
    explicit SortedColumns(const std::vector<std::vector<double>>& rows);

    std::size_t samples() const { return samples_; }
    std::size_t features() const { return columns_.size(); }
    double value(std::size_t feature, std::size_t sample) const { return columns_[feature][sample]; }
    std::span<const std::uint32_t> order(std::size_t feature) const { return order_[feature]; }

private:
    std::size_t samples_ = 0;
    std::vector<std::vector<double>> columns_;
    std::vector<std::vector<std::uint32_t>> order_;
};

struct TreeConfig {
    int max_depth = 3;
    double min_gain = 1e-12;
    std::size_t min_samples_split = 2;
};

/// Greedy least-squares tree: each node takes the (feature, midpoint) split
/// with the largest squared-error reduction; leaves hold target means.
RegressionTree fit_tree(const SortedColumns& columns, std::span<const double> targets,
                        const TreeConfig& cfg = {});
RegressionTree fit_tree(const std::vector<std::vector<double>>& rows, std::span<const double> targets,
                        const TreeConfig& cfg = {});

/// ln(max(p_k, 1e-12)) for empirical class frequencies p_k.
std::vector<double> initial_scores(std::span<const BinLabel> labels, int n_classes);

/// onehot(true_class) - softmax(scores): the negative CE gradient w.r.t. scores.
std::vector<double> residuals(std::span<const double> scores, BinLabel true_class);

class GbtModel {
public:
    std::size_t input_size = 0;
    double shrinkage = 0.3;
    std::vector<double> base_scores;
    std::vector<std::vector<RegressionTree>> rounds;  // rounds[m][class]

    std::size_t n_classes() const { return base_scores.size(); }
    std::vector<double> scores(std::span<const double> x) const;
    std::vector<double> probabilities(std::span<const double> x) const;
    BinLabel predict_bin(std::span<const double> x) const;

    nlohmann::json to_json() const;
    static GbtModel from_json(const nlohmann::json& j);

    friend bool operator==(const GbtModel&, const GbtModel&) = default;
};

struct GbtConfig {
    int n_rounds = 100;
    int max_depth = 3;
    double shrinkage = 0.3;
    int n_classes = 50;

    void validate() const;
};

struct GbtTrainResult {
    GbtModel model;
    std::vector<double> round_loss;  // [0] after initial scores, [m] after round m
};

GbtTrainResult boost(const TrainingSet& data, const GbtConfig& cfg);

}  // namespace optbin
