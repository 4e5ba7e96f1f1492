#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "nids/binary_io.hpp"
#include "nids/preprocess.hpp"

namespace nids {

using ClassWeight = std::array<double, 2>;

struct TreeNode {
    std::int32_t feature = -1;  // -1 marks a leaf
    double threshold = 0.0;     // rows with x[feature] <= threshold go left
    std::uint32_t left = 0, right = 0;
    double value = 0.0;         // leaf output
};

struct DecisionTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root

    double predict(std::span<const double> row) const;
    std::size_t depth() const;
    std::size_t leaf_index(std::span<const double> row) const;
};

struct ForestConfig {
    std::size_t n_trees = 200;
    std::size_t max_depth = 10;
    ClassWeight class_weight{1.0, 1.0};
    std::size_t max_features = 0;  // 0 = floor(sqrt(F)), at least 1
    bool bootstrap = true;
    std::size_t min_samples_split = 2;
    std::uint64_t rng_seed = 0;

    void validate() const;
};

struct RandomForest {
    std::size_t n_features = 0;
    std::vector<DecisionTree> trees;

    // Mean of the per-tree leaf values (weighted class-1 fractions).
    std::vector<double> predict_proba(const FeatureMatrix& m) const;
    double predict_row(std::span<const double> row) const;
};

struct BoostConfig {
    std::size_t n_estimators = 100;
    std::size_t max_depth = 6;
    double learning_rate = 0.1;
    std::size_t min_samples_split = 2;
    std::uint64_t rng_seed = 0;

    void validate() const;
};

struct GradientBoosting {
    std::size_t n_features = 0;
    double init_score = 0.0;  // base-rate log-odds
    double learning_rate = 0.1;
    std::vector<DecisionTree> trees;

    // Raw score after the first `stages` trees (all when stages exceeds the count).
    std::vector<double> decision_function(const FeatureMatrix& m, std::size_t stages = SIZE_MAX) const;
    std::vector<double> predict_proba(const FeatureMatrix& m, std::size_t stages = SIZE_MAX) const;
};

struct LogisticConfig {
    std::size_t max_iterations = 1000;
    ClassWeight class_weight{1.0, 4.0};
    double tolerance = 1e-6;  // on the gradient's Euclidean norm
    double l2 = 1.0;          // penalty (l2 / 2) * ||w||^2, intercept excluded
    bool fit_intercept = true;

    void validate() const;
};

struct LogisticModel {
    std::vector<double> weights;
    double intercept = 0.0;
    bool converged = false;
    std::size_t iterations = 0;
    double gradient_norm = 0.0;

    std::vector<double> decision_function(const FeatureMatrix& m) const;
    std::vector<double> predict_proba(const FeatureMatrix& m) const;
};

// Permutation sorting rows lexicographically by (features, label). Training
// runs on this order so that results do not depend on the input row order.
std::vector<std::size_t> canonical_row_order(const FeatureMatrix& m, std::span<const std::uint8_t> labels);

// Gini impurity 1 - p0^2 - p1^2 of a node holding class weights w0 and w1.
double weighted_gini(double w0, double w1);

RandomForest train_random_forest(const FeatureMatrix& m, std::span<const std::uint8_t> labels, const ForestConfig& cfg);
GradientBoosting train_gradient_boosting(const FeatureMatrix& m, std::span<const std::uint8_t> labels,
                                         const BoostConfig& cfg);
LogisticModel train_logistic_regression(const FeatureMatrix& m, std::span<const std::uint8_t> labels,
                                        const LogisticConfig& cfg);

// Objective sum_i s_i * logloss_i + (l2/2)||w||^2 and its gradient (weights, then intercept).
double logistic_objective(const LogisticModel& model, const FeatureMatrix& m, std::span<const std::uint8_t> labels,
                          const LogisticConfig& cfg, std::vector<double>* gradient = nullptr);

void write_tree(ByteWriter& w, const DecisionTree& t);
DecisionTree read_tree(ByteReader& r);
void write_forest(ByteWriter& w, const RandomForest& f);
RandomForest read_forest(ByteReader& r);
void write_boosting(ByteWriter& w, const GradientBoosting& g);
GradientBoosting read_boosting(ByteReader& r);
void write_logistic(ByteWriter& w, const LogisticModel& m);
LogisticModel read_logistic(ByteReader& r);

}  // namespace nids
