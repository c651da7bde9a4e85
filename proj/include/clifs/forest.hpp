#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "clifs/random.hpp"
#include "json.hpp"

namespace clifs::forest {

using Row = std::vector<double>;
using Matrix = std::vector<Row>;

enum class Task { classification, regression };

struct TreeParams {
    std::optional<int> max_depth;  // unbounded when empty
    int min_samples_leaf = 1;
    int min_samples_split = 2;
    std::size_t max_features = 0;  // 0 = all features
};

// CART tree in flat arrays. Classification uses weighted Gini impurity and
// stores the normalized class distribution at each node; regression uses
// weighted variance and stores the weighted mean.
class DecisionTree {
public:
    // rows: distinct sample indices; weights[i] > 0 for every listed row
    // (bootstrap multiplicity times class weight).
    void fit(const Matrix& x, std::span<const double> targets, Task task, std::size_t n_classes,
             std::span<const std::size_t> rows, std::span<const double> weights,
             const TreeParams& params, Rng& rng);

    // Leaf payload: class distribution or {mean}.
    std::span<const double> leaf_value(std::span<const double> row) const;

    std::size_t node_count() const { return feature_.size(); }
    std::size_t depth() const;
    // Sum of weighted impurity decreases per feature (unnormalized).
    const std::vector<double>& impurity_decrease() const { return decrease_; }

    nlohmann::json to_json() const;
    static DecisionTree from_json(const nlohmann::json& j, std::size_t n_features);

    bool operator==(const DecisionTree&) const = default;

private:
    struct Builder;

    std::size_t value_width_ = 1;
    std::vector<int> feature_;  // -1 at leaves
    std::vector<double> threshold_;
    std::vector<int> left_;
    std::vector<int> right_;
    std::vector<double> value_;  // node_count * value_width_
    std::vector<double> decrease_;
};

struct ForestParams {
    int n_estimators = 100;
    std::optional<int> max_depth;
    int min_samples_leaf = 1;
    int min_samples_split = 2;
    bool bootstrap = true;
    std::uint64_t seed = 42;
    // 0 picks the task default: floor(sqrt(F)) for classification,
    // max(1, F / 3) for regression.
    std::size_t max_features = 0;

    bool operator==(const ForestParams&) const = default;
};

// Tree i draws its bootstrap sample and feature subsets from an RNG seeded
// with (seed, i), so the model depends only on data, params and seed.
class RandomForest {
public:
    RandomForest() = default;

    // Labels in [0, n_classes). class_weights, when given, has n_classes
    // entries and multiplies each sample's weight.
    static RandomForest fit_classifier(const Matrix& x, const std::vector<int>& y, std::size_t n_classes,
                                       const std::vector<double>& class_weights, const ForestParams& params);
    static RandomForest fit_regressor(const Matrix& x, const std::vector<double>& y, const ForestParams& params);

    bool trained() const { return !trees_.empty(); }
    Task task() const { return task_; }
    std::size_t n_features() const { return n_features_; }
    std::size_t n_classes() const { return n_classes_; }
    const ForestParams& params() const { return params_; }
    const std::vector<DecisionTree>& trees() const { return trees_; }

    // Mean of per-tree normalized distributions.
    std::vector<double> predict_proba(std::span<const double> row) const;
    // argmax of predict_proba; lowest class index wins ties.
    int predict_class(std::span<const double> row) const;
    double predict_value(std::span<const double> row) const;

    // Per-tree impurity decreases normalized to 1, averaged over trees with
    // at least one split, renormalized. Uniform when no tree ever split.
    const std::vector<double>& importances() const { return importances_; }

    nlohmann::json to_json() const;
    static RandomForest from_json(const nlohmann::json& j);

    bool operator==(const RandomForest&) const = default;

private:
    void finish_importances();

    Task task_ = Task::classification;
    std::size_t n_features_ = 0;
    std::size_t n_classes_ = 0;
    ForestParams params_;
    std::vector<DecisionTree> trees_;
    std::vector<double> importances_;
};

}  // namespace clifs::forest
