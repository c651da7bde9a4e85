#include "clifs/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "clifs/errors.hpp"

namespace clifs::forest {

using nlohmann::json;

namespace {

constexpr double kMinGain = 1e-12;

struct Sample {
    std::size_t row;
    double weight;
};

}  // namespace

struct DecisionTree::Builder {
    DecisionTree& tree;
    const Matrix& x;
    std::span<const double> y;
    Task task;
    std::size_t n_classes;
    const TreeParams& params;
    Rng& rng;
    std::size_t n_features;

    // Writes the node payload and returns W * impurity.
    double node_value(const std::vector<Sample>& s, std::vector<double>& value) const {
        double w = 0.0;
        for (const auto& e : s) w += e.weight;
        if (task == Task::classification) {
            value.assign(n_classes, 0.0);
            for (const auto& e : s) value[static_cast<std::size_t>(y[e.row])] += e.weight;
            double sq = 0.0;
            for (double c : value) sq += c * c;
            for (double& c : value) c /= w;
            return w - sq / w;
        }
        double sy = 0.0, syy = 0.0;
        for (const auto& e : s) {
            sy += e.weight * y[e.row];
            syy += e.weight * y[e.row] * y[e.row];
        }
        value.assign(1, sy / w);
        return std::max(0.0, syy - sy * sy / w);
    }

    struct Split {
        int feature = -1;
        double threshold = 0.0;
        double gain = 0.0;
    };

    // Best split on one feature; returns false when the feature is constant.
    bool best_on_feature(std::vector<Sample>& s, std::size_t f, double parent, Split& best) const {
        std::sort(s.begin(), s.end(), [&](const Sample& a, const Sample& b) {
            const double va = x[a.row][f], vb = x[b.row][f];
            if (va != vb) return va < vb;
            return a.row < b.row;
        });
        if (x[s.front().row][f] == x[s.back().row][f]) return false;

        const std::size_t n = s.size();
        const auto min_leaf = static_cast<std::size_t>(std::max(1, params.min_samples_leaf));

        std::vector<double> left_c, right_c;
        double wl = 0.0, wr = 0.0, syl = 0.0, syyl = 0.0, syr = 0.0, syyr = 0.0;
        if (task == Task::classification) {
            left_c.assign(n_classes, 0.0);
            right_c.assign(n_classes, 0.0);
            for (const auto& e : s) right_c[static_cast<std::size_t>(y[e.row])] += e.weight;
        }
        for (const auto& e : s) {
            wr += e.weight;
            syr += e.weight * y[e.row];
            syyr += e.weight * y[e.row] * y[e.row];
        }

        for (std::size_t i = 0; i + 1 < n; ++i) {
            const auto& e = s[i];
            wl += e.weight;
            wr -= e.weight;
            if (task == Task::classification) {
                const auto c = static_cast<std::size_t>(y[e.row]);
                left_c[c] += e.weight;
                right_c[c] -= e.weight;
            } else {
                syl += e.weight * y[e.row];
                syyl += e.weight * y[e.row] * y[e.row];
                syr -= e.weight * y[e.row];
                syyr -= e.weight * y[e.row] * y[e.row];
            }
            const double v = x[e.row][f], next = x[s[i + 1].row][f];
            if (v == next) continue;
            if (i + 1 < min_leaf || n - (i + 1) < min_leaf) continue;

            double child;
            if (task == Task::classification) {
                double sql = 0.0, sqr = 0.0;
                for (std::size_t c = 0; c < n_classes; ++c) {
                    sql += left_c[c] * left_c[c];
                    sqr += right_c[c] * right_c[c];
                }
                child = (wl - sql / wl) + (wr - sqr / wr);
            } else {
                child = std::max(0.0, syyl - syl * syl / wl) + std::max(0.0, syyr - syr * syr / wr);
            }
            const double gain = parent - child;
            if (gain > best.gain + kMinGain) {
                double t = v + (next - v) / 2.0;
                if (!(t < next)) t = v;
                best = {static_cast<int>(f), t, gain};
            }
        }
        return true;
    }

    std::size_t build(std::vector<Sample> s, int depth) {
        const std::size_t id = tree.feature_.size();
        std::vector<double> value;
        const double impurity = node_value(s, value);
        tree.feature_.push_back(-1);
        tree.threshold_.push_back(0.0);
        tree.left_.push_back(-1);
        tree.right_.push_back(-1);
        tree.value_.insert(tree.value_.end(), value.begin(), value.end());

        const bool depth_ok = !params.max_depth || depth < *params.max_depth;
        const auto n = s.size();
        if (!depth_ok || n < static_cast<std::size_t>(std::max(2, params.min_samples_split)) ||
            n < 2 * static_cast<std::size_t>(std::max(1, params.min_samples_leaf)) || impurity <= kMinGain)
            return id;

        // Visit features in random order until max_features non-constant
        // ones have been evaluated.
        std::vector<std::size_t> order = iota_indices(n_features);
        rng.shuffle(order);
        const std::size_t want = params.max_features == 0 ? n_features : std::min(params.max_features, n_features);
        Split best;
        std::size_t visited = 0;
        for (std::size_t k = 0; k < order.size() && (visited < want || best.feature < 0); ++k) {
            if (best_on_feature(s, order[k], impurity, best)) ++visited;
        }
        if (best.feature < 0) return id;

        std::vector<Sample> left, right;
        for (const auto& e : s) (x[e.row][static_cast<std::size_t>(best.feature)] <= best.threshold ? left : right).push_back(e);
        s.clear();
        s.shrink_to_fit();

        tree.decrease_[static_cast<std::size_t>(best.feature)] += best.gain;
        tree.feature_[id] = best.feature;
        tree.threshold_[id] = best.threshold;
        const auto l = build(std::move(left), depth + 1);
        tree.left_[id] = static_cast<int>(l);
        const auto r = build(std::move(right), depth + 1);
        tree.right_[id] = static_cast<int>(r);
        return id;
    }
};

void DecisionTree::fit(const Matrix& x, std::span<const double> targets, Task task, std::size_t n_classes,
                       std::span<const std::size_t> rows, std::span<const double> weights, const TreeParams& params,
                       Rng& rng) {
    if (rows.empty()) throw UsageError("decision tree: no training rows");
    if (rows.size() != weights.size()) throw UsageError("decision tree: rows and weights differ in length");
    const std::size_t nf = x.at(rows.front()).size();
    if (nf == 0) throw UsageError("decision tree: no features");
    if (task == Task::classification && n_classes == 0) throw UsageError("decision tree: no classes");

    *this = DecisionTree{};
    value_width_ = task == Task::classification ? n_classes : 1;
    decrease_.assign(nf, 0.0);

    std::vector<Sample> samples;
    samples.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (!(weights[i] > 0.0)) throw UsageError("decision tree: sample weights must be positive");
        if (x[rows[i]].size() != nf) throw UsageError("decision tree: ragged feature matrix");
        if (task == Task::classification) {
            const double c = targets[rows[i]];
            if (c < 0 || c >= static_cast<double>(n_classes) || c != std::floor(c))
                throw UsageError("decision tree: class label out of range");
        }
        samples.push_back({rows[i], weights[i]});
    }
    Builder b{*this, x, targets, task, n_classes, params, rng, nf};
    b.build(std::move(samples), 0);
}

std::span<const double> DecisionTree::leaf_value(std::span<const double> row) const {
    if (feature_.empty()) throw UsageError("decision tree is not trained");
    std::size_t node = 0;
    while (feature_[node] >= 0) {
        const auto f = static_cast<std::size_t>(feature_[node]);
        if (f >= row.size()) throw UsageError("decision tree: row has too few features");
        node = static_cast<std::size_t>(row[f] <= threshold_[node] ? left_[node] : right_[node]);
    }
    return {value_.data() + node * value_width_, value_width_};
}

std::size_t DecisionTree::depth() const {
    if (feature_.empty()) return 0;
    std::size_t best = 0;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
    while (!stack.empty()) {
        auto [node, d] = stack.back();
        stack.pop_back();
        best = std::max(best, d);
        if (feature_[node] >= 0) {
            stack.emplace_back(static_cast<std::size_t>(left_[node]), d + 1);
            stack.emplace_back(static_cast<std::size_t>(right_[node]), d + 1);
        }
    }
    return best;
}

json DecisionTree::to_json() const {
    return {{"value_width", value_width_}, {"feature", feature_}, {"threshold", threshold_}, {"left", left_},
            {"right", right_},             {"value", value_},     {"decrease", decrease_}};
}

DecisionTree DecisionTree::from_json(const json& j, std::size_t n_features) {
    DecisionTree t;
    try {
        t.value_width_ = j.at("value_width").get<std::size_t>();
        t.feature_ = j.at("feature").get<std::vector<int>>();
        t.threshold_ = j.at("threshold").get<std::vector<double>>();
        t.left_ = j.at("left").get<std::vector<int>>();
        t.right_ = j.at("right").get<std::vector<int>>();
        t.value_ = j.at("value").get<std::vector<double>>();
        t.decrease_ = j.at("decrease").get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw FormatError(std::string("decision tree: ") + e.what());
    }
    const auto n = t.feature_.size();
    if (n == 0 || t.value_width_ == 0 || t.threshold_.size() != n || t.left_.size() != n || t.right_.size() != n ||
        t.value_.size() != n * t.value_width_ || t.decrease_.size() != n_features)
        throw FormatError("decision tree: inconsistent array sizes");
    for (std::size_t i = 0; i < n; ++i) {
        if (t.feature_[i] < 0) continue;
        if (static_cast<std::size_t>(t.feature_[i]) >= n_features)
            throw FormatError("decision tree: split feature out of range");
        // Children are allocated after their parent, which also rules out cycles.
        for (int c : {t.left_[i], t.right_[i]})
            if (c <= static_cast<int>(i) || static_cast<std::size_t>(c) >= n)
                throw FormatError("decision tree: bad child index");
    }
    return t;
}

// ---- forest ---------------------------------------------------------------

namespace {

std::size_t default_max_features(Task task, std::size_t f) {
    if (task == Task::classification)
        return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(f)))));
    return std::max<std::size_t>(1, f / 3);
}

void check_params(const ForestParams& p) {
    if (p.n_estimators < 1) throw UsageError("n_estimators must be at least 1");
    if (p.max_depth && *p.max_depth < 1) throw UsageError("max_depth must be at least 1");
    if (p.min_samples_leaf < 1) throw UsageError("min_samples_leaf must be at least 1");
    if (p.min_samples_split < 2) throw UsageError("min_samples_split must be at least 2");
}

std::size_t check_matrix(const Matrix& x, std::size_t n_targets) {
    if (x.empty()) throw UsageError("random forest: empty training set");
    if (x.size() != n_targets) throw UsageError("random forest: feature and target counts differ");
    const auto f = x.front().size();
    if (f == 0) throw UsageError("random forest: no features");
    for (const auto& r : x) {
        if (r.size() != f) throw UsageError("random forest: ragged feature matrix");
        for (double v : r)
            if (!std::isfinite(v)) throw UsageError("random forest: non-finite feature value");
    }
    return f;
}

template <typename WeightFn>
std::vector<DecisionTree> grow(const Matrix& x, std::span<const double> targets, Task task, std::size_t n_classes,
                               const ForestParams& p, std::size_t n_features, WeightFn sample_weight) {
    const std::size_t n = x.size();
    TreeParams tp{p.max_depth, p.min_samples_leaf, p.min_samples_split,
                  p.max_features == 0 ? default_max_features(task, n_features) : p.max_features};
    std::vector<DecisionTree> trees(static_cast<std::size_t>(p.n_estimators));
    std::vector<double> counts(n);
    for (std::size_t t = 0; t < trees.size(); ++t) {
        Rng rng(p.seed, {static_cast<std::uint64_t>(t)});
        std::fill(counts.begin(), counts.end(), p.bootstrap ? 0.0 : 1.0);
        if (p.bootstrap)
            for (std::size_t k = 0; k < n; ++k) counts[rng.index(n)] += 1.0;
        std::vector<std::size_t> rows;
        std::vector<double> weights;
        for (std::size_t i = 0; i < n; ++i) {
            if (counts[i] == 0.0) continue;
            rows.push_back(i);
            weights.push_back(counts[i] * sample_weight(i));
        }
        trees[t].fit(x, targets, task, n_classes, rows, weights, tp, rng);
    }
    return trees;
}

}  // namespace

RandomForest RandomForest::fit_classifier(const Matrix& x, const std::vector<int>& y, std::size_t n_classes,
                                          const std::vector<double>& class_weights, const ForestParams& params) {
    check_params(params);
    const auto f = check_matrix(x, y.size());
    if (n_classes == 0) throw UsageError("random forest: n_classes must be positive");
    if (!class_weights.empty() && class_weights.size() != n_classes)
        throw UsageError("random forest: class_weights must have one entry per class");
    for (double w : class_weights)
        if (!(w > 0.0)) throw UsageError("random forest: class weights must be positive");
    std::vector<double> targets;
    for (int c : y) {
        if (c < 0 || static_cast<std::size_t>(c) >= n_classes) throw UsageError("random forest: label out of range");
        targets.push_back(static_cast<double>(c));
    }
    RandomForest m;
    m.task_ = Task::classification;
    m.n_features_ = f;
    m.n_classes_ = n_classes;
    m.params_ = params;
    m.trees_ = grow(x, targets, Task::classification, n_classes, params, f, [&](std::size_t i) {
        return class_weights.empty() ? 1.0 : class_weights[static_cast<std::size_t>(y[i])];
    });
    m.finish_importances();
    return m;
}

RandomForest RandomForest::fit_regressor(const Matrix& x, const std::vector<double>& y, const ForestParams& params) {
    check_params(params);
    const auto f = check_matrix(x, y.size());
    for (double v : y)
        if (!std::isfinite(v)) throw UsageError("random forest: non-finite regression target");
    RandomForest m;
    m.task_ = Task::regression;
    m.n_features_ = f;
    m.n_classes_ = 0;
    m.params_ = params;
    m.trees_ = grow(x, y, Task::regression, 0, params, f, [](std::size_t) { return 1.0; });
    m.finish_importances();
    return m;
}

void RandomForest::finish_importances() {
    importances_.assign(n_features_, 0.0);
    std::size_t contributing = 0;
    for (const auto& t : trees_) {
        const auto& d = t.impurity_decrease();
        const double total = std::accumulate(d.begin(), d.end(), 0.0);
        if (!(total > 0.0)) continue;
        ++contributing;
        for (std::size_t i = 0; i < n_features_; ++i) importances_[i] += d[i] / total;
    }
    if (contributing == 0) {
        std::fill(importances_.begin(), importances_.end(), 1.0 / static_cast<double>(n_features_));
        return;
    }
    const double total = std::accumulate(importances_.begin(), importances_.end(), 0.0);
    for (double& v : importances_) v /= total;
}

std::vector<double> RandomForest::predict_proba(std::span<const double> row) const {
    if (!trained() || task_ != Task::classification) throw UsageError("predict_proba needs a trained classifier");
    if (row.size() != n_features_) throw UsageError("predict_proba: wrong number of features");
    std::vector<double> p(n_classes_, 0.0);
    for (const auto& t : trees_) {
        auto v = t.leaf_value(row);
        for (std::size_t c = 0; c < n_classes_; ++c) p[c] += v[c];
    }
    for (double& v : p) v /= static_cast<double>(trees_.size());
    return p;
}

int RandomForest::predict_class(std::span<const double> row) const {
    const auto p = predict_proba(row);
    return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

double RandomForest::predict_value(std::span<const double> row) const {
    if (!trained() || task_ != Task::regression) throw UsageError("predict_value needs a trained regressor");
    if (row.size() != n_features_) throw UsageError("predict_value: wrong number of features");
    double s = 0.0;
    for (const auto& t : trees_) s += t.leaf_value(row)[0];
    return s / static_cast<double>(trees_.size());
}

json RandomForest::to_json() const {
    json trees = json::array();
    for (const auto& t : trees_) trees.push_back(t.to_json());
    json params{{"n_estimators", params_.n_estimators},
                {"max_depth", params_.max_depth ? json(*params_.max_depth) : json(nullptr)},
                {"min_samples_leaf", params_.min_samples_leaf},
                {"min_samples_split", params_.min_samples_split},
                {"bootstrap", params_.bootstrap},
                {"seed", params_.seed},
                {"max_features", params_.max_features}};
    return {{"task", task_ == Task::classification ? "classification" : "regression"},
            {"n_features", n_features_},
            {"n_classes", n_classes_},
            {"params", params},
            {"importances", importances_},
            {"trees", trees}};
}

RandomForest RandomForest::from_json(const json& j) {
    RandomForest m;
    try {
        const auto task = j.at("task").get<std::string>();
        if (task == "classification") m.task_ = Task::classification;
        else if (task == "regression") m.task_ = Task::regression;
        else throw FormatError("random forest: unknown task '" + task + "'");
        m.n_features_ = j.at("n_features").get<std::size_t>();
        m.n_classes_ = j.at("n_classes").get<std::size_t>();
        const auto& p = j.at("params");
        m.params_.n_estimators = p.at("n_estimators").get<int>();
        if (!p.at("max_depth").is_null()) m.params_.max_depth = p.at("max_depth").get<int>();
        m.params_.min_samples_leaf = p.at("min_samples_leaf").get<int>();
        m.params_.min_samples_split = p.at("min_samples_split").get<int>();
        m.params_.bootstrap = p.at("bootstrap").get<bool>();
        m.params_.seed = p.at("seed").get<std::uint64_t>();
        m.params_.max_features = p.at("max_features").get<std::size_t>();
        m.importances_ = j.at("importances").get<std::vector<double>>();
        for (const auto& t : j.at("trees")) m.trees_.push_back(DecisionTree::from_json(t, m.n_features_));
    } catch (const json::exception& e) {
        throw FormatError(std::string("random forest: ") + e.what());
    }
    const std::size_t width = m.task_ == Task::classification ? m.n_classes_ : 1;
    if (m.trees_.empty() || m.importances_.size() != m.n_features_ ||
        m.trees_.size() != static_cast<std::size_t>(m.params_.n_estimators))
        throw FormatError("random forest: inconsistent model file");
    for (const auto& t : m.trees_)
        if (t.leaf_value(std::vector<double>(m.n_features_, 0.0)).size() != width)
            throw FormatError("random forest: tree payload width does not match the task");
    return m;
}

}  // namespace clifs::forest
