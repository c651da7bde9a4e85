#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>

#include "clifs/errors.hpp"
#include "clifs/evaluation.hpp"
#include "clifs/forest.hpp"
#include "clifs/models.hpp"
#include "clifs/random.hpp"
#include "doctest.h"

using namespace clifs;
using namespace clifs::forest;
using namespace clifs::models;

namespace {

ForestParams single_tree(std::optional<int> depth, std::size_t features) {
    ForestParams p;
    p.n_estimators = 1;
    p.max_depth = depth;
    p.bootstrap = false;
    p.max_features = features;
    return p;
}

// Three well-separated clusters on the first feature, noise elsewhere.
void separable(std::size_t per_class, std::size_t noise, std::uint64_t seed, Matrix& x, std::vector<int>& y) {
    Rng rng(seed);
    for (int c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < per_class; ++i) {
            Row r{10.0 * c + rng.uniform01()};
            for (std::size_t k = 0; k < noise; ++k) r.push_back(rng.uniform01());
            x.push_back(r);
            y.push_back(c);
        }
}

HyperparameterGrid tiny_grid() {
    HyperparameterGrid g;
    g.n_estimators = {10, 20};
    g.max_depth = {std::nullopt, 3};
    g.min_samples_leaf = {1};
    g.min_samples_split = {2};
    g.scalers = {ScalerKind::none};
    return g;
}

double gini(const std::vector<int>& ys) {
    if (ys.empty()) return 0;
    std::array<double, 3> n{};
    for (int v : ys) n[static_cast<std::size_t>(v)] += 1;
    double s = 1;
    for (double c : n) s -= (c / static_cast<double>(ys.size())) * (c / static_cast<double>(ys.size()));
    return s;
}

}  // namespace

TEST_CASE("stump matches the best of all enumerated stumps") {
    const Matrix x{{1.0, 5.0}, {2.0, 1.0}, {3.0, 4.0}, {4.0, 2.0}};
    const std::vector<int> y{0, 0, 1, 1};
    auto f = RandomForest::fit_classifier(x, y, 2, {}, single_tree(1, 2));

    // Enumerate midpoints on both features, keep the lowest weighted Gini.
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_f = 0;
    double best_t = 0;
    for (std::size_t j = 0; j < 2; ++j) {
        std::vector<double> vals;
        for (const auto& r : x) vals.push_back(r[j]);
        std::sort(vals.begin(), vals.end());
        for (std::size_t k = 0; k + 1 < vals.size(); ++k) {
            const double t = (vals[k] + vals[k + 1]) / 2;
            std::vector<int> l, r;
            for (std::size_t i = 0; i < x.size(); ++i) (x[i][j] <= t ? l : r).push_back(y[i]);
            const double g = static_cast<double>(l.size()) * gini(l) + static_cast<double>(r.size()) * gini(r);
            if (g < best) {
                best = g;
                best_f = j;
                best_t = t;
            }
        }
    }
    CHECK(best_f == 0);
    CHECK(best_t == 2.5);
    for (const auto& probe : Matrix{{0.0, 0.0}, {2.5, 9.0}, {2.6, 0.0}, {9.0, 9.0}})
        CHECK(f.predict_class(probe) == (probe[best_f] <= best_t ? 0 : 1));
}

TEST_CASE("importances: hand-computed Gini decreases") {
    // Root: counts (2,1,1), Gini 0.625. Feature 0 at 0.5 removes 4*0.625 - 2*0.5 = 1.5;
    // the right child then splits on feature 1, removing 2*0.5 = 1.0.
    const Matrix x{{0, 0}, {0, 1}, {1, 0}, {1, 1}};
    const std::vector<int> y{0, 0, 1, 2};
    auto f = RandomForest::fit_classifier(x, y, 3, {}, single_tree(std::nullopt, 2));
    REQUIRE(f.importances().size() == 2);
    CHECK(f.importances()[0] == doctest::Approx(0.6));
    CHECK(f.importances()[1] == doctest::Approx(0.4));
    CHECK(f.trees()[0].depth() == 2);
}

TEST_CASE("regression tree: leaf means against a brute-force split") {
    const Matrix x{{1}, {2}, {3}, {10}, {11}};
    const std::vector<double> y{1.0, 1.5, 2.0, 6.0, 7.0};
    auto f = RandomForest::fit_regressor(x, y, single_tree(1, 1));

    double best = std::numeric_limits<double>::infinity();
    double lmean = 0, rmean = 0, thr = 0;
    for (std::size_t k = 1; k < x.size(); ++k) {
        double sl = 0, sr = 0;
        for (std::size_t i = 0; i < k; ++i) sl += y[i];
        for (std::size_t i = k; i < x.size(); ++i) sr += y[i];
        const double ml = sl / static_cast<double>(k), mr = sr / static_cast<double>(x.size() - k);
        double sse = 0;
        for (std::size_t i = 0; i < x.size(); ++i) sse += std::pow(y[i] - (i < k ? ml : mr), 2);
        if (sse < best) {
            best = sse;
            lmean = ml;
            rmean = mr;
            thr = (x[k - 1][0] + x[k][0]) / 2;
        }
    }
    CHECK(thr == 6.5);
    CHECK(f.predict_value(std::vector<double>{0.0}) == doctest::Approx(lmean));
    CHECK(f.predict_value(std::vector<double>{100.0}) == doctest::Approx(rmean));
}

TEST_CASE("forest: determinism, importances sum, informative feature first") {
    Matrix x;
    std::vector<int> y;
    separable(30, 4, 1, x, y);
    ForestParams p;
    p.n_estimators = 30;
    auto a = RandomForest::fit_classifier(x, y, 3, {}, p);
    auto b = RandomForest::fit_classifier(x, y, 3, {}, p);
    CHECK(a == b);
    double s = 0;
    for (double v : a.importances()) s += v;
    CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(std::max_element(a.importances().begin(), a.importances().end()) == a.importances().begin());
    for (const auto& r : x) {
        auto pr = a.predict_proba(r);
        CHECK(pr.size() == 3);
        CHECK(pr[0] + pr[1] + pr[2] == doctest::Approx(1.0));
    }
    p.seed = 43;
    CHECK_FALSE(RandomForest::fit_classifier(x, y, 3, {}, p) == a);
}

TEST_CASE("forest: no split possible gives uniform importances") {
    const Matrix x{{1, 1}, {1, 1}, {1, 1}};
    auto f = RandomForest::fit_classifier(x, {0, 1, 2}, 3, {}, single_tree(std::nullopt, 2));
    CHECK(f.importances() == std::vector<double>{0.5, 0.5});
}

TEST_CASE("forest json round-trip") {
    Matrix x;
    std::vector<int> y;
    separable(10, 2, 2, x, y);
    ForestParams p;
    p.n_estimators = 5;
    auto f = RandomForest::fit_classifier(x, y, 3, {1.0, 2.0, 1.0}, p);
    auto back = RandomForest::from_json(f.to_json());
    CHECK(back == f);
    auto j = f.to_json();
    j["trees"][0]["left"][0] = 0;  // a child pointing at its parent
    CHECK_THROWS_AS(RandomForest::from_json(j), FormatError);
}

TEST_CASE("column permutation leaves predictions unchanged when all features are searched") {
    Matrix x;
    std::vector<int> y;
    separable(15, 2, 5, x, y);
    auto f = RandomForest::fit_classifier(x, y, 3, {}, single_tree(std::nullopt, 3));
    Matrix xp;
    for (const auto& r : x) xp.push_back({r[2], r[0], r[1]});
    auto g = RandomForest::fit_classifier(xp, y, 3, {}, single_tree(std::nullopt, 3));
    Rng rng(1);
    for (int i = 0; i < 50; ++i) {
        Row r{30 * rng.uniform01(), rng.uniform01(), rng.uniform01()};
        CHECK(f.predict_class(r) == g.predict_class(Row{r[2], r[0], r[1]}));
    }
}

TEST_CASE("class weights") {
    std::vector<int> even;
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < 10; ++i) even.push_back(c);
    CHECK(class_weights(even) == std::array<double, 3>{2.0, 1.0, 2.0});

    std::vector<int> paper;
    for (int i = 0; i < 331; ++i) paper.push_back(0);
    for (int i = 0; i < 722; ++i) paper.push_back(1);
    for (int i = 0; i < 328; ++i) paper.push_back(2);
    auto w = class_weights(paper);
    CHECK(w[0] == doctest::Approx(2.0 * 1381.0 / 993.0));
    CHECK(w[1] == doctest::Approx(1381.0 / 2166.0));
    CHECK(w[2] == doctest::Approx(2.0 * 1381.0 / 984.0));
    CHECK_THROWS_AS(class_weights(std::vector<int>{0, 1, 1}), UsageError);
}

TEST_CASE("scalers") {
    const Matrix x{{1, 5, 0}, {2, 5, 10}, {3, 5, 20}, {4, 5, 100}};
    auto s = Scaler::fit(ScalerKind::standardize, x);
    auto t = s.transform(x);
    // population sd of 1..4 is sqrt(1.25)
    CHECK(t[0][0] == doctest::Approx(-1.5 / std::sqrt(1.25)));
    CHECK(t[0][1] == 0.0);  // constant column: centred, scale 1
    auto m = Scaler::fit(ScalerKind::minmax, x).transform(x);
    CHECK(m[3][2] == 1.0);
    CHECK(m[0][2] == 0.0);
    auto r = Scaler::fit(ScalerKind::robust, x);
    auto rt = r.transform(x);
    // column 2: median 15, q1 7.5, q3 40 (linear interpolation)
    CHECK(rt[1][2] == doctest::Approx((10.0 - 15.0) / 32.5));
    CHECK(Scaler::from_json(r.to_json()) == r);
}

TEST_CASE("default grid covers the published configurations") {
    auto g = HyperparameterGrid::defaults();
    CHECK(g.size() == 1280);
    CHECK(g.configurations().size() == 1280);
    CHECK(published_configurations().size() == 12);
    for (const auto& hp : published_configurations()) CHECK(g.contains(hp));
    auto j = nlohmann::json::parse(R"({"n_estimators":[5],"max_depth":[null,3],"scalers":["robust"]})");
    auto custom = HyperparameterGrid::from_json(j);
    CHECK(custom.size() == 2 * 4 * 4);
    CHECK_FALSE(custom.configurations()[0].max_depth.has_value());
    CHECK_THROWS_AS(HyperparameterGrid::from_json(nlohmann::json::parse(R"({"n_estimators":[]})")), UsageError);
    CHECK_THROWS_AS(HyperparameterGrid::from_json(nlohmann::json::parse(R"({"scaler":["none"]})")), ConfigError);
}

TEST_CASE("stratified folds") {
    std::vector<int> y;
    for (int i = 0; i < 13; ++i) y.push_back(0);
    for (int i = 0; i < 30; ++i) y.push_back(1);
    for (int i = 0; i < 9; ++i) y.push_back(2);
    auto folds = stratified_folds(y, 4, 42);
    std::array<std::array<int, 3>, 4> counts{};
    std::array<int, 4> sizes{};
    for (std::size_t i = 0; i < y.size(); ++i) {
        ++counts[static_cast<std::size_t>(folds[i])][static_cast<std::size_t>(y[i])];
        ++sizes[static_cast<std::size_t>(folds[i])];
    }
    for (const auto& c : counts)
        for (int v : c) CHECK(v >= 2);
    CHECK(*std::max_element(sizes.begin(), sizes.end()) - *std::min_element(sizes.begin(), sizes.end()) <= 1);
    CHECK(stratified_folds(y, 4, 42) == folds);
    CHECK_THROWS_AS(stratified_folds({0, 0, 0, 0, 1, 1, 1, 2}, 4, 42), UsageError);
}

TEST_CASE("grid search classifier: separable data, determinism, refit") {
    Matrix x;
    std::vector<int> y;
    separable(20, 3, 3, x, y);
    auto a = fit_classifier(x, y, tiny_grid());
    auto b = fit_classifier(x, y, tiny_grid());
    CHECK(a.report.entries.size() == 4);
    CHECK(a.report.metric == "macro_f1");
    CHECK(a.report.best == b.report.best);
    CHECK(a.model.predict_classes(x) == b.model.predict_classes(x));
    CHECK(evaluation::macro_f1(y, a.model.predict_classes(x)).macro == 1.0);
    CHECK(a.model.class_weights().has_value());
    // ties go to the earlier grid point
    for (std::size_t i = 0; i < a.report.best; ++i)
        CHECK(a.report.entries[i].mean < a.report.entries[a.report.best].mean);
}

TEST_CASE("grid search regressor: clipping and constant targets") {
    Matrix x;
    std::vector<double> y;
    Rng rng(6);
    for (int i = 0; i < 40; ++i) {
        const double v = rng.uniform01();
        x.push_back({v, rng.uniform01()});
        y.push_back(1.0 + 6.0 * v);
    }
    auto fit = fit_regressor(x, y, tiny_grid());
    CHECK(fit.report.metric == "mae");
    for (const auto& probe : Matrix{{-1e9, 0}, {1e9, 0}, {0.5, 0.5}}) {
        const double p = fit.model.predict_value(probe);
        CHECK(p >= 1.0);
        CHECK(p <= 7.0);
    }
    std::vector<double> flat(40, 4.0);
    auto c = fit_regressor(x, flat, tiny_grid());
    CHECK(evaluation::mae(flat, c.model.predict_values(x)) == 0.0);
    std::vector<double> bad = flat;
    bad[0] = 8.0;
    CHECK_THROWS_AS(fit_regressor(x, bad, tiny_grid()), UsageError);
}

TEST_CASE("class weighting helps the minority classes") {
    // Imbalanced overlapping data; compare low+high recall with and without weights.
    int better_or_equal = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(seed, {7});
        Matrix x, xt;
        std::vector<int> y, yt;
        auto draw = [&](Matrix& xs, std::vector<int>& ys, int n_low, int n_med, int n_high) {
            for (int c = 0; c < 3; ++c) {
                const int n = c == 0 ? n_low : c == 1 ? n_med : n_high;
                for (int i = 0; i < n; ++i) {
                    xs.push_back({rng.normal(static_cast<double>(c), 1.0), rng.normal()});
                    ys.push_back(c);
                }
            }
        };
        draw(x, y, 15, 90, 15);
        draw(xt, yt, 30, 30, 30);
        Hyperparameters hp;
        hp.n_estimators = 30;
        hp.min_samples_leaf = 5;
        auto recall = [&](const ForestPipeline& m) {
            auto p = m.predict_classes(xt);
            double hits = 0;
            for (std::size_t i = 0; i < yt.size(); ++i) hits += (yt[i] != 1 && p[i] == yt[i]);
            return hits;
        };
        better_or_equal += recall(train_classifier(x, y, hp, seed, true)) >= recall(train_classifier(x, y, hp, seed, false));
    }
    CHECK(better_or_equal == 10);
}

TEST_CASE("model file round-trip") {
    Matrix x;
    std::vector<int> y;
    separable(10, 2, 9, x, y);
    Hyperparameters hp;
    hp.n_estimators = 7;
    hp.scaler = ScalerKind::standardize;
    auto m = train_classifier(x, y, hp, 42, true);
    const auto path = (std::filesystem::temp_directory_path() / "clifs_model_test.json").string();
    m.save(path);
    auto back = ForestPipeline::load(path);
    std::filesystem::remove(path);
    CHECK(back.hyperparameters() == hp);
    CHECK(back.forest() == m.forest());
    CHECK(back.scaler() == m.scaler());
    CHECK(back.predict_classes(x) == m.predict_classes(x));
    CHECK_THROWS_AS(m.predict_class(std::vector<double>{1.0}), FormatError);
    CHECK_THROWS_AS(importances(ForestPipeline{}), UsageError);
    CHECK(importances(m).size() == 3);
}

TEST_CASE("hard vote: plurality and exhaustive tie enumeration") {
    using L = FusionLabel;
    CHECK(hard_vote({L::low, L::low, L::high, L::medium}) == L::low);
    CHECK(hard_vote({L::low, L::high}) == L::low);
    CHECK(hard_vote({L::high, L::low}) == L::high);

    // Oracle over every 4-voter pattern.
    for (int code = 0; code < 81; ++code) {
        std::vector<L> votes;
        int c = code;
        for (int i = 0; i < 4; ++i, c /= 3) votes.push_back(fusion_label_from_index(c % 3));
        std::array<int, 3> n{};
        for (auto v : votes) ++n[static_cast<std::size_t>(to_index(v))];
        const int top = *std::max_element(n.begin(), n.end());
        L want = votes[0];
        for (auto v : votes)
            if (n[static_cast<std::size_t>(to_index(v))] == top) {
                want = v;
                break;
            }
        CHECK(hard_vote(votes) == want);
    }
}

namespace {
class ConstVoter : public Voter {
public:
    ConstVoter(std::string n, FusionLabel l) : n_(std::move(n)), l_(l) {}
    std::string name() const override { return n_; }
    FusionLabel vote(const corpus::Document&) const override { return l_; }

private:
    std::string n_;
    FusionLabel l_;
};
}  // namespace

TEST_CASE("ensemble uses voter order as priority") {
    ConstVoter a("clifs_rf", FusionLabel::high), b("embedding_rf", FusionLabel::low);
    ConstVoter c("remote_1", FusionLabel::low), d("remote_2", FusionLabel::high);
    corpus::Document doc{"d", "text", "", std::nullopt, std::nullopt, std::nullopt, std::nullopt,
                         corpus::Provenance::human, std::nullopt};
    CHECK(EnsembleModel({&a, &b, &c, &d}).predict(doc) == FusionLabel::high);
    CHECK(EnsembleModel({&b, &a}).predict(doc) == FusionLabel::low);
    CHECK_THROWS_AS(EnsembleModel({&a}), UsageError);
    auto degraded = make_ensemble({&a, nullptr, &b, nullptr});
    CHECK(degraded.size() == 2);
}
