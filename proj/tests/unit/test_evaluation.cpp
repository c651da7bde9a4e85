#include <algorithm>
#include <cmath>

#include "clifs/errors.hpp"
#include "clifs/evaluation.hpp"
#include "clifs/models.hpp"
#include "clifs/random.hpp"
#include "doctest.h"

using namespace clifs;
using namespace clifs::evaluation;

namespace {

std::vector<int> repeat(std::initializer_list<std::pair<int, int>> runs) {
    std::vector<int> v;
    for (auto [label, n] : runs)
        for (int i = 0; i < n; ++i) v.push_back(label);
    return v;
}

// Independent confusion-matrix F1.
double oracle_macro(const std::vector<int>& t, const std::vector<int>& p) {
    double sum = 0;
    int seen = 0;
    for (int c = 0; c < 3; ++c) {
        double tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < t.size(); ++i) {
            tp += t[i] == c && p[i] == c;
            fp += t[i] != c && p[i] == c;
            fn += t[i] == c && p[i] != c;
        }
        if (tp + fp + fn == 0) continue;
        ++seen;
        sum += tp == 0 ? 0.0 : 2 * tp / (2 * tp + fp + fn);
    }
    return sum / seen;
}

}  // namespace

TEST_CASE("macro F1: hand-derived cases") {
    auto t = repeat({{0, 10}, {1, 30}, {2, 10}});
    std::vector<int> all_medium(t.size(), 1);
    auto r = macro_f1(t, all_medium);
    CHECK(r.per_class[0] == 0.0);
    CHECK(r.per_class[1] == doctest::Approx(0.75));
    CHECK(r.per_class[2] == 0.0);
    CHECK(r.macro == doctest::Approx(0.25));
    CHECK(macro_f1(t, t).macro == 1.0);
    // Single-class test matching the prediction: only that class is averaged.
    CHECK(macro_f1(std::vector<int>{1, 1}, std::vector<int>{1, 1}).macro == 1.0);
    CHECK_THROWS_AS(macro_f1(t, std::vector<int>{1}), UsageError);
}

TEST_CASE("macro F1 against a confusion-matrix oracle and under relabeling") {
    Rng rng(2);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<int> t, p;
        const auto n = 1 + rng.index(40);
        for (std::size_t i = 0; i < n; ++i) {
            t.push_back(static_cast<int>(rng.index(3)));
            p.push_back(static_cast<int>(rng.index(3)));
        }
        const double m = macro_f1(t, p).macro;
        CHECK(m == doctest::Approx(oracle_macro(t, p)).epsilon(1e-12));
        CHECK(m >= 0.0);
        CHECK(m <= 1.0);
        auto relabel = [](std::vector<int> v) {
            for (auto& x : v) x = (x + 1) % 3;
            return v;
        };
        CHECK(macro_f1(relabel(t), relabel(p)).macro == doctest::Approx(m).epsilon(1e-12));
    }
}

TEST_CASE("majority baseline on balanced data is 1/6") {
    auto train = repeat({{0, 5}, {1, 9}, {2, 5}});
    auto test = repeat({{0, 10}, {1, 10}, {2, 10}});
    CHECK(majority_class(train) == 1);
    auto r = majority_baseline(train, test);
    CHECK(r.f1->macro == doctest::Approx(1.0 / 6.0));
    CHECK(majority_class(repeat({{2, 3}, {0, 3}})) == 0);
}

TEST_CASE("mae") {
    CHECK(mae(std::vector<double>{1, 7}, std::vector<double>{2, 6}) == 1.0);
    Rng rng(3);
    std::vector<double> a, b, c;
    for (int i = 0; i < 100; ++i) {
        a.push_back(rng.uniform01());
        b.push_back(rng.uniform01());
        c.push_back(rng.uniform01());
    }
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    CHECK(mae(a, b) == doctest::Approx(s / 100.0).epsilon(1e-12));
    CHECK(mae(a, c) <= mae(a, b) + mae(b, c) + 1e-12);
    CHECK_THROWS_AS(mae(a, std::vector<double>{1}), UsageError);
}

TEST_CASE("spearman: closed form, ties, reference values") {
    const std::vector<double> x{1, 2, 3, 4, 5, 6};
    CHECK(spearman(x, x).rs == doctest::Approx(1.0));
    std::vector<double> rev(x.rbegin(), x.rend());
    CHECK(spearman(x, rev).rs == doctest::Approx(-1.0));

    const std::vector<double> y{2, 1, 4, 3, 6, 5};
    double d2 = 0;
    for (std::size_t i = 0; i < 6; ++i) d2 += (x[i] - y[i]) * (x[i] - y[i]);
    CHECK(std::abs(spearman(x, y).rs - (1 - 6 * d2 / (6.0 * 35.0))) < 1e-12);

    CHECK(average_ranks(std::vector<double>{10, 20, 20, 5}) == std::vector<double>{2, 3.5, 3.5, 1});

    // Reference values from an independent statistics library.
    auto a = spearman(std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10},
                      std::vector<double>{2, 1, 4, 3, 7, 5, 6, 10, 8, 9});
    CHECK(a.rs == doctest::Approx(0.9030303030303028).epsilon(1e-12));
    CHECK(a.p_value == doctest::Approx(0.00034361219776328223).epsilon(1e-8));
    auto b = spearman(std::vector<double>{1, 2, 2, 3, 4, 4, 5}, std::vector<double>{3, 1, 4, 1, 5, 9, 2});
    CHECK(b.rs == doctest::Approx(0.24771684715343115).epsilon(1e-12));
    CHECK(b.p_value == doctest::Approx(0.5922460160434084).epsilon(1e-8));

    auto flat = spearman(x, std::vector<double>(6, 3.0));
    CHECK(flat.undefined);
    CHECK(flat.rs == 0.0);
    CHECK_THROWS_AS(spearman(std::vector<double>{1, 2}, std::vector<double>{1, 2}), UsageError);
}

TEST_CASE("spearman is invariant under monotone transforms") {
    Rng rng(12);
    std::vector<double> x, y;
    for (int i = 0; i < 30; ++i) {
        x.push_back(rng.uniform01());
        y.push_back(x.back() + 0.3 * rng.normal());
    }
    const double r = spearman(x, y).rs;
    std::vector<double> ex, cy;
    for (double v : x) ex.push_back(std::exp(3 * v));
    for (double v : y) cy.push_back(v * v * v);
    CHECK(spearman(ex, cy).rs == doctest::Approx(r).epsilon(1e-12));
}

TEST_CASE("percentile uses linear interpolation") {
    CHECK(percentile({1, 2, 3, 4, 10}, 2.5) == doctest::Approx(1.1));
    CHECK(percentile({1, 2, 3, 4, 10}, 97.5) == doctest::Approx(9.4));
    CHECK(percentile({5}, 50) == 5.0);
}

TEST_CASE("bootstrap: replayed index log, determinism, perfect predictions") {
    const std::vector<int> t{0, 1, 2};
    const std::vector<int> p{0, 1, 1};
    auto metric = [&](std::span<const std::size_t> idx) {
        std::vector<int> tt, pp;
        for (auto i : idx) {
            tt.push_back(t[i]);
            pp.push_back(p[i]);
        }
        return macro_f1(tt, pp).macro;
    };
    std::vector<std::vector<std::size_t>> log;
    auto r = bootstrap_ci(3, metric, 10, 42, &log);
    REQUIRE(log.size() == 10);
    std::vector<double> replay;
    for (std::size_t k = 0; k < log.size(); ++k) {
        CHECK(log[k].size() == 3);
        Rng rng(42, {k});
        for (std::size_t i = 0; i < 3; ++i) CHECK(log[k][i] == rng.index(3));
        replay.push_back(oracle_macro({t[log[k][0]], t[log[k][1]], t[log[k][2]]},
                                      {p[log[k][0]], p[log[k][1]], p[log[k][2]]}));
    }
    std::sort(replay.begin(), replay.end());
    auto interp = [&](double q) {
        const double pos = q / 100.0 * 9.0;
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const auto hi = std::min<std::size_t>(lo + 1, 9);
        return replay[lo] + (pos - static_cast<double>(lo)) * (replay[hi] - replay[lo]);
    };
    CHECK(r.ci_low == doctest::Approx(interp(2.5)).epsilon(1e-12));
    CHECK(r.ci_high == doctest::Approx(interp(97.5)).epsilon(1e-12));
    CHECK(r.point == doctest::Approx(oracle_macro(t, p)));
    CHECK(r.n_resamples == 10);

    auto again = bootstrap_ci(3, metric, 10, 42);
    CHECK(again.ci_low == r.ci_low);
    CHECK(again.ci_high == r.ci_high);

    auto perfect = bootstrap_macro_f1(std::vector<int>{0, 1, 2, 0, 1, 2}, std::vector<int>{0, 1, 2, 0, 1, 2});
    CHECK(perfect.ci_low == 1.0);
    CHECK(perfect.ci_high == 1.0);
    CHECK(perfect.n_resamples == 1000);
}

TEST_CASE("bootstrap CI covers the point estimate in most trials") {
    int covered = 0;
    for (std::uint64_t trial = 0; trial < 40; ++trial) {
        Rng rng(trial, {99});
        std::vector<int> t, p;
        for (int i = 0; i < 60; ++i) {
            t.push_back(static_cast<int>(rng.index(3)));
            p.push_back(rng.uniform01() < 0.6 ? t.back() : static_cast<int>(rng.index(3)));
        }
        auto r = bootstrap_macro_f1(t, p, 200, trial);
        covered += r.ci_low <= r.point && r.point <= r.ci_high;
    }
    CHECK(covered >= 38);
}

TEST_CASE("reports serialize") {
    auto r = classification_report("rf", std::vector<int>{0, 1, 2, 1}, std::vector<int>{0, 1, 1, 1}, true, 42);
    auto j = r.to_json();
    CHECK(j["name"] == "rf");
    CHECK(j.contains("macro_f1"));
    CHECK(j["bootstrap"]["n_resamples"] == 1000);
    auto g = regression_report("reg", std::vector<double>{1, 2, 3, 4}, std::vector<double>{1, 2, 4, 3}, false);
    auto jg = g.to_json();
    CHECK(jg["mae"] == 0.5);
    CHECK(jg.contains("spearman"));
    CHECK_FALSE(jg.contains("bootstrap"));
}

TEST_CASE("ablation: informative and noise groups") {
    using features::FeatureGroup;
    // Columns: 2 noise (A), 1 informative (C), 1 noise (E).
    const std::vector<FeatureGroup> tags{FeatureGroup::A_embeddings, FeatureGroup::A_embeddings, FeatureGroup::C_clifs,
                                         FeatureGroup::E_vri};
    auto make = [](std::size_t n, std::uint64_t seed, forest::Matrix& x, std::vector<int>& y) {
        Rng rng(seed);
        for (std::size_t i = 0; i < n; ++i) {
            const int c = static_cast<int>(i % 3);
            x.push_back({rng.uniform01(), rng.uniform01(), c + 0.3 * rng.uniform01(), rng.uniform01()});
            y.push_back(c);
        }
    };
    forest::Matrix xtr, xte;
    std::vector<int> ytr, yte;
    make(150, 1, xtr, ytr);
    make(90, 2, xte, yte);
    Trainer trainer = [](const forest::Matrix& a, const std::vector<int>& b, const forest::Matrix& c) {
        models::Hyperparameters hp;
        hp.n_estimators = 25;
        return models::train_classifier(a, b, hp, 42, false).predict_classes(c);
    };
    auto rows = ablate(xtr, ytr, xte, yte, tags, trainer,
                       {{}, {FeatureGroup::C_clifs}, {FeatureGroup::E_vri}, {FeatureGroup::A_embeddings}});
    REQUIRE(rows.size() == 5);
    CHECK(rows[0].dropped.empty());
    CHECK(rows[0].delta == 0.0);
    CHECK(rows[1].delta == 0.0);
    CHECK(rows[2].delta < -0.3);
    CHECK(std::abs(rows[3].delta) < 0.05);
    CHECK(std::abs(rows[4].delta) < 0.05);

    CHECK(select_columns({{1, 2, 3}}, {2, 0}) == forest::Matrix{{3, 1}});
}
