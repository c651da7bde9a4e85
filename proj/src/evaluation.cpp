#include "clifs/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

#include "clifs/errors.hpp"

namespace clifs::evaluation {

using nlohmann::json;

F1Result macro_f1(std::span<const int> y_true, std::span<const int> y_pred) {
    if (y_true.size() != y_pred.size()) throw UsageError("macro_f1: length mismatch");
    if (y_true.empty()) throw UsageError("macro_f1: no samples");
    std::array<double, 3> tp{}, fp{}, fn{};
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const int t = y_true[i], p = y_pred[i];
        if (t < 0 || t > 2 || p < 0 || p > 2) throw UsageError("macro_f1: labels must be 0, 1 or 2");
        if (t == p) {
            tp[static_cast<std::size_t>(t)] += 1;
        } else {
            fp[static_cast<std::size_t>(p)] += 1;
            fn[static_cast<std::size_t>(t)] += 1;
        }
    }
    F1Result r;
    double sum = 0.0;
    int present = 0;
    for (std::size_t c = 0; c < 3; ++c) {
        const double precision = tp[c] + fp[c] > 0 ? tp[c] / (tp[c] + fp[c]) : 0.0;
        const double recall = tp[c] + fn[c] > 0 ? tp[c] / (tp[c] + fn[c]) : 0.0;
        r.per_class[c] = precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
        // Classes absent from both vectors stay out of the average.
        if (tp[c] + fp[c] + fn[c] > 0) {
            sum += r.per_class[c];
            ++present;
        }
    }
    r.macro = sum / present;
    return r;
}

double mae(std::span<const double> y_true, std::span<const double> y_pred) {
    if (y_true.size() != y_pred.size()) throw UsageError("mae: length mismatch");
    if (y_true.empty()) throw UsageError("mae: no samples");
    double s = 0.0;
    for (std::size_t i = 0; i < y_true.size(); ++i) s += std::abs(y_true[i] - y_pred[i]);
    return s / static_cast<double>(y_true.size());
}

std::vector<double> average_ranks(std::span<const double> x) {
    const auto n = x.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return x[a] < x[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
        const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (auto k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

SpearmanResult spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw UsageError("spearman: length mismatch");
    if (x.size() < 3) throw UsageError("spearman: need at least 3 pairs");
    const auto rx = average_ranks(x), ry = average_ranks(y);
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
    const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    SpearmanResult r;
    if (sxx == 0.0 || syy == 0.0) {
        r.undefined = true;
        return r;
    }
    r.rs = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
    const double df = n - 2.0;
    if (std::abs(r.rs) >= 1.0) {
        r.p_value = 0.0;
        return r;
    }
    const double t = r.rs * std::sqrt(df / (1.0 - r.rs * r.rs));
    boost::math::students_t dist(df);
    r.p_value = std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))), 0.0, 1.0);
    return r;
}

double percentile(std::vector<double> values, double q) {
    if (values.empty()) throw UsageError("percentile of an empty sample");
    if (!(q >= 0.0 && q <= 100.0)) throw UsageError("percentile must lie in [0, 100]");
    std::sort(values.begin(), values.end());
    const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + (values[hi] - values[lo]) * frac;
}

BootstrapResult bootstrap_ci(std::size_t n_items, const std::function<double(std::span<const std::size_t>)>& metric,
                             std::size_t n_resamples, std::uint64_t seed,
                             std::vector<std::vector<std::size_t>>* index_log) {
    if (n_items == 0) throw UsageError("bootstrap: no items");
    if (n_resamples == 0) throw UsageError("bootstrap: need at least one resample");
    BootstrapResult r;
    r.n_resamples = n_resamples;
    r.seed = seed;
    r.point = metric(iota_indices(n_items));
    std::vector<double> stats;
    stats.reserve(n_resamples);
    std::vector<std::size_t> idx(n_items);
    for (std::size_t s = 0; s < n_resamples; ++s) {
        Rng rng(seed, {static_cast<std::uint64_t>(s)});
        for (auto& i : idx) i = rng.index(n_items);
        if (index_log) index_log->push_back(idx);
        stats.push_back(metric(idx));
    }
    r.ci_low = percentile(stats, 2.5);
    r.ci_high = percentile(std::move(stats), 97.5);
    return r;
}

BootstrapResult bootstrap_macro_f1(std::span<const int> y_true, std::span<const int> y_pred, std::size_t n_resamples,
                                   std::uint64_t seed) {
    if (y_true.size() != y_pred.size()) throw UsageError("bootstrap_macro_f1: length mismatch");
    std::vector<int> t, p;
    return bootstrap_ci(
        y_true.size(),
        [&](std::span<const std::size_t> idx) {
            t.clear();
            p.clear();
            for (auto i : idx) {
                t.push_back(y_true[i]);
                p.push_back(y_pred[i]);
            }
            return macro_f1(t, p).macro;
        },
        n_resamples, seed);
}

BootstrapResult bootstrap_mae(std::span<const double> y_true, std::span<const double> y_pred, std::size_t n_resamples,
                              std::uint64_t seed) {
    if (y_true.size() != y_pred.size()) throw UsageError("bootstrap_mae: length mismatch");
    return bootstrap_ci(
        y_true.size(),
        [&](std::span<const std::size_t> idx) {
            double s = 0.0;
            for (auto i : idx) s += std::abs(y_true[i] - y_pred[i]);
            return s / static_cast<double>(idx.size());
        },
        n_resamples, seed);
}

json EvalReport::to_json() const {
    json j{{"name", name}, {"n", n}};
    if (f1) {
        j["macro_f1"] = f1->macro;
        j["per_class_f1"] = {{"low", f1->per_class[0]}, {"medium", f1->per_class[1]}, {"high", f1->per_class[2]}};
    }
    if (mae) j["mae"] = *mae;
    if (spearman)
        j["spearman"] = {{"rs", spearman->rs}, {"p_value", spearman->p_value}, {"undefined", spearman->undefined}};
    if (bootstrap)
        j["bootstrap"] = {{"point", bootstrap->point},         {"ci_low", bootstrap->ci_low},
                          {"ci_high", bootstrap->ci_high},     {"n_resamples", bootstrap->n_resamples},
                          {"seed", bootstrap->seed}};
    return j;
}

EvalReport classification_report(std::string name, std::span<const int> y_true, std::span<const int> y_pred,
                                 bool with_bootstrap, std::uint64_t seed) {
    EvalReport r;
    r.name = std::move(name);
    r.n = y_true.size();
    r.f1 = macro_f1(y_true, y_pred);
    if (with_bootstrap) r.bootstrap = bootstrap_macro_f1(y_true, y_pred, kDefaultResamples, seed);
    return r;
}

EvalReport regression_report(std::string name, std::span<const double> y_true, std::span<const double> y_pred,
                             bool with_bootstrap, std::uint64_t seed) {
    EvalReport r;
    r.name = std::move(name);
    r.n = y_true.size();
    r.mae = mae(y_true, y_pred);
    if (y_true.size() >= 3) r.spearman = spearman(y_true, y_pred);
    if (with_bootstrap) r.bootstrap = bootstrap_mae(y_true, y_pred, kDefaultResamples, seed);
    return r;
}

int majority_class(std::span<const int> y_train) {
    if (y_train.empty()) throw UsageError("majority_class: empty training labels");
    std::array<std::size_t, 3> counts{};
    for (int c : y_train) {
        if (c < 0 || c > 2) throw UsageError("majority_class: label out of range");
        ++counts[static_cast<std::size_t>(c)];
    }
    return static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

EvalReport majority_baseline(std::span<const int> y_train, std::span<const int> y_test) {
    const std::vector<int> pred(y_test.size(), majority_class(y_train));
    return classification_report("majority", y_test, pred, false);
}

forest::Matrix select_columns(const forest::Matrix& x, const std::vector<std::size_t>& columns) {
    forest::Matrix out;
    out.reserve(x.size());
    for (const auto& r : x) {
        forest::Row row;
        row.reserve(columns.size());
        for (auto c : columns) row.push_back(r.at(c));
        out.push_back(std::move(row));
    }
    return out;
}

std::vector<AblationRow> ablate(const forest::Matrix& x_train, const std::vector<int>& y_train,
                                const forest::Matrix& x_test, const std::vector<int>& y_test,
                                const std::vector<features::FeatureGroup>& tags, const Trainer& trainer,
                                std::vector<std::set<features::FeatureGroup>> drop_sets) {
    if (drop_sets.empty())
        for (auto g : features::kAllGroups) drop_sets.push_back({g});
    if (!x_train.empty() && x_train.front().size() != tags.size())
        throw UsageError("ablate: tag count does not match feature columns");

    std::vector<AblationRow> rows;
    const auto full = macro_f1(y_test, trainer(x_train, y_train, x_test)).macro;
    rows.push_back({{}, full, 0.0});
    for (const auto& drop : drop_sets) {
        const auto keep = features::kept_columns(tags, drop);
        if (keep.empty()) throw UsageError("ablate: drop set removes every column");
        const auto score =
            macro_f1(y_test, trainer(select_columns(x_train, keep), y_train, select_columns(x_test, keep))).macro;
        rows.push_back({drop, score, score - full});
    }
    return rows;
}

}  // namespace clifs::evaluation
