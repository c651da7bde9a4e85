#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "clifs/features.hpp"
#include "clifs/forest.hpp"
#include "clifs/random.hpp"
#include "json.hpp"

namespace clifs::evaluation {

struct F1Result {
    double macro = 0.0;
    std::array<double, 3> per_class{};
};

// Labels in {0, 1, 2}. Undefined precision or recall counts as 0, so a
// class that is never predicted or never present scores 0. The macro
// average runs over classes seen in either vector.
F1Result macro_f1(std::span<const int> y_true, std::span<const int> y_pred);

double mae(std::span<const double> y_true, std::span<const double> y_pred);

// 1-based average ranks.
std::vector<double> average_ranks(std::span<const double> x);

struct SpearmanResult {
    double rs = 0.0;
    double p_value = 1.0;
    bool undefined = false;  // a constant input; rs reported as 0
};

// Pearson correlation of average ranks; two-sided p from the t
// approximation with n - 2 degrees of freedom. UsageError for n < 3.
SpearmanResult spearman(std::span<const double> x, std::span<const double> y);

// Linear interpolation between order statistics (numpy's default).
double percentile(std::vector<double> values, double q);

struct BootstrapResult {
    double point = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    std::size_t n_resamples = 0;
    std::uint64_t seed = kDefaultSeed;
};

inline constexpr std::size_t kDefaultResamples = 1000;

// metric receives the resampled row indices. Resample r draws n_items
// indices with replacement from Rng(seed, {r}). CI = 2.5/97.5 percentiles.
// When index_log is non-null it receives every resample's indices.
BootstrapResult bootstrap_ci(std::size_t n_items,
                             const std::function<double(std::span<const std::size_t>)>& metric,
                             std::size_t n_resamples = kDefaultResamples, std::uint64_t seed = kDefaultSeed,
                             std::vector<std::vector<std::size_t>>* index_log = nullptr);

BootstrapResult bootstrap_macro_f1(std::span<const int> y_true, std::span<const int> y_pred,
                                   std::size_t n_resamples = kDefaultResamples,
                                   std::uint64_t seed = kDefaultSeed);
BootstrapResult bootstrap_mae(std::span<const double> y_true, std::span<const double> y_pred,
                              std::size_t n_resamples = kDefaultResamples, std::uint64_t seed = kDefaultSeed);

struct EvalReport {
    std::string name;
    std::optional<F1Result> f1;
    std::optional<double> mae;
    std::optional<SpearmanResult> spearman;
    std::optional<BootstrapResult> bootstrap;
    std::size_t n = 0;

    nlohmann::json to_json() const;
};

EvalReport classification_report(std::string name, std::span<const int> y_true, std::span<const int> y_pred,
                                 bool with_bootstrap = true, std::uint64_t seed = kDefaultSeed);
EvalReport regression_report(std::string name, std::span<const double> y_true, std::span<const double> y_pred,
                             bool with_bootstrap = true, std::uint64_t seed = kDefaultSeed);

// Most frequent training class (lowest index on ties) for every test row.
int majority_class(std::span<const int> y_train);
EvalReport majority_baseline(std::span<const int> y_train, std::span<const int> y_test);

// ---- ablation -----------------------------------------------------------

using Trainer = std::function<std::vector<int>(const forest::Matrix& x_train, const std::vector<int>& y_train,
                                               const forest::Matrix& x_test)>;

struct AblationRow {
    std::set<features::FeatureGroup> dropped;
    double macro_f1 = 0.0;
    double delta = 0.0;  // ablated minus full
};

forest::Matrix select_columns(const forest::Matrix& x, const std::vector<std::size_t>& columns);

// Row 0 is the full model (empty drop set, delta 0). Then one row per drop
// set, each retrained from scratch by `trainer` and scored on the same test
// rows. Default drop sets: each single group A..E.
std::vector<AblationRow> ablate(const forest::Matrix& x_train, const std::vector<int>& y_train,
                                const forest::Matrix& x_test, const std::vector<int>& y_test,
                                const std::vector<features::FeatureGroup>& tags, const Trainer& trainer,
                                std::vector<std::set<features::FeatureGroup>> drop_sets = {});

}  // namespace clifs::evaluation
