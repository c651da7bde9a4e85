#include "clifs/models.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <set>

#include "clifs/errors.hpp"
#include "clifs/evaluation.hpp"
#include "clifs/text.hpp"
#include "clifs/vocab.hpp"

namespace clifs::models {

using nlohmann::json;

// ---- class weighting ----------------------------------------------------

std::array<double, 3> class_weights(const std::vector<int>& labels) {
    std::array<double, 3> n{};
    for (int c : labels) {
        if (c < 0 || c > 2) throw UsageError("class_weights: label out of range");
        n[static_cast<std::size_t>(c)] += 1.0;
    }
    const double total = static_cast<double>(labels.size());
    std::array<double, 3> w{};
    for (std::size_t c = 0; c < 3; ++c) {
        if (n[c] == 0.0)
            throw UsageError("class_weights: class '" + std::string(to_string(fusion_label_from_index(static_cast<int>(c)))) +
                             "' has no samples");
        w[c] = total / (3.0 * n[c]);
    }
    w[to_index(FusionLabel::low)] *= 2.0;
    w[to_index(FusionLabel::high)] *= 2.0;
    return w;
}

std::array<double, 3> class_weights(const std::vector<FusionLabel>& labels) {
    std::vector<int> idx;
    idx.reserve(labels.size());
    for (auto l : labels) idx.push_back(to_index(l));
    return class_weights(idx);
}

// ---- scaling ------------------------------------------------------------

std::string_view to_string(ScalerKind k) {
    switch (k) {
        case ScalerKind::none: return "none";
        case ScalerKind::standardize: return "standardize";
        case ScalerKind::minmax: return "minmax";
        case ScalerKind::robust: return "robust";
    }
    return "none";
}

std::optional<ScalerKind> parse_scaler(std::string_view s) {
    for (auto k : {ScalerKind::none, ScalerKind::standardize, ScalerKind::minmax, ScalerKind::robust})
        if (s == to_string(k)) return k;
    return std::nullopt;
}

Scaler Scaler::fit(ScalerKind kind, const Matrix& x) {
    Scaler s;
    s.kind_ = kind;
    if (kind == ScalerKind::none) return s;
    if (x.empty()) throw UsageError("scaler: no rows to fit");
    const std::size_t f = x.front().size();
    s.center_.assign(f, 0.0);
    s.scale_.assign(f, 1.0);
    std::vector<double> col(x.size());
    for (std::size_t j = 0; j < f; ++j) {
        for (std::size_t i = 0; i < x.size(); ++i) col[i] = x[i].at(j);
        double center = 0.0, scale = 1.0;
        switch (kind) {
            case ScalerKind::standardize: {
                center = std::accumulate(col.begin(), col.end(), 0.0) / static_cast<double>(col.size());
                double ss = 0.0;
                for (double v : col) ss += (v - center) * (v - center);
                scale = std::sqrt(ss / static_cast<double>(col.size()));
                break;
            }
            case ScalerKind::minmax: {
                auto [lo, hi] = std::minmax_element(col.begin(), col.end());
                center = *lo;
                scale = *hi - *lo;
                break;
            }
            case ScalerKind::robust: {
                center = evaluation::percentile(col, 50.0);
                scale = evaluation::percentile(col, 75.0) - evaluation::percentile(col, 25.0);
                break;
            }
            case ScalerKind::none: break;
        }
        s.center_[j] = center;
        s.scale_[j] = (scale > 0.0 && std::isfinite(scale)) ? scale : 1.0;
    }
    return s;
}

std::vector<double> Scaler::transform(std::span<const double> row) const {
    std::vector<double> out(row.begin(), row.end());
    if (kind_ == ScalerKind::none) return out;
    if (row.size() != center_.size()) throw FormatError("scaler: row has the wrong number of features");
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = (out[j] - center_[j]) / scale_[j];
    return out;
}

Matrix Scaler::transform(const Matrix& x) const {
    if (kind_ == ScalerKind::none) return x;
    Matrix out;
    out.reserve(x.size());
    for (const auto& r : x) out.push_back(transform(r));
    return out;
}

json Scaler::to_json() const { return {{"kind", to_string(kind_)}, {"center", center_}, {"scale", scale_}}; }

Scaler Scaler::from_json(const json& j) {
    Scaler s;
    try {
        auto k = parse_scaler(j.at("kind").get<std::string>());
        if (!k) throw FormatError("scaler: unknown kind");
        s.kind_ = *k;
        s.center_ = j.at("center").get<std::vector<double>>();
        s.scale_ = j.at("scale").get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw FormatError(std::string("scaler: ") + e.what());
    }
    if (s.center_.size() != s.scale_.size()) throw FormatError("scaler: center and scale differ in length");
    return s;
}

// ---- hyperparameters ----------------------------------------------------

json to_json(const Hyperparameters& hp) {
    return {{"n_estimators", hp.n_estimators},
            {"max_depth", hp.max_depth ? json(*hp.max_depth) : json(nullptr)},
            {"min_samples_leaf", hp.min_samples_leaf},
            {"min_samples_split", hp.min_samples_split},
            {"scaler", to_string(hp.scaler)}};
}

Hyperparameters hyperparameters_from_json(const json& j) {
    Hyperparameters hp;
    try {
        hp.n_estimators = j.value("n_estimators", hp.n_estimators);
        if (j.contains("max_depth") && !j["max_depth"].is_null()) hp.max_depth = j["max_depth"].get<int>();
        hp.min_samples_leaf = j.value("min_samples_leaf", hp.min_samples_leaf);
        hp.min_samples_split = j.value("min_samples_split", hp.min_samples_split);
        if (j.contains("scaler")) {
            auto k = parse_scaler(j["scaler"].get<std::string>());
            if (!k) throw ConfigError("unknown scaler '" + j["scaler"].get<std::string>() + "'");
            hp.scaler = *k;
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("hyperparameters: ") + e.what());
    }
    return hp;
}

HyperparameterGrid HyperparameterGrid::defaults() {
    HyperparameterGrid g;
    g.n_estimators = {50, 100, 200, 300, 400};
    g.max_depth = {std::nullopt, 10, 15, 20};
    g.min_samples_leaf = {1, 2, 5, 10};
    g.min_samples_split = {2, 5, 10, 20};
    g.scalers = {ScalerKind::none, ScalerKind::standardize, ScalerKind::minmax, ScalerKind::robust};
    return g;
}

HyperparameterGrid HyperparameterGrid::from_json(const json& j) {
    HyperparameterGrid g = defaults();
    if (!j.is_object()) throw ConfigError("hyperparameter grid must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        static const std::set<std::string> known{"n_estimators", "max_depth", "min_samples_leaf",
                                                 "min_samples_split", "scalers"};
        if (!known.contains(key)) throw ConfigError("hyperparameter grid: unknown key '" + key + "'");
    }
    try {
        if (j.contains("n_estimators")) g.n_estimators = j["n_estimators"].get<std::vector<int>>();
        if (j.contains("max_depth")) {
            g.max_depth.clear();
            for (const auto& d : j["max_depth"])
                g.max_depth.push_back(d.is_null() ? std::nullopt : std::optional<int>(d.get<int>()));
        }
        if (j.contains("min_samples_leaf")) g.min_samples_leaf = j["min_samples_leaf"].get<std::vector<int>>();
        if (j.contains("min_samples_split")) g.min_samples_split = j["min_samples_split"].get<std::vector<int>>();
        if (j.contains("scalers")) {
            g.scalers.clear();
            for (const auto& s : j["scalers"]) {
                auto k = parse_scaler(s.get<std::string>());
                if (!k) throw ConfigError("unknown scaler '" + s.get<std::string>() + "'");
                g.scalers.push_back(*k);
            }
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("hyperparameter grid: ") + e.what());
    }
    g.validate();
    return g;
}

void HyperparameterGrid::validate() const {
    if (n_estimators.empty() || max_depth.empty() || min_samples_leaf.empty() || min_samples_split.empty() ||
        scalers.empty())
        throw UsageError("hyperparameter grid has an empty list");
    for (int v : n_estimators)
        if (v < 1) throw UsageError("n_estimators must be at least 1");
    for (auto d : max_depth)
        if (d && *d < 1) throw UsageError("max_depth must be at least 1");
    for (int v : min_samples_leaf)
        if (v < 1) throw UsageError("min_samples_leaf must be at least 1");
    for (int v : min_samples_split)
        if (v < 2) throw UsageError("min_samples_split must be at least 2");
}

std::size_t HyperparameterGrid::size() const {
    return n_estimators.size() * max_depth.size() * min_samples_leaf.size() * min_samples_split.size() *
           scalers.size();
}

std::vector<Hyperparameters> HyperparameterGrid::configurations() const {
    std::vector<Hyperparameters> out;
    out.reserve(size());
    for (int n : n_estimators)
        for (auto d : max_depth)
            for (int l : min_samples_leaf)
                for (int s : min_samples_split)
                    for (auto k : scalers) out.push_back({n, d, l, s, k});
    return out;
}

bool HyperparameterGrid::contains(const Hyperparameters& hp) const {
    auto has = [](const auto& v, const auto& x) { return std::find(v.begin(), v.end(), x) != v.end(); };
    return has(n_estimators, hp.n_estimators) && has(max_depth, hp.max_depth) &&
           has(min_samples_leaf, hp.min_samples_leaf) && has(min_samples_split, hp.min_samples_split) &&
           has(scalers, hp.scaler);
}

const std::vector<Hyperparameters>& published_configurations() {
    using S = ScalerKind;
    constexpr std::optional<int> unbounded;
    static const std::vector<Hyperparameters> configs = {
        // CLIFS forest: full split raw / augmented, then the human-comparison split.
        {300, unbounded, 5, 20, S::none},
        {400, 20, 2, 20, S::robust},
        {50, unbounded, 5, 20, S::none},
        {200, unbounded, 5, 2, S::none},
        // Embedding-only forest.
        {300, unbounded, 10, 2, S::none},
        {200, 20, 1, 20, S::none},
        {100, unbounded, 10, 2, S::none},
        {400, unbounded, 5, 2, S::none},
        // Regressors.
        {100, 20, 1, 2, S::minmax},
        {200, 20, 1, 2, S::none},
        // Risk task: fusion-replaced VRI forest and the VRI forest.
        {100, unbounded, 2, 10, S::none},
        {300, unbounded, 2, 5, S::standardize},
    };
    return configs;
}

// ---- pipeline ---------------------------------------------------------------

ForestPipeline::ForestPipeline(Hyperparameters hp, Scaler scaler, forest::RandomForest forest,
                               std::optional<std::array<double, 3>> class_weights)
    : hp_(hp), scaler_(std::move(scaler)), forest_(std::move(forest)), class_weights_(class_weights) {}

namespace {

void check_row(const forest::RandomForest& f, std::size_t n) {
    if (!f.trained()) throw UsageError("model is not trained");
    if (n != f.n_features())
        throw FormatError("feature vector has " + std::to_string(n) + " columns, model expects " +
                          std::to_string(f.n_features()));
}

}  // namespace

int ForestPipeline::predict_class(std::span<const double> row) const {
    check_row(forest_, row.size());
    return forest_.predict_class(scaler_.transform(row));
}

std::vector<double> ForestPipeline::predict_proba(std::span<const double> row) const {
    check_row(forest_, row.size());
    return forest_.predict_proba(scaler_.transform(row));
}

double ForestPipeline::predict_value(std::span<const double> row) const {
    check_row(forest_, row.size());
    return std::clamp(forest_.predict_value(scaler_.transform(row)), kScoreMin, kScoreMax);
}

std::vector<int> ForestPipeline::predict_classes(const Matrix& x) const {
    std::vector<int> out;
    out.reserve(x.size());
    for (const auto& r : x) out.push_back(predict_class(r));
    return out;
}

std::vector<double> ForestPipeline::predict_values(const Matrix& x) const {
    std::vector<double> out;
    out.reserve(x.size());
    for (const auto& r : x) out.push_back(predict_value(r));
    return out;
}

json ForestPipeline::to_json() const {
    json j{{"format", "clifs-model"},
           {"version", kModelFormatVersion},
           {"hyperparameters", models::to_json(hp_)},
           {"scaler", scaler_.to_json()},
           {"class_weights", class_weights_ ? json(*class_weights_) : json(nullptr)},
           {"forest", forest_.to_json()}};
    if (layout) {
        json tags = json::array();
        for (auto g : layout->group_tags) tags.push_back(features::short_name(g));
        j["layout"] = {{"layout_version", layout->layout_version},
                       {"embedding_dim", layout->embedding_dim},
                       {"group_tags", tags}};
    }
    return j;
}

ForestPipeline ForestPipeline::from_json(const json& j) {
    ForestPipeline p;
    try {
        if (j.value("format", "") != "clifs-model") throw FormatError("not a clifs model file");
        if (j.at("version").get<int>() != kModelFormatVersion) throw FormatError("unsupported model format version");
        p.hp_ = hyperparameters_from_json(j.at("hyperparameters"));
        p.scaler_ = Scaler::from_json(j.at("scaler"));
        if (!j.at("class_weights").is_null()) p.class_weights_ = j["class_weights"].get<std::array<double, 3>>();
        p.forest_ = forest::RandomForest::from_json(j.at("forest"));
        if (j.contains("layout")) {
            features::FeatureFileHeader h;
            const auto& l = j["layout"];
            h.layout_version = l.at("layout_version").get<int>();
            h.embedding_dim = l.at("embedding_dim").get<std::size_t>();
            for (const auto& t : l.at("group_tags")) {
                auto g = features::parse_group(t.get<std::string>());
                if (!g) throw FormatError("model layout: unknown group");
                h.group_tags.push_back(*g);
            }
            p.layout = h;
        }
    } catch (const json::exception& e) {
        throw FormatError(std::string("model file: ") + e.what());
    } catch (const ConfigError& e) {
        throw FormatError(std::string("model file: ") + e.what());
    }
    if (p.scaler_.kind() != ScalerKind::none && p.scaler_.transform(std::vector<double>(p.forest_.n_features(), 0.0)).size() != p.forest_.n_features())
        throw FormatError("model file: scaler width does not match the forest");
    return p;
}

void ForestPipeline::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write model '" + path + "'");
    out << to_json().dump() << '\n';
}

ForestPipeline ForestPipeline::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open model '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw FormatError("model '" + path + "': " + e.what());
    }
    return from_json(j);
}

// ---- grid search --------------------------------------------------------

json CvReport::to_json() const {
    json entries_json = json::array();
    for (const auto& e : entries)
        entries_json.push_back({{"hyperparameters", models::to_json(e.hp)}, {"fold_scores", e.fold_scores}, {"mean", e.mean}});
    json j{{"metric", metric}, {"n_configurations", entries.size()}, {"entries", entries_json}};
    if (!entries.empty()) {
        j["best"] = models::to_json(entries[best].hp);
        j["best_mean"] = entries[best].mean;
    }
    return j;
}

std::vector<int> stratified_folds(const std::vector<int>& labels, int folds, std::uint64_t seed) {
    if (folds < 2) throw UsageError("need at least 2 folds");
    int max_label = -1;
    for (int c : labels) {
        if (c < 0) throw UsageError("stratified_folds: negative label");
        max_label = std::max(max_label, c);
    }
    std::vector<int> fold(labels.size(), -1);
    std::size_t dealt = 0;
    for (int c = 0; c <= max_label; ++c) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == c) members.push_back(i);
        if (members.empty()) continue;
        if (members.size() < static_cast<std::size_t>(folds))
            throw UsageError("class " + std::to_string(c) + " has " + std::to_string(members.size()) +
                             " samples, fewer than " + std::to_string(folds) + " folds");
        Rng rng(seed, {static_cast<std::uint64_t>(c)});
        rng.shuffle(members);
        // Continue dealing where the previous class stopped so fold sizes
        // differ by at most one.
        for (auto i : members) fold[i] = static_cast<int>(dealt++ % static_cast<std::size_t>(folds));
    }
    return fold;
}

std::vector<int> kfold(std::size_t n, int folds, std::uint64_t seed) {
    if (folds < 2) throw UsageError("need at least 2 folds");
    if (n < static_cast<std::size_t>(folds)) throw UsageError("fewer samples than folds");
    auto order = iota_indices(n);
    Rng rng(seed);
    rng.shuffle(order);
    std::vector<int> fold(n);
    for (std::size_t k = 0; k < n; ++k) fold[order[k]] = static_cast<int>(k % static_cast<std::size_t>(folds));
    return fold;
}

namespace {

forest::ForestParams forest_params(const Hyperparameters& hp, std::uint64_t seed) {
    forest::ForestParams p;
    p.n_estimators = hp.n_estimators;
    p.max_depth = hp.max_depth;
    p.min_samples_leaf = hp.min_samples_leaf;
    p.min_samples_split = hp.min_samples_split;
    p.seed = seed;
    return p;
}

template <typename T>
std::vector<T> take(const std::vector<T>& v, const std::vector<std::size_t>& idx) {
    std::vector<T> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(v[i]);
    return out;
}

struct FoldIndex {
    std::vector<std::size_t> train, test;
};

std::vector<FoldIndex> fold_indices(const std::vector<int>& fold, int folds) {
    std::vector<FoldIndex> out(static_cast<std::size_t>(folds));
    for (std::size_t i = 0; i < fold.size(); ++i)
        for (int f = 0; f < folds; ++f) (fold[i] == f ? out[f].test : out[f].train).push_back(i);
    return out;
}

}  // namespace

ForestPipeline train_classifier(const Matrix& x, const std::vector<int>& y, const Hyperparameters& hp,
                                std::uint64_t seed, bool weighted) {
    auto scaler = Scaler::fit(hp.scaler, x);
    std::optional<std::array<double, 3>> cw;
    std::vector<double> cw_vec;
    if (weighted) {
        cw = class_weights(y);
        cw_vec.assign(cw->begin(), cw->end());
    }
    auto f = forest::RandomForest::fit_classifier(scaler.transform(x), y, kNumClasses, cw_vec, forest_params(hp, seed));
    return ForestPipeline(hp, std::move(scaler), std::move(f), cw);
}

ForestPipeline train_regressor(const Matrix& x, const std::vector<double>& y, const Hyperparameters& hp,
                               std::uint64_t seed) {
    auto scaler = Scaler::fit(hp.scaler, x);
    auto f = forest::RandomForest::fit_regressor(scaler.transform(x), y, forest_params(hp, seed));
    return ForestPipeline(hp, std::move(scaler), std::move(f), std::nullopt);
}

ClassifierFit fit_classifier(const Matrix& x, const std::vector<int>& y, const HyperparameterGrid& grid,
                             const FitOptions& options) {
    grid.validate();
    if (x.size() != y.size()) throw UsageError("fit_classifier: feature and label counts differ");
    const auto folds = fold_indices(stratified_folds(y, options.folds, options.seed), options.folds);

    ClassifierFit out;
    out.report.metric = "macro_f1";
    for (const auto& hp : grid.configurations()) {
        CvEntry e{hp, {}, 0.0};
        for (const auto& f : folds) {
            const auto xtr = take(x, f.train);
            const auto ytr = take(y, f.train);
            const auto model = train_classifier(xtr, ytr, hp, options.seed, options.weighted);
            const auto pred = model.predict_classes(take(x, f.test));
            const auto truth = take(y, f.test);
            e.fold_scores.push_back(evaluation::macro_f1(truth, pred).macro);
        }
        e.mean = std::accumulate(e.fold_scores.begin(), e.fold_scores.end(), 0.0) /
                 static_cast<double>(e.fold_scores.size());
        out.report.entries.push_back(std::move(e));
        const auto last = out.report.entries.size() - 1;
        if (out.report.entries[last].mean > out.report.entries[out.report.best].mean) out.report.best = last;
    }
    out.model = train_classifier(x, y, out.report.entries[out.report.best].hp, options.seed, options.weighted);
    return out;
}

RegressorFit fit_regressor(const Matrix& x, const std::vector<double>& y, const HyperparameterGrid& grid,
                           const FitOptions& options) {
    grid.validate();
    if (x.size() != y.size()) throw UsageError("fit_regressor: feature and target counts differ");
    for (double v : y)
        if (!(v >= kScoreMin && v <= kScoreMax)) throw UsageError("fit_regressor: targets must lie in [1, 7]");
    const auto folds = fold_indices(kfold(x.size(), options.folds, options.seed), options.folds);

    RegressorFit out;
    out.report.metric = "mae";
    for (const auto& hp : grid.configurations()) {
        CvEntry e{hp, {}, 0.0};
        for (const auto& f : folds) {
            const auto model = train_regressor(take(x, f.train), take(y, f.train), hp, options.seed);
            const auto pred = model.predict_values(take(x, f.test));
            const auto truth = take(y, f.test);
            e.fold_scores.push_back(evaluation::mae(truth, pred));
        }
        e.mean = std::accumulate(e.fold_scores.begin(), e.fold_scores.end(), 0.0) /
                 static_cast<double>(e.fold_scores.size());
        out.report.entries.push_back(std::move(e));
        const auto last = out.report.entries.size() - 1;
        if (out.report.entries[last].mean < out.report.entries[out.report.best].mean) out.report.best = last;
    }
    out.model = train_regressor(x, y, out.report.entries[out.report.best].hp, options.seed);
    return out;
}

std::vector<double> importances(const ForestPipeline& model) {
    if (!model.trained()) throw UsageError("importances: model is not trained");
    return model.forest().importances();
}

// ---- voting -------------------------------------------------------------

FusionLabel hard_vote(const std::vector<FusionLabel>& votes) {
    if (votes.empty()) throw UsageError("hard_vote: no votes");
    std::array<int, 3> counts{};
    for (auto v : votes) ++counts[to_index(v)];
    const int top = *std::max_element(counts.begin(), counts.end());
    for (auto v : votes)
        if (counts[to_index(v)] == top) return v;
    return votes.front();
}

EnsembleModel::EnsembleModel(std::vector<const Voter*> voters) : voters_(std::move(voters)) {
    for (auto* v : voters_)
        if (!v) throw UsageError("ensemble: null voter");
    if (voters_.size() < 2) throw UsageError("ensemble needs at least two voters");
}

std::vector<FusionLabel> EnsembleModel::votes(const corpus::Document& doc) const {
    std::vector<FusionLabel> out;
    out.reserve(voters_.size());
    for (auto* v : voters_) out.push_back(v->vote(doc));
    return out;
}

FusionLabel EnsembleModel::predict(const corpus::Document& doc) const { return hard_vote(votes(doc)); }

EnsembleModel make_ensemble(const std::vector<const Voter*>& candidates) {
    std::vector<const Voter*> present;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (candidates[i]) {
            present.push_back(candidates[i]);
        } else {
            std::cerr << "warning: ensemble voter " << i << " unavailable, continuing without it\n";
        }
    }
    return EnsembleModel(std::move(present));
}

// ---- prompting ----------------------------------------------------------

std::optional<FusionLabel> parse_label_strict(std::string_view response) {
    std::string s = text::trim(response);
    for (int pass = 0; pass < 2; ++pass) {
        if (!s.empty() && s.back() == '.') s = text::trim(s.substr(0, s.size() - 1));
        if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') || (s.front() == '\'' && s.back() == '\'')))
            s = text::trim(s.substr(1, s.size() - 2));
    }
    return parse_fusion_label(text::to_lower(s));
}

RemoteClassifierClient::RemoteClassifierClient(const remote::ChatBackend& backend, int max_attempts)
    : backend_(backend), max_attempts_(max_attempts) {
    if (max_attempts_ < 1) throw UsageError("max_attempts must be at least 1");
}

FusionLabel RemoteClassifierClient::classify(const std::vector<remote::ChatMessage>& prompt) const {
    std::string last;
    for (int attempt = 0; attempt < max_attempts_; ++attempt) {
        last = backend_.complete(prompt);
        if (auto l = parse_label_strict(last)) return *l;
    }
    throw InferenceError("remote classifier gave no valid label after " + std::to_string(max_attempts_) +
                         " attempts (last answer: '" + last.substr(0, 80) + "')");
}

RetrievalIndex::RetrievalIndex(const features::SentenceEncoderRuntime& encoder, std::vector<TrainingExample> examples)
    : encoder_(encoder), examples_(std::move(examples)) {
    embeddings_.reserve(examples_.size());
    for (const auto& e : examples_) embeddings_.push_back(encoder_.encode(e.text));
}

std::vector<std::size_t> RetrievalIndex::nearest(std::string_view query, std::size_t k) const {
    return nearest(encoder_.encode(query), k);
}

std::vector<std::size_t> RetrievalIndex::nearest(const std::vector<double>& q, std::size_t k) const {
    std::vector<std::pair<double, std::size_t>> sims;
    sims.reserve(embeddings_.size());
    for (std::size_t i = 0; i < embeddings_.size(); ++i) sims.emplace_back(vocab::cosine(q, embeddings_[i]), i);
    std::stable_sort(sims.begin(), sims.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < std::min(k, sims.size()); ++i) out.push_back(sims[i].second);
    return out;
}

std::array<std::size_t, 3> RetrievalIndex::anchors() const {
    if (examples_.empty()) throw UsageError("retrieval index is empty");
    std::vector<double> scores;
    for (const auto& e : examples_) scores.push_back(e.score);
    const double median = evaluation::percentile(scores, 50.0);
    std::size_t lo = 0, mid = 0, hi = 0;
    for (std::size_t i = 1; i < scores.size(); ++i) {
        if (scores[i] < scores[lo]) lo = i;
        if (scores[i] > scores[hi]) hi = i;
        if (std::abs(scores[i] - median) < std::abs(scores[mid] - median)) mid = i;
    }
    return {lo, mid, hi};
}

namespace {

const char* const kRole =
    "You are a text classifier that determines the level of identity fusion in a given text. Identity fusion is "
    "when an individual's personal identity becomes strongly intertwined with their target's identity.";

const char* const kDescription =
    "Based on Swann et al. (2024), identity fusion is a psychological state in which an individual's personal "
    "identity becomes deeply intertwined with a target, be it a group, leader, value, or cause, resulting in "
    "porous boundaries between the self and that target. This fusion creates a powerful reciprocal bond where "
    "personal agency is channeled into extreme, pro-target behavior, with the individual experiencing a profound "
    "\"sense of oneness\" that can motivate costly and self-sacrificial actions in defense of the fusion target.";

const char* const kLabels =
    "In this task, label the text as:\n"
    "- \"low\": Minimal fusion between individual and target identity. Low fusion is marked by a clear separation "
    "between the self and the target, so the individual shows little behavioral commitment to the target.\n"
    "- \"medium\": Moderate fusion between individual and target identity. Medium fusion reflects a moderate "
    "integration where the personal self overlaps with the target enough to inspire occasional support without "
    "overwhelming personal autonomy.\n"
    "- \"high\": Strong fusion; the individual's identity is almost completely merged with the target's identity. "
    "High fusion is characterized by an intense, nearly inseparable merging of identity with the target, driving "
    "individuals to engage in extreme, self-sacrificial actions for its sake.";

std::string classify_block(std::string_view text) {
    return "Classify the following text into [low, medium, high]:\nText: \"" + std::string(text) +
           "\"\nOutput only the label, nothing else.\nLabel: ";
}

const char* const kAnchorTitles[3] = {"Example 1 (Lowest Scoring - low):", "Example 2 (Most Middle Scoring - medium):",
                                      "Example 3 (Highest Scoring - high):"};
const char* const kAnchorLabels[3] = {"low", "medium", "high"};

}  // namespace

std::vector<remote::ChatMessage> build_rag_prompt(std::string_view query_text, std::size_t k_neighbors,
                                                  const RetrievalIndex& index) {
    if (index.size() == 0) throw UsageError("build_rag_prompt: empty retrieval index");
    const auto anchors = index.anchors();
    std::string system = std::string(kRole) + "\n\n" + kDescription + "\n\n" + kLabels + "\n\nBelow are a three examples:";
    for (std::size_t a = 0; a < 3; ++a)
        system += "\n\n" + std::string(kAnchorTitles[a]) + "\n" + classify_block(index.example(anchors[a]).text) +
                  kAnchorLabels[a];

    std::vector<remote::ChatMessage> messages{{"system", system}};
    for (auto i : index.nearest(query_text, k_neighbors)) {
        messages.push_back({"user", classify_block(index.example(i).text)});
        messages.push_back({"assistant", std::string(to_string(index.example(i).label))});
    }
    messages.push_back({"user", classify_block(query_text)});
    return messages;
}

std::vector<remote::ChatMessage> build_few_shot_prompt(std::string_view query_text, const RetrievalIndex& index,
                                                       std::size_t samples, std::uint64_t seed) {
    if (index.size() == 0) throw UsageError("build_few_shot_prompt: empty retrieval index");
    const auto anchors = index.anchors();
    std::string body = std::string(kRole) + "\n\n" + kDescription + "\n\n" + kLabels + "\n\nBelow are three examples:";
    for (std::size_t a = 0; a < 3; ++a)
        body += "\n\n" + std::string(kAnchorTitles[a]) + "\nText: \"" + index.example(anchors[a]).text +
                "\"\nLabel: " + kAnchorLabels[a];
    body += "\n\nNow, it's your turn:";

    // Distinct random draws, anchors excluded while enough others remain.
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < index.size(); ++i)
        if (std::find(anchors.begin(), anchors.end(), i) == anchors.end()) pool.push_back(i);
    if (pool.size() < samples) pool = iota_indices(index.size());
    Rng rng(seed);
    rng.shuffle(pool);
    for (std::size_t s = 0; s < std::min(samples, pool.size()); ++s) {
        const auto& ex = index.example(pool[s]);
        body += "\n\nPlease classify the following text:\nText: \"" + ex.text + "\"\nLabel: \"" +
                std::string(to_string(ex.label)) + "\"";
    }
    body += "\n\nPlease classify the following text:\nText: \"" + std::string(query_text) + "\"\nLabel:";
    return {{"user", body}};
}

std::string render_prompt(const std::vector<remote::ChatMessage>& messages) {
    std::string out;
    for (const auto& m : messages) {
        if (!out.empty()) out += "\n\n";
        out += "role: " + m.role + "\ncontent: " + m.content;
    }
    return out;
}

RagVoter::RagVoter(std::string name, const RemoteClassifierClient& client, const RetrievalIndex& index, std::size_t k)
    : name_(std::move(name)), client_(client), index_(index), k_(k) {}

FusionLabel RagVoter::vote(const corpus::Document& doc) const {
    return client_.classify(build_rag_prompt(doc.text, k_, index_));
}

}  // namespace clifs::models
