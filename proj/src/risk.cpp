#include "clifs/risk.hpp"

#include <algorithm>
#include <cmath>

#include "clifs/errors.hpp"

namespace clifs::risk {

using nlohmann::json;

ClifsPredictor::ClifsPredictor(const pipeline::Featurizer& featurizer, const models::ForestPipeline& classifier)
    : featurizer_(featurizer), classifier_(classifier) {
    if (!classifier_.trained() || classifier_.task() != forest::Task::classification)
        throw ConfigError("risk: the fusion predictor needs a trained classifier");
}

FusionPredictor::Analysis ClifsPredictor::analyze(std::string_view text) const {
    const auto f = featurizer_.featurize(text);
    return {f.metrics, fusion_label_from_index(classifier_.predict_class(f.vector.values))};
}

std::vector<std::string> feature_names(const lexical::VriManifest& manifest) {
    auto names = manifest.non_fusion_names();
    for (const char* s : {"identification", "fusion_proximity", "fictive_kinship", "s_i_to_t", "s_t_to_i", "clifs_class"})
        names.emplace_back(s);
    return names;
}

RiskFeatureVector featurize(std::string_view text, const FusionPredictor& predictor,
                            const lexical::VriManifest& manifest) {
    const auto scores = manifest.score(text);
    RiskFeatureVector v;
    v.values.reserve(kRiskFeatureCount);
    // A without its leading fusion score, then B and C.
    v.values.insert(v.values.end(), scores.a_scores.begin() + 1, scores.a_scores.end());
    v.values.insert(v.values.end(), scores.b_scores.begin(), scores.b_scores.end());
    v.values.insert(v.values.end(), scores.c_scores.begin(), scores.c_scores.end());
    v.values.push_back(scores.identification);
    const auto a = predictor.analyze(text);
    v.values.push_back(a.metrics.fusion_proximity);
    v.values.push_back(a.metrics.fictive_kinship);
    v.values.push_back(a.metrics.s_i_to_t);
    v.values.push_back(a.metrics.s_t_to_i);
    v.values.push_back(static_cast<double>(to_index(a.predicted)));
    return v;
}

std::vector<double> vri_features(const lexical::VriCategoryScores& scores) {
    std::vector<double> v;
    v.insert(v.end(), scores.a_scores.begin(), scores.a_scores.end());
    v.insert(v.end(), scores.b_scores.begin(), scores.b_scores.end());
    v.insert(v.end(), scores.c_scores.begin(), scores.c_scores.end());
    v.push_back(scores.identification);
    return v;
}

std::vector<corpus::Chunk> prepare(const std::vector<corpus::Document>& docs, std::size_t target_words) {
    std::vector<corpus::Chunk> chunks;
    for (const auto& d : docs) {
        if (!d.risk_label) throw UsageError("risk: document '" + d.id + "' has no risk_label");
        if (!d.author) throw UsageError("risk: document '" + d.id + "' has no author");
        for (auto& c : corpus::chunk_document(d, target_words)) chunks.push_back(std::move(c));
    }
    return corpus::balance_round_robin(chunks);
}

RiskSplit split_chunks(const std::vector<corpus::Chunk>& chunks, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw UsageError("train_fraction must lie in (0, 1)");
    std::vector<bool> in_train(chunks.size(), false);
    for (auto c : kRiskLabels) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < chunks.size(); ++i) {
            if (!chunks[i].label) throw UsageError("risk: chunk without a risk label");
            if (*chunks[i].label == c) members.push_back(i);
        }
        Rng rng(seed, {static_cast<std::uint64_t>(to_index(c))});
        rng.shuffle(members);
        const auto k = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(members.size())));
        for (std::size_t j = 0; j < k; ++j) in_train[members[j]] = true;
    }
    RiskSplit s;
    for (std::size_t i = 0; i < chunks.size(); ++i) (in_train[i] ? s.train : s.test).push_back(chunks[i]);
    return s;
}

json RiskTaskReport::to_json() const {
    return {{"rows", {majority.to_json(), vri_threshold.to_json(), vri_rf.to_json(), clifs_vri_rf.to_json()}},
            {"cv", {{"vri_rf", vri_rf_cv.to_json()}, {"clifs_vri_rf", clifs_vri_rf_cv.to_json()}}},
            {"note", "train/test split is at chunk level; chunks of one source document can fall on both sides"}};
}

RiskTaskReport run_task(const std::vector<corpus::Chunk>& train, const std::vector<corpus::Chunk>& test,
                        const FusionPredictor& predictor, const lexical::VriManifest& manifest,
                        const models::HyperparameterGrid& grid, const models::FitOptions& options) {
    if (train.empty() || test.empty()) throw UsageError("risk task needs train and test chunks");
    auto labels = [](const std::vector<corpus::Chunk>& cs) {
        std::vector<int> y;
        for (const auto& c : cs) {
            if (!c.label) throw UsageError("risk: chunk without a risk label");
            y.push_back(to_index(*c.label));
        }
        return y;
    };
    const auto y_train = labels(train), y_test = labels(test);

    forest::Matrix vri_train, vri_test, clifs_train, clifs_test;
    std::vector<int> threshold_pred;
    for (const auto& c : train) {
        vri_train.push_back(vri_features(manifest.score(c.text)));
        clifs_train.push_back(featurize(c.text, predictor, manifest).values);
    }
    for (const auto& c : test) {
        const auto scores = manifest.score(c.text);
        vri_test.push_back(vri_features(scores));
        clifs_test.push_back(featurize(c.text, predictor, manifest).values);
        threshold_pred.push_back(to_index(lexical::vri_aggregate(scores).mapped_risk));
    }

    auto fit_options = options;
    fit_options.weighted = false;  // the fusion class weighting does not apply to risk labels

    RiskTaskReport r;
    r.majority = evaluation::majority_baseline(y_train, y_test);
    r.vri_threshold = evaluation::classification_report("vri_threshold", y_test, threshold_pred, true, options.seed);

    auto vri_fit = models::fit_classifier(vri_train, y_train, grid, fit_options);
    r.vri_rf = evaluation::classification_report("vri_rf", y_test, vri_fit.model.predict_classes(vri_test), true,
                                                 options.seed);
    r.vri_rf_cv = std::move(vri_fit.report);

    auto clifs_fit = models::fit_classifier(clifs_train, y_train, grid, fit_options);
    r.clifs_vri_rf = evaluation::classification_report("clifs_vri_rf", y_test,
                                                       clifs_fit.model.predict_classes(clifs_test), true, options.seed);
    r.clifs_vri_rf_cv = std::move(clifs_fit.report);
    return r;
}

}  // namespace clifs::risk
