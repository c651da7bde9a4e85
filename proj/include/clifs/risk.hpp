#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "clifs/corpus.hpp"
#include "clifs/evaluation.hpp"
#include "clifs/lexical.hpp"
#include "clifs/mlm.hpp"
#include "clifs/models.hpp"
#include "clifs/pipeline.hpp"
#include "json.hpp"

namespace clifs::risk {

// Fusion metrics plus the fusion class predicted by a trained classifier.
class FusionPredictor {
public:
    struct Analysis {
        mlm::FusionMetrics metrics;
        FusionLabel predicted = FusionLabel::medium;
    };
    virtual ~FusionPredictor() = default;
    virtual Analysis analyze(std::string_view text) const = 0;
};

// Featurizer + trained fusion classifier.
class ClifsPredictor : public FusionPredictor {
public:
    ClifsPredictor(const pipeline::Featurizer& featurizer, const models::ForestPipeline& classifier);
    Analysis analyze(std::string_view text) const override;

private:
    const pipeline::Featurizer& featurizer_;
    const models::ForestPipeline& classifier_;
};

// 11 non-fusion VRI categories, identification, then
// [f, K_f, S(I->T), S(T->I), clifs_class] with clifs_class in {0, 1, 2}.
inline constexpr std::size_t kRiskFeatureCount = 17;

struct RiskFeatureVector {
    std::vector<double> values;
};

std::vector<std::string> feature_names(const lexical::VriManifest& manifest);

RiskFeatureVector featurize(std::string_view text, const FusionPredictor& predictor,
                            const lexical::VriManifest& manifest);

// Baseline forest input: all 12 category scores (fusion included) plus
// identification.
std::vector<double> vri_features(const lexical::VriCategoryScores& scores);

// Chunks every document (author and risk_label required) and balances the
// classes round-robin by author down to the smallest class.
std::vector<corpus::Chunk> prepare(const std::vector<corpus::Document>& corpus,
                                   std::size_t target_words = corpus::kDefaultChunkWords);

struct RiskSplit {
    std::vector<corpus::Chunk> train;
    std::vector<corpus::Chunk> test;
};

// Chunk-level 80/20 split under the seed.
RiskSplit split_chunks(const std::vector<corpus::Chunk>& chunks, double train_fraction = 0.8,
                       std::uint64_t seed = kDefaultSeed);

struct RiskTaskReport {
    evaluation::EvalReport majority;
    evaluation::EvalReport vri_threshold;
    evaluation::EvalReport vri_rf;
    evaluation::EvalReport clifs_vri_rf;
    models::CvReport vri_rf_cv;
    models::CvReport clifs_vri_rf_cv;

    nlohmann::json to_json() const;
};

// Four rows: training-majority class, direct VRI threshold mapping, a
// forest on the VRI submodule outputs and a forest on the fusion-replaced
// vector. Both forests are tuned by 4-fold CV on the training chunks.
RiskTaskReport run_task(const std::vector<corpus::Chunk>& train, const std::vector<corpus::Chunk>& test,
                        const FusionPredictor& predictor, const lexical::VriManifest& manifest,
                        const models::HyperparameterGrid& grid, const models::FitOptions& options);

}  // namespace clifs::risk
