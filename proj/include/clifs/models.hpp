#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "clifs/corpus.hpp"
#include "clifs/features.hpp"
#include "clifs/forest.hpp"
#include "clifs/labels.hpp"
#include "clifs/remote.hpp"
#include "json.hpp"

namespace clifs::models {

using forest::Matrix;

// ---- class weighting ----------------------------------------------------

// w_c = N / (3 n_c), then low and high doubled. UsageError if a class is
// missing.
std::array<double, 3> class_weights(const std::vector<FusionLabel>& labels);
std::array<double, 3> class_weights(const std::vector<int>& labels);

// ---- scaling ------------------------------------------------------------

enum class ScalerKind { none, standardize, minmax, robust };

std::string_view to_string(ScalerKind k);
std::optional<ScalerKind> parse_scaler(std::string_view s);

// Column-wise affine map (x - center) / scale fitted on training rows only.
// Constant columns keep scale 1.
class Scaler {
public:
    Scaler() = default;
    static Scaler fit(ScalerKind kind, const Matrix& x);

    ScalerKind kind() const { return kind_; }
    std::vector<double> transform(std::span<const double> row) const;
    Matrix transform(const Matrix& x) const;

    nlohmann::json to_json() const;
    static Scaler from_json(const nlohmann::json& j);
    bool operator==(const Scaler&) const = default;

private:
    ScalerKind kind_ = ScalerKind::none;
    std::vector<double> center_;
    std::vector<double> scale_;
};

// ---- hyperparameters ----------------------------------------------------

struct Hyperparameters {
    int n_estimators = 100;
    std::optional<int> max_depth;
    int min_samples_leaf = 1;
    int min_samples_split = 2;
    ScalerKind scaler = ScalerKind::none;

    bool operator==(const Hyperparameters&) const = default;
};

nlohmann::json to_json(const Hyperparameters& hp);
Hyperparameters hyperparameters_from_json(const nlohmann::json& j);

struct HyperparameterGrid {
    std::vector<int> n_estimators;
    std::vector<std::optional<int>> max_depth;
    std::vector<int> min_samples_leaf;
    std::vector<int> min_samples_split;
    std::vector<ScalerKind> scalers;

    // {50,100,200,300,400} x {none,10,15,20} x {1,2,5,10} x {2,5,10,20} x
    // all four scalers: covers every published final configuration.
    static HyperparameterGrid defaults();
    // Keys as above; absent keys keep the default list. "max_depth" uses
    // null for unbounded.
    static HyperparameterGrid from_json(const nlohmann::json& j);

    void validate() const;  // UsageError on an empty list or nonsense values
    std::size_t size() const;
    // Row-major over the field order above.
    std::vector<Hyperparameters> configurations() const;
    bool contains(const Hyperparameters& hp) const;
};

// Published final random-forest configurations (classifiers, regressors and
// the two risk-task forests).
const std::vector<Hyperparameters>& published_configurations();

// ---- trained pipeline ---------------------------------------------------

// Scaler + forest + the feature layout it was trained on.
class ForestPipeline {
public:
    ForestPipeline() = default;
    ForestPipeline(Hyperparameters hp, Scaler scaler, forest::RandomForest forest,
                   std::optional<std::array<double, 3>> class_weights);

    bool trained() const { return forest_.trained(); }
    forest::Task task() const { return forest_.task(); }
    const Hyperparameters& hyperparameters() const { return hp_; }
    const forest::RandomForest& forest() const { return forest_; }
    const Scaler& scaler() const { return scaler_; }
    const std::optional<std::array<double, 3>>& class_weights() const { return class_weights_; }

    int predict_class(std::span<const double> row) const;
    std::vector<double> predict_proba(std::span<const double> row) const;
    // Regression output clipped to [1, 7].
    double predict_value(std::span<const double> row) const;

    std::vector<int> predict_classes(const Matrix& x) const;
    std::vector<double> predict_values(const Matrix& x) const;

    // Layout reference recorded for persistence; optional.
    std::optional<features::FeatureFileHeader> layout;

    nlohmann::json to_json() const;
    static ForestPipeline from_json(const nlohmann::json& j);
    void save(const std::string& path) const;
    static ForestPipeline load(const std::string& path);

private:
    Hyperparameters hp_;
    Scaler scaler_;
    forest::RandomForest forest_;
    std::optional<std::array<double, 3>> class_weights_;
};

inline constexpr int kModelFormatVersion = 1;
inline constexpr double kScoreMin = 1.0;
inline constexpr double kScoreMax = 7.0;

// ---- grid search --------------------------------------------------------

struct CvEntry {
    Hyperparameters hp;
    std::vector<double> fold_scores;
    double mean = 0.0;
};

struct CvReport {
    std::string metric;  // "macro_f1" (maximized) or "mae" (minimized)
    std::vector<CvEntry> entries;
    std::size_t best = 0;

    nlohmann::json to_json() const;
};

struct FitOptions {
    int folds = 4;
    std::uint64_t seed = kDefaultSeed;
    bool weighted = true;  // classifier only: doubled low/high class weights
};

// Fold id per sample. Each class is shuffled with the seed and dealt
// round-robin. UsageError when a class has fewer members than folds.
std::vector<int> stratified_folds(const std::vector<int>& labels, int folds, std::uint64_t seed);
std::vector<int> kfold(std::size_t n, int folds, std::uint64_t seed);

struct ClassifierFit {
    ForestPipeline model;
    CvReport report;
};

// Exhaustive grid search on mean CV macro-F1, ties to the earlier grid
// point, then a refit on all rows.
ClassifierFit fit_classifier(const Matrix& x, const std::vector<int>& y, const HyperparameterGrid& grid,
                             const FitOptions& options = {});

struct RegressorFit {
    ForestPipeline model;
    CvReport report;
};

// Grid search on mean CV MAE. Targets must lie in [1, 7].
RegressorFit fit_regressor(const Matrix& x, const std::vector<double>& y, const HyperparameterGrid& grid,
                           const FitOptions& options = {});

// Trains one configuration without search.
ForestPipeline train_classifier(const Matrix& x, const std::vector<int>& y, const Hyperparameters& hp,
                                std::uint64_t seed, bool weighted);
ForestPipeline train_regressor(const Matrix& x, const std::vector<double>& y, const Hyperparameters& hp,
                               std::uint64_t seed);

// UsageError for an untrained model.
std::vector<double> importances(const ForestPipeline& model);

// ---- voting -------------------------------------------------------------

// votes[i] is the vote of the voter with priority i (0 = highest).
// Plurality wins; a tie goes to the highest-priority voter whose label is
// among the tied ones.
FusionLabel hard_vote(const std::vector<FusionLabel>& votes);

class Voter {
public:
    virtual ~Voter() = default;
    virtual std::string name() const = 0;
    virtual FusionLabel vote(const corpus::Document& doc) const = 0;
};

// Voters in priority order: CLIFS forest, embedding forest, remote clients.
class EnsembleModel {
public:
    // UsageError with fewer than two voters.
    explicit EnsembleModel(std::vector<const Voter*> voters);
    FusionLabel predict(const corpus::Document& doc) const;
    std::vector<FusionLabel> votes(const corpus::Document& doc) const;
    std::size_t size() const { return voters_.size(); }

private:
    std::vector<const Voter*> voters_;
};

// Drops null entries (absent remote clients) with a warning on stderr.
EnsembleModel make_ensemble(const std::vector<const Voter*>& candidates);

// ---- prompting ----------------------------------------------------------

// Exactly "low", "medium" or "high" after trimming whitespace, optional
// surrounding quotes and a trailing period; case-insensitive.
std::optional<FusionLabel> parse_label_strict(std::string_view response);

class RemoteClassifierClient {
public:
    explicit RemoteClassifierClient(const remote::ChatBackend& backend, int max_attempts = 3);
    // Retries unparseable answers; InferenceError after max_attempts.
    FusionLabel classify(const std::vector<remote::ChatMessage>& prompt) const;

private:
    const remote::ChatBackend& backend_;
    int max_attempts_;
};

struct TrainingExample {
    std::string text;
    FusionLabel label = FusionLabel::medium;
    double score = 0.0;
};

// Brute-force cosine k-nearest-neighbour store over training texts.
class RetrievalIndex {
public:
    RetrievalIndex(const features::SentenceEncoderRuntime& encoder, std::vector<TrainingExample> examples);

    std::size_t size() const { return examples_.size(); }
    const TrainingExample& example(std::size_t i) const { return examples_[i]; }
    const std::vector<double>& embedding(std::size_t i) const { return embeddings_[i]; }

    // Most similar first; ties to the lower index.
    std::vector<std::size_t> nearest(std::string_view query, std::size_t k) const;
    std::vector<std::size_t> nearest(const std::vector<double>& query_embedding, std::size_t k) const;

    // Lowest score, score closest to the median, highest score.
    std::array<std::size_t, 3> anchors() const;

private:
    const features::SentenceEncoderRuntime& encoder_;
    std::vector<TrainingExample> examples_;
    std::vector<std::vector<double>> embeddings_;
};

inline constexpr std::size_t kDefaultRagNeighbors = 5;

// System block (task description, label definitions, three anchors), then
// one user/assistant exchange per retrieved neighbour, then the query.
// UsageError on an empty index.
std::vector<remote::ChatMessage> build_rag_prompt(std::string_view query_text, std::size_t k_neighbors,
                                                  const RetrievalIndex& index);

// Single-message few-shot prompt: anchors plus `samples` random training
// texts with their labels, then the query.
std::vector<remote::ChatMessage> build_few_shot_prompt(std::string_view query_text, const RetrievalIndex& index,
                                                       std::size_t samples, std::uint64_t seed);

// "role: ...\ncontent: ..." blocks separated by blank lines.
std::string render_prompt(const std::vector<remote::ChatMessage>& messages);

class RagVoter : public Voter {
public:
    RagVoter(std::string name, const RemoteClassifierClient& client, const RetrievalIndex& index,
             std::size_t k = kDefaultRagNeighbors);
    std::string name() const override { return name_; }
    FusionLabel vote(const corpus::Document& doc) const override;

private:
    std::string name_;
    const RemoteClassifierClient& client_;
    const RetrievalIndex& index_;
    std::size_t k_;
};

}  // namespace clifs::models
