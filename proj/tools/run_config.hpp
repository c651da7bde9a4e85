#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "clifs/augmentation.hpp"
#include "clifs/features.hpp"
#include "clifs/models.hpp"
#include "clifs/pipeline.hpp"
#include "clifs/remote.hpp"
#include "json.hpp"

namespace clifs::cli {

// Run configuration: one JSON document. Precedence, lowest first: built-in
// defaults, the config file, --set overrides, dedicated flags (--seed,
// --alpha). Relative paths resolve against the config file's directory.
//
//   seed, alpha, max_sequence_tokens, embedding_dim, degraded
//   runtimes:   {masked_lm, encoder, classifier, ner}   (see runtimes.hpp)
//   vocabulary: {seeds, embeddings, threshold}
//   lexicons:   {affiliation, cogproc, vri_manifest}
//   features:   {drop: ["A", ...]}
//   grid, hyperparameters, folds, weighted, bootstrap
//   augment:    {pivots, rtt_classes, genai_per_class, oversample_fraction,
//                oversample_classes, max_generation_attempts,
//                translation: {kind: identity|replay|chat, path | endpoint},
//                generation:  {kind: replay|chat, path | endpoint}}
//   risk:       {chunk_words, train_fraction}
//   split:      {train, validation, test}
class RunConfig {
public:
    // nullopt: defaults only, base directory is the working directory.
    static RunConfig load(const std::optional<std::string>& path);

    // "a.b.c=<json>" or "a.b.c=<bare string>".
    void apply_override(const std::string& assignment);
    void set(const std::string& dotted_key, nlohmann::json value);

    // Unknown top-level keys and missing referenced files are ConfigErrors.
    void validate() const;

    const nlohmann::json& doc() const { return doc_; }
    const std::string& base_dir() const { return base_dir_; }
    std::string resolve(const std::string& path) const;

    std::uint64_t seed() const;
    double alpha() const;
    // FNV-1a 64 over the canonical dump, as 16 hex digits.
    std::string hash() const;
    // {config_hash, seed, alpha, layout_version, version}
    nlohmann::json provenance() const;

    const nlohmann::json* section(const char* key) const;
    models::HyperparameterGrid grid() const;
    std::optional<models::Hyperparameters> fixed_hyperparameters() const;
    models::FitOptions fit_options() const;
    std::set<features::FeatureGroup> dropped_groups() const;
    bool bootstrap() const;
    corpus::SplitSpec split_spec() const;

private:
    nlohmann::json doc_ = nlohmann::json::object();
    std::string base_dir_ = ".";
};

// Runtimes and featurizer built from a configuration. Owns everything the
// featurizer points to.
struct FeatureStack {
    std::unique_ptr<mlm::MaskedLmRuntime> masked_lm;
    std::unique_ptr<vocab::NerRuntime> ner;
    std::unique_ptr<features::SentenceEncoderRuntime> encoder;
    std::unique_ptr<features::EncoderClassifierRuntime> classifier;
    std::unique_ptr<pipeline::Featurizer> featurizer;
};

FeatureStack build_feature_stack(const RunConfig& config);
pipeline::Lexicons load_lexicons(const RunConfig& config, bool need_vri);

struct AugmentClients {
    std::vector<std::unique_ptr<remote::ChatBackend>> backends;
    std::unique_ptr<augmentation::TranslationClient> translation;
    std::unique_ptr<augmentation::GenerationClient> generation;
};

augmentation::AugmentConfig augment_config(const RunConfig& config);
AugmentClients augment_clients(const RunConfig& config);
remote::EndpointConfig endpoint_from_json(const nlohmann::json& j);

}  // namespace clifs::cli
