#pragma once

#include <optional>
#include <string_view>

#include "clifs/features.hpp"
#include "clifs/lexical.hpp"
#include "clifs/mlm.hpp"
#include "clifs/vocab.hpp"

namespace clifs::pipeline {

// I stays at its seeds; T and K are expanded through the embedding table
// when one is given. Multiword terms survive for masking.
mlm::Vocabularies build_vocabularies(const vocab::SeedLists& seeds, const vocab::EmbeddingTable* table,
                                     double threshold = vocab::kDefaultExpansionThreshold);

struct Lexicons {
    lexical::Lexicon affiliation;
    lexical::Lexicon cogproc;
    std::optional<lexical::VriManifest> vri;
};

struct DocumentFeatures {
    mlm::FusionMetrics metrics;
    lexical::LexicalCounts counts;
    lexical::UaiScores uai;  // sample-independent fields only
    lexical::VriCategoryScores vri;
    features::FeatureVector vector;
};

// Everything needed to turn one text into its feature vector. Immutable
// after construction; featurize() may run concurrently when the runtimes
// allow it.
class Featurizer {
public:
    struct Runtimes {
        const mlm::MaskedLmRuntime* masked_lm = nullptr;
        const vocab::NerRuntime* ner = nullptr;
        const features::SentenceEncoderRuntime* encoder = nullptr;
        const features::EncoderClassifierRuntime* classifier = nullptr;
    };

    // ConfigError when the masked LM is missing, or when the encoder,
    // classifier or VRI manifest is missing outside degraded mode.
    Featurizer(mlm::Vocabularies vocabularies, Lexicons lexicons, Runtimes runtimes, mlm::ScorerConfig scorer,
               features::AssembleOptions options);

    DocumentFeatures featurize(std::string_view text) const;

    features::Layout layout() const { return {options_.embedding_dim}; }
    const mlm::Vocabularies& vocabularies() const { return vocabularies_; }
    const Lexicons& lexicons() const { return lexicons_; }
    const mlm::ScorerConfig& scorer() const { return scorer_; }

private:
    mlm::Vocabularies vocabularies_;
    Lexicons lexicons_;
    Runtimes runtimes_;
    mlm::ScorerConfig scorer_;
    features::AssembleOptions options_;
};

}  // namespace clifs::pipeline
