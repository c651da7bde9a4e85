#include "clifs/pipeline.hpp"

#include "clifs/errors.hpp"

namespace clifs::pipeline {

mlm::Vocabularies build_vocabularies(const vocab::SeedLists& seeds, const vocab::EmbeddingTable* table,
                                     double threshold) {
    mlm::Vocabularies v{seeds.identity_set(), seeds.target_set(), seeds.kinship_set()};
    if (table) {
        v.target = vocab::expand(v.target, *table, threshold);
        v.kinship = vocab::expand(v.kinship, *table, threshold);
    }
    return v;
}

Featurizer::Featurizer(mlm::Vocabularies vocabularies, Lexicons lexicons, Runtimes runtimes,
                       mlm::ScorerConfig scorer, features::AssembleOptions options)
    : vocabularies_(std::move(vocabularies)),
      lexicons_(std::move(lexicons)),
      runtimes_(runtimes),
      scorer_(scorer),
      options_(options) {
    scorer_.validate();
    if (!runtimes_.masked_lm) throw ConfigError("featurizer: a masked LM runtime is required");
    if (!options_.degraded) {
        if (!runtimes_.encoder) throw ConfigError("featurizer: no sentence encoder (enable degraded mode to zero-fill)");
        if (!runtimes_.classifier)
            throw ConfigError("featurizer: no encoder classifier (enable degraded mode to zero-fill)");
        if (!lexicons_.vri) throw ConfigError("featurizer: no VRI manifest (enable degraded mode to zero-fill)");
    }
    if (runtimes_.encoder && runtimes_.encoder->dimension() != options_.embedding_dim)
        throw ConfigError("featurizer: encoder dimension " + std::to_string(runtimes_.encoder->dimension()) +
                          " differs from the configured embedding_dim " + std::to_string(options_.embedding_dim));
}

DocumentFeatures Featurizer::featurize(std::string_view text) const {
    DocumentFeatures f;
    f.metrics = mlm::compute_fusion_metrics(text, vocabularies_, {runtimes_.masked_lm, runtimes_.ner}, scorer_);
    f.counts = lexical::count(text, lexicons_.affiliation, lexicons_.cogproc);
    f.uai = lexical::naive_uai(f.counts);
    if (lexicons_.vri) f.vri = lexicons_.vri->score(text);
    f.vector = features::assemble(text, f.metrics, f.uai, f.vri.vri_fusion(), f.vri.identification, runtimes_.encoder,
                                  runtimes_.classifier, options_);
    if (!lexicons_.vri) f.vector.zero_filled.insert(features::FeatureGroup::E_vri);
    return f;
}

}  // namespace clifs::pipeline
