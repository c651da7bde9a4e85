#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "clifs/vocab.hpp"

namespace clifs::mlm {

inline constexpr std::string_view kMaskToken = "[MASK]";

// Vocabulary side of a tokenizer artifact. Only the word -> single-token id
// mapping is needed: candidate words that split into several subtokens are
// dropped from scoring.
class Tokenizer {
public:
    Tokenizer() = default;
    explicit Tokenizer(std::vector<std::string> tokens);

    // vocab.txt (one token per line, id = line number) or a tokenizer.json
    // carrying model.vocab. FormatError when neither parses.
    static Tokenizer from_file(const std::string& path);

    std::size_t size() const { return tokens_.size(); }
    const std::string& token(std::size_t id) const { return tokens_[id]; }
    std::optional<std::size_t> id_of(std::string_view token) const;

    // Id of `word` when it is one token: tries the word-initial BPE form
    // ("Ġword") before the bare form. Lowercased first.
    std::optional<std::size_t> single_token_id(std::string_view word) const;

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, std::size_t> ids_;
};

// Given a piece sequence with kMaskToken placeholders, returns for each mask
// (in sequence order) a softmax distribution over tokenizer().size() ids.
// Implementations must be deterministic and safe for concurrent const calls.
class MaskedLmRuntime {
public:
    virtual ~MaskedLmRuntime() = default;
    virtual const Tokenizer& tokenizer() const = 0;
    virtual std::vector<std::vector<double>> predict(const std::vector<std::string>& pieces) const = 0;
};

struct ScorerConfig {
    double alpha = 0.5;
    std::size_t max_sequence_tokens = 512;
    std::set<vocab::EntityLabel> ner_labels{vocab::EntityLabel::ORG, vocab::EntityLabel::NORP,
                                            vocab::EntityLabel::GPE};

    void validate() const;  // UsageError unless 0 < alpha <= 1 and max_sequence_tokens >= 2
};

struct DirectionalResult {
    double score = 0.0;
    std::size_t masked_mentions = 0;
    bool no_mentions = true;
};

struct FusionMetrics {
    double s_i_to_t = 0.0;
    double s_t_to_i = 0.0;
    double fusion_proximity = 0.0;
    double fictive_kinship = 0.0;

    bool no_mentions_i_to_t = false;  // no T/NER mention to mask
    bool no_mentions_t_to_i = false;  // no I mention to mask
    bool no_mentions_kinship = false;

    bool any_flag() const { return no_mentions_i_to_t || no_mentions_t_to_i || no_mentions_kinship; }
    bool operator==(const FusionMetrics&) const = default;
};

// Ids of the single-token members of vocab, sorted and deduplicated.
std::vector<std::size_t> candidate_ids(const vocab::VocabularySet& vocab, const Tokenizer& tokenizer);

// Source pieces with every mention collapsed into one mask piece.
struct MaskedSequence {
    std::vector<std::string> pieces;
    std::vector<std::size_t> mask_positions;
};
MaskedSequence mask_mentions(std::string_view text, const std::vector<vocab::CharSpan>& mentions);

// Per-mask distributions for a masked sequence, windowing sequences longer
// than max_sequence_tokens. Each mask is predicted in the window whose
// centre is nearest to it.
std::vector<std::vector<double>> predict_masks(const MaskedSequence& seq, const MaskedLmRuntime& runtime,
                                               std::size_t max_sequence_tokens);

// Average over masked y-mentions of the summed alpha-powered probabilities
// of x-candidates. Zero mentions gives score 0 with no_mentions set.
DirectionalResult directional_score(std::string_view text, const vocab::VocabularySet& candidate_vocab,
                                    const vocab::VocabularySet& mask_vocab,
                                    const std::vector<vocab::EntitySpan>& extra_spans,
                                    const MaskedLmRuntime& runtime, const ScorerConfig& cfg);

// Harmonic mean; 0 when both are 0. UsageError on negative input.
double fusion_proximity(double s_it, double s_ti);

struct Vocabularies {
    vocab::VocabularySet identity;
    vocab::VocabularySet target;
    vocab::VocabularySet kinship;
};

struct Runtimes {
    const MaskedLmRuntime* masked_lm = nullptr;  // required
    const vocab::NerRuntime* ner = nullptr;      // optional; no entity masking when null
};

// S(I->T) and K_f mask T-mentions plus entity spans; S(T->I) masks
// I-mentions only.
FusionMetrics compute_fusion_metrics(std::string_view text, const Vocabularies& vocabularies,
                                     const Runtimes& runtimes, const ScorerConfig& cfg);

}  // namespace clifs::mlm
