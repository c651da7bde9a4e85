#include "clifs/mlm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "clifs/errors.hpp"
#include "clifs/text.hpp"
#include "json.hpp"

namespace clifs::mlm {

// ---- tokenizer --------------------------------------------------------------

Tokenizer::Tokenizer(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        if (tokens_[i].empty()) continue;
        ids_.emplace(tokens_[i], i);  // first occurrence wins
    }
}

Tokenizer Tokenizer::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open tokenizer artifact '" + path + "'");

    if (path.size() >= 5 && path.ends_with(".json")) {
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("tokenizer '" + path + "': " + e.what());
        }
        const nlohmann::json* vocab = nullptr;
        if (j.contains("model") && j["model"].contains("vocab")) vocab = &j["model"]["vocab"];
        if (!vocab || !vocab->is_object()) throw FormatError("tokenizer '" + path + "' has no model.vocab map");
        std::vector<std::string> tokens;
        for (auto it = vocab->begin(); it != vocab->end(); ++it) {
            if (!it.value().is_number_integer() || it.value().get<long long>() < 0)
                throw FormatError("tokenizer '" + path + "': bad id for token '" + it.key() + "'");
            auto id = static_cast<std::size_t>(it.value().get<long long>());
            if (id >= tokens.size()) tokens.resize(id + 1);
            tokens[id] = it.key();
        }
        return Tokenizer(std::move(tokens));
    }

    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        tokens.push_back(line);
    }
    if (tokens.empty()) throw FormatError("tokenizer '" + path + "' is empty");
    return Tokenizer(std::move(tokens));
}

std::optional<std::size_t> Tokenizer::id_of(std::string_view token) const {
    auto it = ids_.find(std::string(token));
    if (it == ids_.end()) return std::nullopt;
    return it->second;
}

std::optional<std::size_t> Tokenizer::single_token_id(std::string_view word) const {
    const std::string lower = text::to_lower(word);
    if (lower.empty() || lower.find(' ') != std::string::npos) return std::nullopt;
    if (auto id = id_of("\xC4\xA0" + lower)) return id;  // "Ġ" word-initial marker
    return id_of(lower);
}

// ---- config -----------------------------------------------------------------

void ScorerConfig::validate() const {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw UsageError("alpha must lie in (0,1]");
    if (max_sequence_tokens < 2) throw UsageError("max_sequence_tokens must be at least 2");
}

// ---- masking ------------------------------------------------------------

std::vector<std::size_t> candidate_ids(const vocab::VocabularySet& vocab, const Tokenizer& tokenizer) {
    std::vector<std::size_t> ids;
    for (const auto& term : vocab.expanded())
        if (auto id = tokenizer.single_token_id(term)) ids.push_back(*id);
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids;
}

MaskedSequence mask_mentions(std::string_view s, const std::vector<vocab::CharSpan>& mentions) {
    MaskedSequence out;
    const auto pieces = text::pieces(s);
    std::size_t mi = 0;
    std::vector<bool> emitted(mentions.size(), false);
    for (const auto& p : pieces) {
        while (mi < mentions.size() && mentions[mi].end <= p.begin) ++mi;
        if (mi < mentions.size() && mentions[mi].start < p.end && p.begin < mentions[mi].end) {
            if (!emitted[mi]) {
                emitted[mi] = true;
                out.mask_positions.push_back(out.pieces.size());
                out.pieces.emplace_back(kMaskToken);
            }
            continue;
        }
        out.pieces.emplace_back(s.substr(p.begin, p.end - p.begin));
    }
    return out;
}

namespace {

std::vector<std::vector<double>> run_runtime(const MaskedLmRuntime& runtime, const std::vector<std::string>& pieces,
                                             std::size_t expected) {
    std::vector<std::vector<double>> dists;
    try {
        dists = runtime.predict(pieces);
    } catch (const InferenceError&) {
        throw;
    } catch (const std::exception& e) {
        throw InferenceError(std::string("masked LM runtime failed: ") + e.what());
    }
    if (dists.size() != expected)
        throw InferenceError("masked LM runtime returned " + std::to_string(dists.size()) +
                             " distributions for " + std::to_string(expected) + " masks");
    return dists;
}

}  // namespace

std::vector<std::vector<double>> predict_masks(const MaskedSequence& seq, const MaskedLmRuntime& runtime,
                                               std::size_t max_sequence_tokens) {
    const std::size_t n = seq.pieces.size();
    const std::size_t masks = seq.mask_positions.size();
    if (masks == 0) return {};
    if (n <= max_sequence_tokens) return run_runtime(runtime, seq.pieces, masks);

    // Overlapping windows with half-window stride; the last one is flush
    // with the end of the sequence.
    const std::size_t width = max_sequence_tokens;
    const std::size_t stride = std::max<std::size_t>(1, width / 2);
    std::vector<std::size_t> starts;
    for (std::size_t b = 0; b + width < n; b += stride) starts.push_back(b);
    starts.push_back(n - width);

    std::vector<std::vector<std::size_t>> assigned(starts.size());  // mask ordinals per window
    for (std::size_t m = 0; m < masks; ++m) {
        const double pos = static_cast<double>(seq.mask_positions[m]);
        std::size_t best = 0;
        double best_dist = INFINITY;
        for (std::size_t w = 0; w < starts.size(); ++w) {
            const double lo = static_cast<double>(starts[w]);
            if (pos < lo || pos >= lo + static_cast<double>(width)) continue;
            const double centre = lo + static_cast<double>(width - 1) / 2.0;
            const double d = std::abs(pos - centre);
            if (d < best_dist) {
                best_dist = d;
                best = w;
            }
        }
        assigned[best].push_back(m);
    }

    std::vector<std::vector<double>> out(masks);
    for (std::size_t w = 0; w < starts.size(); ++w) {
        if (assigned[w].empty()) continue;
        const auto b = starts[w];
        std::vector<std::string> window(seq.pieces.begin() + static_cast<std::ptrdiff_t>(b),
                                        seq.pieces.begin() + static_cast<std::ptrdiff_t>(b + width));
        // Ordinal of each mask inside this window.
        std::vector<std::size_t> in_window;
        for (std::size_t m = 0; m < masks; ++m) {
            auto p = seq.mask_positions[m];
            if (p >= b && p < b + width) in_window.push_back(m);
        }
        auto dists = run_runtime(runtime, window, in_window.size());
        for (std::size_t k = 0; k < in_window.size(); ++k) {
            if (std::find(assigned[w].begin(), assigned[w].end(), in_window[k]) != assigned[w].end())
                out[in_window[k]] = std::move(dists[k]);
        }
    }
    return out;
}

namespace {

double pooled_score(const std::vector<std::vector<double>>& dists, const std::vector<std::size_t>& candidates,
                    double alpha) {
    double total = 0.0;
    for (const auto& dist : dists) {
        double mask_score = 0.0;
        for (auto id : candidates) {
            if (id >= dist.size())
                throw InferenceError("masked LM distribution shorter than the tokenizer vocabulary");
            mask_score += std::pow(std::max(0.0, dist[id]), alpha);
        }
        total += mask_score;
    }
    return total / static_cast<double>(dists.size());
}

struct MaskedPass {
    MaskedSequence seq;
    std::vector<std::vector<double>> dists;
};

MaskedPass masked_pass(std::string_view text, const vocab::VocabularySet& mask_vocab,
                       const std::vector<vocab::EntitySpan>& extra_spans, const MaskedLmRuntime& runtime,
                       const ScorerConfig& cfg) {
    MaskedPass pass;
    pass.seq = mask_mentions(text, vocab::find_mentions(text, mask_vocab, extra_spans));
    pass.dists = predict_masks(pass.seq, runtime, cfg.max_sequence_tokens);
    return pass;
}

DirectionalResult score_pass(const MaskedPass& pass, const std::vector<std::size_t>& candidates, double alpha) {
    DirectionalResult r;
    r.masked_mentions = pass.dists.size();
    r.no_mentions = pass.dists.empty();
    r.score = r.no_mentions ? 0.0 : pooled_score(pass.dists, candidates, alpha);
    return r;
}

}  // namespace

DirectionalResult directional_score(std::string_view text, const vocab::VocabularySet& candidate_vocab,
                                    const vocab::VocabularySet& mask_vocab,
                                    const std::vector<vocab::EntitySpan>& extra_spans,
                                    const MaskedLmRuntime& runtime, const ScorerConfig& cfg) {
    cfg.validate();
    if (text::trim(text).empty()) throw UsageError("directional_score: empty text");
    const auto candidates = candidate_ids(candidate_vocab, runtime.tokenizer());
    return score_pass(masked_pass(text, mask_vocab, extra_spans, runtime, cfg), candidates, cfg.alpha);
}

double fusion_proximity(double s_it, double s_ti) {
    if (s_it < 0.0 || s_ti < 0.0 || std::isnan(s_it) || std::isnan(s_ti))
        throw UsageError("fusion_proximity: directional scores must be non-negative");
    const double sum = s_it + s_ti;
    if (sum == 0.0) return 0.0;
    if (s_it == s_ti) return s_it;
    return std::clamp(2.0 * s_it * s_ti / sum, std::min(s_it, s_ti), std::max(s_it, s_ti));
}

FusionMetrics compute_fusion_metrics(std::string_view text, const Vocabularies& vocabularies,
                                     const Runtimes& runtimes, const ScorerConfig& cfg) {
    cfg.validate();
    if (!runtimes.masked_lm) throw ConfigError("compute_fusion_metrics: no masked LM runtime");
    if (text::trim(text).empty()) throw UsageError("compute_fusion_metrics: empty text");
    const auto& runtime = *runtimes.masked_lm;
    const auto& tokenizer = runtime.tokenizer();

    std::vector<vocab::EntitySpan> entities;
    if (runtimes.ner) {
        for (const auto& e : vocab::detect_entities(text, *runtimes.ner))
            if (cfg.ner_labels.contains(e.label)) entities.push_back(e);
    }

    // S(I->T) and K_f share the target-masked pass.
    const auto target_pass = masked_pass(text, vocabularies.target, entities, runtime, cfg);
    const auto identity_pass = masked_pass(text, vocabularies.identity, {}, runtime, cfg);

    const auto it = score_pass(target_pass, candidate_ids(vocabularies.identity, tokenizer), cfg.alpha);
    const auto kf = score_pass(target_pass, candidate_ids(vocabularies.kinship, tokenizer), cfg.alpha);
    const auto ti = score_pass(identity_pass, candidate_ids(vocabularies.target, tokenizer), cfg.alpha);

    FusionMetrics m;
    m.s_i_to_t = it.score;
    m.s_t_to_i = ti.score;
    m.fictive_kinship = kf.score;
    m.fusion_proximity = fusion_proximity(it.score, ti.score);
    m.no_mentions_i_to_t = it.no_mentions;
    m.no_mentions_t_to_i = ti.no_mentions;
    m.no_mentions_kinship = kf.no_mentions;
    return m;
}

}  // namespace clifs::mlm
