#include "clifs/augmentation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>

#include "clifs/errors.hpp"
#include "clifs/text.hpp"

namespace clifs::augmentation {

using corpus::Provenance;

// ---- clients ------------------------------------------------------------

std::string ChatTranslationClient::round_trip(std::string_view text, std::string_view pivot) const {
    auto ask = [&](const std::string& instruction, std::string_view body) {
        auto out = backend_.complete({{"system", instruction}, {"user", std::string(body)}});
        if (text::trim(out).empty()) throw InferenceError("translation returned empty text");
        return out;
    };
    const auto forward = ask("Translate the user's text into " + std::string(pivot) +
                                 ". Output only the translation.",
                             text);
    return ask("Translate the user's text into English. Output only the translation.", forward);
}

std::string ChatGenerationClient::generate(std::string_view prompt) const {
    return backend_.complete({{"user", std::string(prompt)}});
}

std::array<std::size_t, 3> AugmentedDataset::class_histogram() const {
    std::array<std::size_t, 3> h{};
    for (const auto& r : records)
        if (r.label) ++h[static_cast<std::size_t>(to_index(*r.label))];
    return h;
}

// ---- RTT ----------------------------------------------------------------

std::vector<Document> rtt(const Document& doc, const TranslationClient& client, const std::vector<std::string>& pivots,
                          std::vector<std::string>* warnings) {
    std::vector<Document> out;
    for (const auto& pivot : pivots) {
        std::string translated;
        try {
            translated = client.round_trip(doc.text, pivot);
        } catch (const std::exception& e) {
            const auto msg = "rtt(" + doc.id + ", " + pivot + ") skipped: " + e.what();
            if (warnings) warnings->push_back(msg);
            std::cerr << "warning: " << msg << '\n';
            continue;
        }
        if (text::trim(translated).empty()) {
            const auto msg = "rtt(" + doc.id + ", " + pivot + ") skipped: empty translation";
            if (warnings) warnings->push_back(msg);
            std::cerr << "warning: " << msg << '\n';
            continue;
        }
        Document d = doc;
        d.id = doc.id + "#rtt-" + pivot;
        d.text = std::move(translated);
        d.provenance = Provenance::rtt;
        d.source_id = doc.id;
        out.push_back(std::move(d));
    }
    return out;
}

// ---- generation ---------------------------------------------------------

const std::vector<FusionTarget>& fusion_targets() {
    static const std::vector<FusionTarget> targets = {
        {"group", "your political party"},
        {"group", "your gang"},
        {"group", "your favorite sports team"},
        {"individual", "your sibling"},
        {"individual", "your romantic partner"},
        {"individual", "a political leader"},
        {"value", "your calling"},
        {"value", "god"},
        {"value", "the priesthood"},
        {"ideology or cause", "ideology"},
        {"brand", "your favorite brand"},
        {"creature", "a famous animal"},
    };
    return targets;
}

FusionTarget sample_target(Rng& rng) {
    const auto& t = fusion_targets();
    return t[rng.index(t.size())];
}

std::string format_score(double score) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9f", score);
    std::string s = buf;
    while (s.back() == '0') s.pop_back();
    if (s.back() == '.') s += '0';
    return s;
}

std::string build_generation_prompt(FusionLabel category, double target_score,
                                    const std::array<AnchorExample, 3>& anchors, const FusionTarget& target) {
    for (const auto& a : anchors)
        if (text::trim(a.text).empty()) throw UsageError("generation prompt: anchor text is empty");
    if (target.category.empty() || target.specific.empty()) throw UsageError("generation prompt: empty target");
    const std::string cat(to_string(category));

    std::string p = "Here is a sample of responses regarding different targets that have scored " + cat +
                    " on the verbal identity fusion scale like you:";
    for (const auto& a : anchors)
        p += "\n\nVerbal Identity Fusion Scale Score:  " + format_score(a.score) + "\nResponse: " + a.text;
    p += "\n\nRole:\nYou are an individual writing for 6-8 minutes about a target and your relationship with the "
         "target. You are an individual with " +
         cat + " identity fusion with your target. If you took the verbal identity fusion scale you would score " +
         format_score(target_score) + " out of 7.";
    p += "\n\nLength:\nWrite between " + std::to_string(kMinGeneratedWords) + " and " +
         std::to_string(kMaxGeneratedWords) + " words in your response.";
    p += "\n\nTarget:\nYour target is a(n) " + target.category + ". The " + target.category + " is " +
         target.specific + ".";
    p += "\n\nExclusivity:\nDon't write about other targets and please remember to stay on task. Reflect on your "
         "relationship and what the target means to you. Resist using the word identity. Do not use the word "
         "identity. You are unaware we are testing for identity fusion. No score is necessary, we will give you a "
         "score later. No introduction as ChatGPT is necessary. Do not give an introduction as ChatGPT. Just start "
         "responding to the prompt.";
    return p;
}

std::optional<std::string> generate_validated(const GenerationClient& client, std::string_view prompt,
                                              int max_attempts) {
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        auto out = client.generate(prompt);
        const auto n = text::whitespace_word_count(out);
        if (n >= kMinGeneratedWords && n <= kMaxGeneratedWords) return text::trim(out);
    }
    return std::nullopt;
}

// ---- oversampling -------------------------------------------------------

AugmentedDataset oversample(const std::vector<Document>& dataset, const std::set<FusionLabel>& classes, double fraction,
                            std::uint64_t seed) {
    if (!(fraction >= 0.0 && fraction <= 1.0)) throw UsageError("oversample fraction must lie in [0, 1]");
    AugmentedDataset out;
    out.records = dataset;
    for (auto c : kFusionLabels) {
        if (!classes.contains(c)) continue;
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < dataset.size(); ++i)
            if (dataset[i].label == c) members.push_back(i);
        const auto k = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(members.size())));
        Rng rng(seed, {static_cast<std::uint64_t>(to_index(c))});
        rng.shuffle(members);
        members.resize(k);
        std::sort(members.begin(), members.end());
        for (auto i : members) {
            Document d = dataset[i];
            d.id = dataset[i].id + "#os";
            d.provenance = Provenance::oversampled;
            d.source_id = dataset[i].id;
            out.lineage[d.id] = dataset[i].id;
            out.records.push_back(std::move(d));
        }
    }
    for (const auto& r : dataset)
        if (r.source_id && (r.provenance == Provenance::rtt || r.provenance == Provenance::oversampled))
            out.lineage[r.id] = *r.source_id;
    return out;
}

// ---- leakage ------------------------------------------------------------

namespace {

enum class Ancestry { clean, test, broken };

Ancestry trace(const Document& start, const std::map<std::string, const Document*>& by_id,
               const std::set<std::string>& test_ids, std::string* reason) {
    const Document* cur = &start;
    std::set<std::string> seen;
    while (true) {
        if (test_ids.contains(cur->id)) {
            if (reason) *reason = "'" + start.id + "' is or descends from test item '" + cur->id + "'";
            return Ancestry::test;
        }
        if (cur->provenance == Provenance::human || cur->provenance == Provenance::genai) return Ancestry::clean;
        if (!cur->source_id) {
            if (reason) *reason = "'" + cur->id + "' has no source_id";
            return Ancestry::broken;
        }
        const auto& src = *cur->source_id;
        if (test_ids.contains(src)) {
            if (reason) *reason = "'" + start.id + "' descends from test item '" + src + "'";
            return Ancestry::test;
        }
        auto it = by_id.find(src);
        if (it == by_id.end()) {
            if (reason) *reason = "source '" + src + "' of '" + cur->id + "' cannot be resolved";
            return Ancestry::broken;
        }
        if (!seen.insert(cur->id).second) {
            if (reason) *reason = "lineage cycle at '" + cur->id + "'";
            return Ancestry::broken;
        }
        cur = it->second;
    }
}

std::map<std::string, const Document*> index_by_id(const std::vector<Document>& pool) {
    std::map<std::string, const Document*> by_id;
    for (const auto& d : pool) by_id.emplace(d.id, &d);
    return by_id;
}

}  // namespace

void verify_no_leakage(const std::vector<Document>& pool, const std::set<std::string>& test_ids) {
    const auto by_id = index_by_id(pool);
    for (const auto& d : pool) {
        std::string reason;
        if (trace(d, by_id, test_ids, &reason) != Ancestry::clean) throw LeakageError("leakage guard: " + reason);
    }
}

std::vector<Document> exclude_test_descendants(const std::vector<Document>& pool,
                                               const std::set<std::string>& test_ids) {
    const auto by_id = index_by_id(pool);
    std::vector<Document> out;
    for (const auto& d : pool)
        if (trace(d, by_id, test_ids, nullptr) != Ancestry::test) out.push_back(d);
    return out;
}

// ---- recipe -------------------------------------------------------------

AugmentedDataset augment(const std::vector<Document>& training, const std::set<std::string>& test_ids,
                         const Clients& clients, const AugmentConfig& config, std::vector<std::string>* warnings) {
    const bool generating = std::any_of(config.genai_per_class.begin(), config.genai_per_class.end(),
                                        [](std::size_t n) { return n > 0; });
    std::vector<Document> humans, carried;
    for (const auto& d : training) {
        if (d.provenance != Provenance::human) {
            carried.push_back(d);
            continue;
        }
        if (test_ids.contains(d.id)) {
            std::cerr << "warning: test item '" << d.id << "' found in training input, excluded\n";
            continue;
        }
        if (!d.label) throw UsageError("augment: human record '" + d.id + "' has no label");
        if (generating && !d.vifs_score) throw UsageError("augment: human record '" + d.id + "' has no vifs_score");
        humans.push_back(d);
    }

    std::vector<Document> pool = humans;
    if (!carried.empty()) {
        // Previously augmented input must trace back to clean training roots.
        std::vector<Document> check = humans;
        check.insert(check.end(), carried.begin(), carried.end());
        verify_no_leakage(check, test_ids);
        pool.insert(pool.end(), carried.begin(), carried.end());
    }

    if (!config.rtt_classes.empty() && !config.pivots.empty()) {
        if (!clients.translation) throw ConfigError("augment: RTT requested but no translation client configured");
        for (const auto& h : humans)
            if (config.rtt_classes.contains(*h.label))
                for (auto& d : rtt(h, *clients.translation, config.pivots, warnings)) pool.push_back(std::move(d));
    }

    if (generating) {
        if (!clients.generation) throw ConfigError("augment: generation requested but no generation client configured");
        for (auto c : kFusionLabels) {
            const auto want = config.genai_per_class[static_cast<std::size_t>(to_index(c))];
            if (want == 0) continue;
            std::vector<const Document*> members;
            for (const auto& h : humans)
                if (h.label == c) members.push_back(&h);
            if (members.size() < 3)
                throw UsageError("augment: class '" + std::string(to_string(c)) + "' needs 3 training anchors");
            Rng rng(config.seed, {0x67656e, static_cast<std::uint64_t>(to_index(c))});
            for (std::size_t draw = 0; draw < want; ++draw) {
                auto picks = members;
                rng.shuffle(picks);
                const std::array<AnchorExample, 3> anchors{AnchorExample{*picks[0]->vifs_score, picks[0]->text},
                                                           AnchorExample{*picks[1]->vifs_score, picks[1]->text},
                                                           AnchorExample{*picks[2]->vifs_score, picks[2]->text}};
                const double score = *members[rng.index(members.size())]->vifs_score;
                const auto target = sample_target(rng);
                const auto prompt = build_generation_prompt(c, score, anchors, target);
                std::optional<std::string> essay;
                try {
                    essay = generate_validated(*clients.generation, prompt, config.max_generation_attempts);
                } catch (const std::exception& e) {
                    const auto msg = "generation " + std::string(to_string(c)) + "/" + std::to_string(draw) +
                                     " skipped: " + e.what();
                    if (warnings) warnings->push_back(msg);
                    std::cerr << "warning: " << msg << '\n';
                    continue;
                }
                if (!essay) {
                    const auto msg = "generation " + std::string(to_string(c)) + "/" + std::to_string(draw) +
                                     " skipped: word count out of bounds";
                    if (warnings) warnings->push_back(msg);
                    std::cerr << "warning: " << msg << '\n';
                    continue;
                }
                Document d;
                d.id = "genai-" + std::string(to_string(c)) + "-" + std::to_string(draw);
                d.text = std::move(*essay);
                d.target_category = target.category;
                d.vifs_score = score;
                d.label = c;
                d.provenance = Provenance::genai;
                pool.push_back(std::move(d));
            }
        }
    }

    auto out = oversample(pool, config.oversample_classes, config.oversample_fraction, config.seed);
    verify_no_leakage(out.records, test_ids);
    return out;
}

}  // namespace clifs::augmentation
