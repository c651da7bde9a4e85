#include "clifs/vocab.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "clifs/errors.hpp"
#include "clifs/text.hpp"
#include "json.hpp"

namespace clifs::vocab {

std::string_view to_string(Category c) {
    switch (c) {
        case Category::identity: return "I";
        case Category::target: return "T";
        case Category::kinship: return "K";
    }
    return "?";
}

namespace {

std::string normalize_term(std::string_view raw) {
    // Lowercase and collapse internal whitespace.
    auto parts = text::split_whitespace(text::to_lower(raw));
    std::string out;
    for (const auto& p : parts) {
        if (!out.empty()) out += ' ';
        out += p;
    }
    return out;
}

}  // namespace

VocabularySet::VocabularySet(Category category, const std::vector<std::string>& seeds) : category_(category) {
    for (const auto& s : seeds) {
        auto t = normalize_term(s);
        if (t.empty()) throw UsageError("vocabulary terms must be non-empty");
        seeds_.insert(t);
        expanded_.insert(t);
    }
}

bool VocabularySet::contains(std::string_view term) const { return expanded_.contains(normalize_term(term)); }

void VocabularySet::add_expanded(std::string term) {
    auto t = normalize_term(term);
    if (t.empty()) throw UsageError("vocabulary terms must be non-empty");
    expanded_.insert(std::move(t));
}

// ---- seed lists -----------------------------------------------------------

SeedLists SeedLists::defaults() {
    SeedLists s;
    s.identity = {"i", "me", "my", "mine", "myself"};
    s.target_pronouns = {"we", "us", "our", "ours", "ourselves"};
    s.target_specific = {"religion", "religious", "church", "god", "college",
                         "university", "school", "usa", "country", "america"};
    s.target_generic = {"team", "class", "club", "society", "squad", "gang", "band", "crew"};
    s.kinship = {"brother", "sister", "family", "motherland", "our blood", "fatherland", "sons",
                 "daughters", "kin", "my people", "my race", "our people", "european race", "ancestry",
                 "ancestor", "descendant", "fellow", "brethren", "comrades"};
    return s;
}

SeedLists SeedLists::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open seed list file '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("seed list '" + path + "': " + e.what());
    }
    SeedLists s = defaults();
    auto take = [&](const char* key, std::vector<std::string>& dst) {
        if (!j.contains(key)) return;
        try {
            dst = j.at(key).get<std::vector<std::string>>();
        } catch (const nlohmann::json::exception&) {
            throw FormatError(std::string("seed list key '") + key + "' must be a list of strings");
        }
    };
    take("identity", s.identity);
    take("target_pronouns", s.target_pronouns);
    take("target_specific", s.target_specific);
    take("target_generic", s.target_generic);
    take("kinship", s.kinship);
    return s;
}

VocabularySet SeedLists::identity_set() const { return {Category::identity, identity}; }

VocabularySet SeedLists::target_set() const {
    std::vector<std::string> all = target_pronouns;
    all.insert(all.end(), target_specific.begin(), target_specific.end());
    all.insert(all.end(), target_generic.begin(), target_generic.end());
    return {Category::target, all};
}

VocabularySet SeedLists::kinship_set() const { return {Category::kinship, kinship}; }

// ---- embeddings -----------------------------------------------------------

void EmbeddingTable::add(std::string word, std::vector<double> vector) {
    if (vector.empty()) throw FormatError("embedding for '" + word + "' has no components");
    if (words_.empty()) {
        dim_ = vector.size();
    } else if (vector.size() != dim_) {
        throw FormatError("embedding for '" + word + "' has dimension " + std::to_string(vector.size()) +
                          ", expected " + std::to_string(dim_));
    }
    if (index_.contains(word)) return;
    index_.emplace(word, words_.size());
    words_.push_back(std::move(word));
    vectors_.push_back(std::move(vector));
}

std::optional<std::size_t> EmbeddingTable::find(std::string_view word) const {
    auto it = index_.find(std::string(word));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::optional<std::size_t> EmbeddingTable::lookup(std::string_view word) const {
    if (auto i = find(text::to_lower(word))) return i;
    return find(word);
}

EmbeddingTable load_embeddings(std::istream& in) {
    EmbeddingTable table;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto fields = text::split_whitespace(line);
        if (fields.empty()) continue;
        if (fields.size() < 2) throw FormatError("embeddings line " + std::to_string(line_no) + ": no vector");
        std::vector<double> v;
        v.reserve(fields.size() - 1);
        for (std::size_t i = 1; i < fields.size(); ++i) {
            try {
                std::size_t used = 0;
                v.push_back(std::stod(fields[i], &used));
                if (used != fields[i].size()) throw std::invalid_argument("trailing characters");
            } catch (const std::exception&) {
                throw FormatError("embeddings line " + std::to_string(line_no) + ": bad number '" + fields[i] +
                                  "'");
            }
        }
        try {
            table.add(fields[0], std::move(v));
        } catch (const FormatError& e) {
            throw FormatError("embeddings line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return table;
}

EmbeddingTable load_embeddings(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open embeddings '" + path + "'");
    return load_embeddings(in);
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    const std::size_t n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

VocabularySet expand(const VocabularySet& seed, const EmbeddingTable& table, double threshold) {
    if (!(threshold > 0.0 && threshold <= 1.0)) throw UsageError("expansion threshold must lie in (0,1]");
    VocabularySet out = seed;
    if (table.empty()) return out;

    std::vector<std::size_t> anchors;
    for (const auto& s : seed.seeds())
        if (auto i = table.lookup(s)) anchors.push_back(*i);
    if (anchors.empty()) return out;

    for (std::size_t w = 0; w < table.size(); ++w) {
        const auto& vw = table.vector_at(w);
        for (auto a : anchors) {
            if (cosine(vw, table.vector_at(a)) > threshold) {
                out.add_expanded(table.words()[w]);
                break;
            }
        }
    }
    return out;
}

// ---- entities -------------------------------------------------------------

std::string_view to_string(EntityLabel l) {
    switch (l) {
        case EntityLabel::ORG: return "ORG";
        case EntityLabel::NORP: return "NORP";
        case EntityLabel::GPE: return "GPE";
        case EntityLabel::OTHER: return "OTHER";
    }
    return "OTHER";
}

EntityLabel parse_entity_label(std::string_view s) {
    if (s == "ORG") return EntityLabel::ORG;
    if (s == "NORP") return EntityLabel::NORP;
    if (s == "GPE") return EntityLabel::GPE;
    return EntityLabel::OTHER;
}

std::vector<EntitySpan> SerializedNer::tag(std::string_view text) const {
    std::lock_guard lock(mutex_);
    return inner_.tag(text);
}

void GazetteerNer::add(std::string phrase, EntityLabel label) {
    std::vector<std::string> ws;
    for (auto& t : text::words(phrase)) ws.push_back(t.lower);
    if (ws.empty()) throw UsageError("gazetteer phrase must contain a word");
    phrases_.emplace_back(std::move(ws), label);
}

GazetteerNer GazetteerNer::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open gazetteer '" + path + "'");
    GazetteerNer g;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto t = text::trim(line);
        if (t.empty() || t[0] == '#') continue;
        auto tab = t.find('\t');
        if (tab == std::string::npos)
            throw FormatError("gazetteer line " + std::to_string(line_no) + ": expected 'LABEL<TAB>phrase'");
        g.add(t.substr(tab + 1), parse_entity_label(text::trim(t.substr(0, tab))));
    }
    return g;
}

std::vector<EntitySpan> GazetteerNer::tag(std::string_view s) const {
    auto tokens = text::words(s);
    std::vector<EntitySpan> out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        for (const auto& [ws, label] : phrases_) {
            if (i + ws.size() > tokens.size()) continue;
            bool match = true;
            for (std::size_t k = 0; k < ws.size() && match; ++k) match = tokens[i + k].lower == ws[k];
            if (match) out.push_back({tokens[i].begin, tokens[i + ws.size() - 1].end, label});
        }
    }
    return out;
}

std::vector<EntitySpan> filter_entities(std::vector<EntitySpan> spans, std::size_t text_length) {
    std::erase_if(spans, [&](const EntitySpan& e) {
        return e.label == EntityLabel::OTHER || e.start >= e.end || e.end > text_length;
    });
    std::stable_sort(spans.begin(), spans.end(), [](const EntitySpan& a, const EntitySpan& b) {
        auto la = a.end - a.start, lb = b.end - b.start;
        if (la != lb) return la > lb;
        return a.start < b.start;
    });
    std::vector<EntitySpan> kept;
    for (const auto& e : spans) {
        bool overlaps = std::any_of(kept.begin(), kept.end(),
                                    [&](const EntitySpan& k) { return e.start < k.end && k.start < e.end; });
        if (!overlaps) kept.push_back(e);
    }
    std::sort(kept.begin(), kept.end(), [](const EntitySpan& a, const EntitySpan& b) { return a.start < b.start; });
    return kept;
}

std::vector<EntitySpan> detect_entities(std::string_view text, const NerRuntime& ner) {
    std::vector<EntitySpan> raw;
    try {
        raw = ner.tag(text);
    } catch (const InferenceError&) {
        throw;
    } catch (const std::exception& e) {
        throw InferenceError(std::string("NER runtime failed: ") + e.what());
    }
    return filter_entities(std::move(raw), text.size());
}

// ---- mentions -------------------------------------------------------------

std::vector<CharSpan> find_mentions(std::string_view s, const VocabularySet& vocab,
                                    const std::vector<EntitySpan>& extra_spans) {
    auto tokens = text::words(s);

    std::vector<std::vector<std::string>> terms;
    for (const auto& term : vocab.expanded()) {
        std::vector<std::string> ws;
        for (auto& t : text::words(term)) ws.push_back(t.lower);
        if (!ws.empty()) terms.push_back(std::move(ws));
    }

    std::vector<CharSpan> spans;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        for (const auto& ws : terms) {
            if (i + ws.size() > tokens.size() || tokens[i].lower != ws[0]) continue;
            bool match = true;
            for (std::size_t k = 1; k < ws.size() && match; ++k) match = tokens[i + k].lower == ws[k];
            if (match) spans.push_back({tokens[i].begin, tokens[i + ws.size() - 1].end});
        }
    }
    for (const auto& e : extra_spans)
        if (e.start < e.end && e.end <= s.size()) spans.push_back({e.start, e.end});

    std::sort(spans.begin(), spans.end());
    std::vector<CharSpan> merged;
    for (const auto& sp : spans) {
        if (!merged.empty() && sp.start < merged.back().end) {
            merged.back().end = std::max(merged.back().end, sp.end);
        } else {
            merged.push_back(sp);
        }
    }
    return merged;
}

}  // namespace clifs::vocab
