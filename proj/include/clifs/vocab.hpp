#pragma once

#include <cstddef>
#include <iosfwd>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace clifs::vocab {

enum class Category { identity, target, kinship };  // I, T, K

std::string_view to_string(Category c);

// Seeds are always members of the expanded set. Terms are lowercase; a term
// containing spaces is a multiword phrase.
class VocabularySet {
public:
    VocabularySet() = default;
    VocabularySet(Category category, const std::vector<std::string>& seeds);

    Category category() const { return category_; }
    const std::set<std::string>& seeds() const { return seeds_; }
    const std::set<std::string>& expanded() const { return expanded_; }

    bool contains(std::string_view term) const;
    void add_expanded(std::string term);

private:
    Category category_ = Category::identity;
    std::set<std::string> seeds_;
    std::set<std::string> expanded_;
};

// Seed lists used by default: first-person singular pronouns (I);
// first-person plural pronouns, a parameterized specific list and a generic
// collective list (T); familial terms (K).
struct SeedLists {
    std::vector<std::string> identity;
    std::vector<std::string> target_pronouns;
    std::vector<std::string> target_specific;  // runtime parameter
    std::vector<std::string> target_generic;
    std::vector<std::string> kinship;

    static SeedLists defaults();
    // JSON object with keys identity, target_pronouns, target_specific,
    // target_generic, kinship; missing keys keep their defaults.
    static SeedLists from_json_file(const std::string& path);

    VocabularySet identity_set() const;
    VocabularySet target_set() const;
    VocabularySet kinship_set() const;
};

// ---- static embeddings ------------------------------------------------

class EmbeddingTable {
public:
    EmbeddingTable() = default;

    // First occurrence of a word wins. Throws FormatError on dimension mismatch.
    void add(std::string word, std::vector<double> vector);

    std::size_t size() const { return words_.size(); }
    bool empty() const { return words_.empty(); }
    // 0 when the table is empty.
    std::size_t dimension() const { return dim_; }

    const std::vector<std::string>& words() const { return words_; }
    const std::vector<double>& vector_at(std::size_t i) const { return vectors_[i]; }

    // Exact lookup.
    std::optional<std::size_t> find(std::string_view word) const;
    // Lowercase form first, raw form as a fallback.
    std::optional<std::size_t> lookup(std::string_view word) const;

private:
    std::vector<std::string> words_;
    std::vector<std::vector<double>> vectors_;
    std::unordered_map<std::string, std::size_t> index_;
    std::size_t dim_ = 0;
};

// Plain-text format: "word v1 v2 ... vd" per line.
EmbeddingTable load_embeddings(std::istream& in);
EmbeddingTable load_embeddings(const std::string& path);

double cosine(const std::vector<double>& a, const std::vector<double>& b);

inline constexpr double kDefaultExpansionThreshold = 0.8;

// Single hop: a table word joins when its cosine to some *seed* exceeds the
// threshold. Previously expanded terms are kept but never act as anchors.
VocabularySet expand(const VocabularySet& seed, const EmbeddingTable& table,
                     double threshold = kDefaultExpansionThreshold);

// ---- entities and mentions --------------------------------------------

enum class EntityLabel { ORG, NORP, GPE, OTHER };

std::string_view to_string(EntityLabel l);
EntityLabel parse_entity_label(std::string_view s);

struct EntitySpan {
    std::size_t start = 0;  // byte offsets, end exclusive
    std::size_t end = 0;
    EntityLabel label = EntityLabel::OTHER;

    bool operator==(const EntitySpan&) const = default;
};

struct CharSpan {
    std::size_t start = 0;
    std::size_t end = 0;
    bool operator==(const CharSpan&) const = default;
    auto operator<=>(const CharSpan&) const = default;
};

class NerRuntime {
public:
    virtual ~NerRuntime() = default;
    // Raw tagger output; may include other labels and overlaps.
    virtual std::vector<EntitySpan> tag(std::string_view text) const = 0;
};

// Serializes calls into a runtime that is not safe for concurrent use.
class SerializedNer : public NerRuntime {
public:
    explicit SerializedNer(const NerRuntime& inner) : inner_(inner) {}
    std::vector<EntitySpan> tag(std::string_view text) const override;

private:
    const NerRuntime& inner_;
    mutable std::mutex mutex_;
};

// Phrase-list tagger; case-insensitive whole-word matches. Useful offline
// and in tests.
class GazetteerNer : public NerRuntime {
public:
    void add(std::string phrase, EntityLabel label);
    // "label<TAB>phrase" per line; '#' starts a comment.
    static GazetteerNer from_file(const std::string& path);
    std::vector<EntitySpan> tag(std::string_view text) const override;

private:
    std::vector<std::pair<std::vector<std::string>, EntityLabel>> phrases_;
};

// Keeps ORG/NORP/GPE spans that lie inside the text and resolves overlaps:
// longest span wins, earlier start breaks ties. Result is sorted by start.
std::vector<EntitySpan> filter_entities(std::vector<EntitySpan> spans, std::size_t text_length);

// Runtime failures surface as InferenceError.
std::vector<EntitySpan> detect_entities(std::string_view text, const NerRuntime& ner);

// Case-insensitive whole-word matches of every expanded term (multiword
// terms as contiguous word runs), unioned with extra spans, overlapping
// spans merged. Sorted by start.
std::vector<CharSpan> find_mentions(std::string_view text, const VocabularySet& vocab,
                                    const std::vector<EntitySpan>& extra_spans = {});

}  // namespace clifs::vocab
