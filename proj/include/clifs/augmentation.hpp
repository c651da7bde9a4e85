#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "clifs/corpus.hpp"
#include "clifs/labels.hpp"
#include "clifs/random.hpp"
#include "clifs/remote.hpp"

namespace clifs::augmentation {

using corpus::Document;

class TranslationClient {
public:
    virtual ~TranslationClient() = default;
    // English -> pivot -> English. Throws InferenceError on failure.
    virtual std::string round_trip(std::string_view text, std::string_view pivot) const = 0;
};

class GenerationClient {
public:
    virtual ~GenerationClient() = default;
    virtual std::string generate(std::string_view prompt) const = 0;
};

// Offline stand-in that returns its input unchanged.
class IdentityTranslationClient : public TranslationClient {
public:
    std::string round_trip(std::string_view text, std::string_view) const override { return std::string(text); }
};

// Two chat requests: translate to the pivot, then back to English.
class ChatTranslationClient : public TranslationClient {
public:
    explicit ChatTranslationClient(const remote::ChatBackend& backend) : backend_(backend) {}
    std::string round_trip(std::string_view text, std::string_view pivot) const override;

private:
    const remote::ChatBackend& backend_;
};

class ChatGenerationClient : public GenerationClient {
public:
    explicit ChatGenerationClient(const remote::ChatBackend& backend) : backend_(backend) {}
    std::string generate(std::string_view prompt) const override;

private:
    const remote::ChatBackend& backend_;
};

inline const std::vector<std::string> kDefaultPivots{"german", "chinese"};

struct AugmentedDataset {
    std::vector<Document> records;
    std::map<std::string, std::string> lineage;  // augmented id -> source id

    std::array<std::size_t, 3> class_histogram() const;
};

// One record per pivot, id "<source>#rtt-<pivot>", inheriting label, score
// and target. A failing pivot is skipped and reported in `warnings`.
std::vector<Document> rtt(const Document& doc, const TranslationClient& client,
                          const std::vector<std::string>& pivots = kDefaultPivots,
                          std::vector<std::string>* warnings = nullptr);

// ---- generation prompts -------------------------------------------------

struct FusionTarget {
    std::string category;  // group, individual, value, ...
    std::string specific;  // "your political party", ...
};

// Target categories and specific targets used for synthetic essays.
const std::vector<FusionTarget>& fusion_targets();
FusionTarget sample_target(Rng& rng);

struct AnchorExample {
    double score = 0.0;
    std::string text;
};

inline constexpr std::size_t kMinGeneratedWords = 57;
inline constexpr std::size_t kMaxGeneratedWords = 249;

// Five-section prompt (examples, role, length, target, exclusivity).
// UsageError when an anchor text is empty.
std::string build_generation_prompt(FusionLabel category, double target_score,
                                    const std::array<AnchorExample, 3>& anchors, const FusionTarget& target);

// Scores print with at least one decimal ("7.0", "4.571428571").
std::string format_score(double score);

// Retries until the word count lies in [57, 249]; nullopt after
// max_attempts out-of-bounds answers.
std::optional<std::string> generate_validated(const GenerationClient& client, std::string_view prompt,
                                              int max_attempts = 3);

// ---- oversampling -------------------------------------------------------

// For each listed class, floor(fraction * n) distinct records chosen with
// the seed are duplicated (id "<source>#os", provenance oversampled).
AugmentedDataset oversample(const std::vector<Document>& dataset,
                            const std::set<FusionLabel>& classes = {FusionLabel::low, FusionLabel::high},
                            double fraction = 0.25, std::uint64_t seed = kDefaultSeed);

// ---- leakage guard ------------------------------------------------------

// Follows source_id links to the human root of every record. Throws
// LeakageError when any record is a test item or descends from one, when an
// rtt/oversampled record has no source_id, or when a link cannot be
// resolved inside pool + test ids.
void verify_no_leakage(const std::vector<Document>& pool, const std::set<std::string>& test_ids);

// Drops test items and their descendants; other records are kept in order.
std::vector<Document> exclude_test_descendants(const std::vector<Document>& pool,
                                               const std::set<std::string>& test_ids);

// ---- full recipe --------------------------------------------------------

struct AugmentConfig {
    std::vector<std::string> pivots = kDefaultPivots;
    std::set<FusionLabel> rtt_classes{FusionLabel::low, FusionLabel::high};
    // Synthetic essays per class; zero disables generation for that class.
    std::array<std::size_t, 3> genai_per_class{0, 0, 0};
    double oversample_fraction = 0.25;
    std::set<FusionLabel> oversample_classes{FusionLabel::low, FusionLabel::high};
    std::uint64_t seed = kDefaultSeed;
    int max_generation_attempts = 3;
};

struct Clients {
    const TranslationClient* translation = nullptr;
    const GenerationClient* generation = nullptr;
};

// RTT on the configured classes, generation with training-split anchors,
// then oversampling. Human records must carry labels and scores; human test
// items are dropped with a warning and never used as sources. Already
// augmented input records are kept after the humans; LeakageError when any
// of them descends from a test item or has a broken lineage. Output order:
// humans, carried input, rtt (by source, pivot), genai (by class, draw),
// oversampled (by class, source). The result passes verify_no_leakage
// against test_ids.
AugmentedDataset augment(const std::vector<Document>& training, const std::set<std::string>& test_ids,
                         const Clients& clients, const AugmentConfig& config,
                         std::vector<std::string>* warnings = nullptr);

}  // namespace clifs::augmentation
