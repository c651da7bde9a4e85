#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "clifs/labels.hpp"

namespace clifs::lexical {

// Dictionary of lowercase words, multiword phrases and trailing-'*' stems.
class Lexicon {
public:
    Lexicon() = default;
    // UsageError on an empty entry list or a '*' anywhere but the end.
    Lexicon(std::string name, const std::vector<std::string>& entries);

    // One entry per line; '#' starts a comment; blank lines ignored.
    static Lexicon from_stream(std::string name, std::istream& in);
    static Lexicon from_file(const std::string& path);  // name = file stem

    const std::string& name() const { return name_; }
    std::size_t size() const { return exact_.size() + stems_.size() + phrases_.size(); }

    bool matches_word(std::string_view lower_word) const;

    // Number of tokens covered by at least one match; multiword phrases
    // cover every word they span.
    std::size_t covered_words(const std::vector<std::string>& lower_words) const;

private:
    std::string name_;
    std::vector<std::string> exact_;  // sorted
    std::vector<std::string> stems_;
    std::vector<std::vector<std::string>> phrases_;
};

enum class Unit { word, sentence };

// word: covered words / total words. sentence: sentences with a match /
// total sentences. Empty text gives 0.
double rate(std::string_view text, const Lexicon& lexicon, Unit unit);

// ---- UAI ---------------------------------------------------------------

struct LexicalCounts {
    double affiliation_rate = 0.0;
    double cogproc_rate = 0.0;
};

struct UaiScores {
    double uai = 0.0;   // z(A) - z(C) against the batch
    double nuai = 0.0;  // A - C
    double affiliation = 0.0;
    double cogproc = 0.0;
};

LexicalCounts count(std::string_view text, const Lexicon& affiliation, const Lexicon& cogproc);

// Sample-independent part only (uai left at 0).
UaiScores naive_uai(const LexicalCounts& counts);

struct UaiBatchResult {
    std::vector<UaiScores> scores;
    bool affiliation_zero_variance = false;
    bool cogproc_zero_variance = false;
};

// z-scores use the population standard deviation. A zero-variance term
// contributes 0 for every document and raises the matching flag (and a
// warning on stderr). UsageError for fewer than 2 documents.
UaiBatchResult uai_batch(const std::vector<LexicalCounts>& sample);

// ---- VRI ---------------------------------------------------------------

enum class VriGroup { A, B, C };
enum class VriClass { low, medium, high, very_high };

std::string_view to_string(VriClass c);

inline constexpr std::size_t kVriA = 4, kVriB = 3, kVriC = 5;

struct VriCategoryScores {
    std::vector<double> a_scores;  // fusion first, then the other highly significant categories
    std::vector<double> b_scores;
    std::vector<double> c_scores;
    double identification = 0.0;

    double vri_fusion() const { return a_scores.empty() ? 0.0 : a_scores.front(); }
};

struct VriResult {
    double a_bar = 0.0, b_bar = 0.0, c_bar = 0.0;
    double vri = 0.0;
    VriClass vri_class = VriClass::low;
    RiskLabel mapped_risk = RiskLabel::moderate;
};

// vri < 10 low, 10..30 medium, (30, 70] high, > 70 very high.
VriClass classify_vri(double vri);
RiskLabel map_vri_class(VriClass c);

// UsageError unless the groups have 4/3/5 entries.
VriResult vri_aggregate(const VriCategoryScores& scores);

inline constexpr double kRatioEpsilon = 1e-6;
inline constexpr double kRatioCap = 1e6;

// numerator / denominator; a zero denominator divides by kRatioEpsilon.
// Result capped at kRatioCap.
double guarded_ratio(double numerator, double denominator);

struct VriCategory {
    std::string name;
    VriGroup group = VriGroup::A;
    Lexicon lexicon;
    Unit unit = Unit::sentence;
};

// Twelve categories (4 A with "fusion" first, 3 B, 5 C) plus the two
// identification lexicons.
class VriManifest {
public:
    VriManifest(std::vector<VriCategory> categories, Lexicon identification_group,
                Lexicon identification_identity);

    // JSON: {"categories":[{"name","group","lexicon","unit"?}...],
    //        "identification":{"group":path,"identity":path}}
    // Relative paths resolve against the manifest's directory.
    static VriManifest from_file(const std::string& path);

    const std::vector<VriCategory>& categories() const { return categories_; }
    VriCategoryScores score(std::string_view text) const;

    // Category names in RiskFeatureVector order: A (without fusion), B, C.
    std::vector<std::string> non_fusion_names() const;

private:
    std::vector<VriCategory> categories_;  // ordered A.., B.., C..
    Lexicon identification_group_;
    Lexicon identification_identity_;
};

}  // namespace clifs::lexical
