#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "clifs/labels.hpp"
#include "clifs/random.hpp"

namespace clifs::corpus {

enum class Provenance { human, rtt, genai, oversampled };

std::string_view to_string(Provenance p);
std::optional<Provenance> parse_provenance(std::string_view s);

struct Document {
    std::string id;
    std::string text;
    std::string target_category;
    std::optional<double> vifs_score;
    std::optional<FusionLabel> label;

    // Risk-corpus fields.
    std::optional<std::string> author;
    std::optional<RiskLabel> risk_label;

    // Augmentation lineage. source_id is set for rtt/oversampled records.
    Provenance provenance = Provenance::human;
    std::optional<std::string> source_id;

    bool operator==(const Document&) const = default;
};

// Throws UsageError when text is blank or vifs_score is outside [1, 7].
void validate(const Document& doc);

// ---- line-delimited records -------------------------------------------

// One JSON object per line. Optional fields are omitted, never null.
std::string to_json_line(const Document& doc);
Document from_json_line(std::string_view line);  // FormatError on bad input

std::vector<Document> read_documents(std::istream& in);
std::vector<Document> read_documents(const std::string& path);
void write_documents(std::ostream& out, const std::vector<Document>& docs);
void write_documents(const std::string& path, const std::vector<Document>& docs);

// Streaming reader for constant-memory passes over large corpora.
class DocumentReader {
public:
    explicit DocumentReader(std::istream& in) : in_(in) {}
    // Returns false at end of input. Blank lines are skipped.
    bool next(Document& out);
    std::size_t line_number() const { return line_; }

private:
    std::istream& in_;
    std::size_t line_ = 0;
};

// ---- discretization ---------------------------------------------------

struct DiscretizationBoundaries {
    double mean = 0.0;
    double sd = 0.0;  // population standard deviation
    double low_cut = 0.0;
    double high_cut = 0.0;

    // Strict inequalities: a score exactly on a cut is medium.
    FusionLabel classify(double score) const;
};

struct Discretization {
    DiscretizationBoundaries boundaries;
    std::vector<FusionLabel> labels;
};

Discretization discretize(const std::vector<double>& scores);

// ---- splitting --------------------------------------------------------

struct SplitSpec {
    double train = 0.7;
    double validation = 0.15;
    double test = 0.15;
    std::uint64_t seed = kDefaultSeed;
};

struct Split {
    std::vector<Document> train;
    std::vector<Document> validation;
    std::vector<Document> test;
};

// Indices are shuffled with the seed, then cut floor/floor/remainder.
Split split(const std::vector<Document>& dataset, const SplitSpec& spec);

// Index-level form of split(), shared with other record types.
struct SplitIndices {
    std::vector<std::size_t> train, validation, test;
};
SplitIndices split_indices(std::size_t n, const SplitSpec& spec);

// ---- sentence segmentation and chunking -------------------------------

class SentenceSegmenter {
public:
    virtual ~SentenceSegmenter() = default;
    virtual std::vector<std::string> segment(std::string_view text) const = 0;
};

// Terminal punctuation (. ! ?) followed by whitespace, with an abbreviation
// allowlist and single-initial guard. Blank lines are hard boundaries.
class RuleSentenceSegmenter : public SentenceSegmenter {
public:
    RuleSentenceSegmenter();
    explicit RuleSentenceSegmenter(std::vector<std::string> abbreviations);
    std::vector<std::string> segment(std::string_view text) const override;

private:
    std::vector<std::string> abbreviations_;  // lowercase, without the final dot
};

const SentenceSegmenter& default_segmenter();

struct Chunk {
    std::string source_id;
    std::string author;
    std::optional<RiskLabel> label;
    std::string text;
    std::size_t word_count = 0;
    std::vector<std::string> sentences;
};

inline constexpr std::size_t kDefaultChunkWords = 300;

// Greedy packing: sentences are appended while the chunk stays within
// target_words; an oversized sentence becomes a chunk of its own.
std::vector<Chunk> chunk_text(std::string_view text, std::size_t target_words = kDefaultChunkWords,
                              const SentenceSegmenter& segmenter = default_segmenter());

// chunk_text() plus source id, author and risk label copied from doc.
std::vector<Chunk> chunk_document(const Document& doc,
                                  std::size_t target_words = kDefaultChunkWords,
                                  const SentenceSegmenter& segmenter = default_segmenter());

// Per class, cycles through authors (in order of first appearance), taking
// each author's chunks in document order until per_class are selected.
// per_class == 0 means "size of the smallest class". Output is grouped by
// class in label order. Every chunk must carry a label.
std::vector<Chunk> balance_round_robin(const std::vector<Chunk>& chunks, std::size_t per_class = 0);

}  // namespace clifs::corpus
