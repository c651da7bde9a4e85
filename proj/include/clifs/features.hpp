#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "clifs/lexical.hpp"
#include "clifs/mlm.hpp"

namespace clifs::features {

inline constexpr int kLayoutVersion = 1;
inline constexpr std::size_t kDefaultEmbeddingDim = 768;
inline constexpr std::size_t kNonEmbeddingColumns = 12;

enum class FeatureGroup { A_embeddings, B_class_probs, C_clifs, D_uai, E_vri };

inline constexpr std::array<FeatureGroup, 5> kAllGroups{
    FeatureGroup::A_embeddings, FeatureGroup::B_class_probs, FeatureGroup::C_clifs,
    FeatureGroup::D_uai, FeatureGroup::E_vri};

std::string_view to_string(FeatureGroup g);
std::string_view short_name(FeatureGroup g);  // "A".."E"
// Accepts the full name or the single letter.
std::optional<FeatureGroup> parse_group(std::string_view s);

class SentenceEncoderRuntime {
public:
    virtual ~SentenceEncoderRuntime() = default;
    virtual std::size_t dimension() const = 0;
    virtual std::vector<double> encode(std::string_view text) const = 0;
};

// Probabilities for low, medium, high.
class EncoderClassifierRuntime {
public:
    virtual ~EncoderClassifierRuntime() = default;
    virtual std::array<double, 3> probabilities(std::string_view text) const = 0;
};

// [embedding 0..D-1][class probs][f, K_f, S(I->T), S(T->I)]
// [affiliation, cogproc, nUAI][vri_fusion, identification]
struct Layout {
    std::size_t embedding_dim = kDefaultEmbeddingDim;

    std::size_t size() const { return embedding_dim + kNonEmbeddingColumns; }
    std::size_t begin(FeatureGroup g) const;
    std::size_t end(FeatureGroup g) const;
    std::vector<FeatureGroup> tags() const;
    std::vector<std::string> column_names() const;
};

struct FeatureVector {
    std::vector<double> values;
    std::vector<FeatureGroup> group_tags;  // one per value
    std::set<FeatureGroup> zero_filled;    // blocks filled with zeros in degraded mode

    bool operator==(const FeatureVector&) const = default;
};

struct AssembleOptions {
    // Allows a missing encoder or classifier; the block is zero-filled and
    // recorded. Without it a missing runtime is a ConfigError.
    bool degraded = false;
    std::size_t embedding_dim = kDefaultEmbeddingDim;
};

FeatureVector assemble(std::string_view text, const mlm::FusionMetrics& metrics,
                       const lexical::UaiScores& uai, double vri_fusion, double identification,
                       const SentenceEncoderRuntime* encoder,
                       const EncoderClassifierRuntime* classifier, const AssembleOptions& options = {});

// Removes (not zeroes) the columns of the dropped groups.
FeatureVector mask_groups(const FeatureVector& v, const std::set<FeatureGroup>& drop);

// Column indices kept by mask_groups for a given tag layout.
std::vector<std::size_t> kept_columns(const std::vector<FeatureGroup>& tags,
                                      const std::set<FeatureGroup>& drop);

// ---- feature files ------------------------------------------------------
// First line: JSON header {"format":"clifs-features","layout_version",
// "embedding_dim","columns","groups":[{"name","begin","end"}...]}.
// Then one JSON record per line: {"id","values",...} with optional label,
// vifs_score, risk_label, provenance, source_id and zero_filled.

struct FeatureRecord {
    std::string id;
    FeatureVector vector;
    std::optional<FusionLabel> label;
    std::optional<double> vifs_score;
    std::optional<RiskLabel> risk_label;
    std::string provenance = "human";
    std::optional<std::string> source_id;

    bool operator==(const FeatureRecord&) const = default;
};

struct FeatureFileHeader {
    int layout_version = kLayoutVersion;
    std::size_t embedding_dim = kDefaultEmbeddingDim;
    std::vector<FeatureGroup> group_tags;  // may be a masked layout
};

std::string header_line(const FeatureFileHeader& header);
std::string record_line(const FeatureRecord& record);

class FeatureWriter {
public:
    FeatureWriter(std::ostream& out, const FeatureFileHeader& header);
    void write(const FeatureRecord& record);

private:
    std::ostream& out_;
    std::size_t columns_;
};

struct FeatureFile {
    FeatureFileHeader header;
    std::vector<FeatureRecord> records;
};

FeatureFile read_feature_file(std::istream& in);
FeatureFile read_feature_file(const std::string& path);
void write_feature_file(const std::string& path, const FeatureFile& file);

}  // namespace clifs::features
