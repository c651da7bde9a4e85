#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "clifs/features.hpp"
#include "clifs/mlm.hpp"
#include "clifs/vocab.hpp"
#include "json.hpp"

// Built-in runtimes. The deterministic ones stand in for exported neural
// models in tests and offline runs; the manifest loader is the entry point
// for artifacts produced by the model-export tooling.
namespace clifs::runtimes {

// ---- masked LM ----------------------------------------------------------

class UniformMaskedLm : public mlm::MaskedLmRuntime {
public:
    explicit UniformMaskedLm(mlm::Tokenizer tokenizer) : tokenizer_(std::move(tokenizer)) {}
    const mlm::Tokenizer& tokenizer() const override { return tokenizer_; }
    std::vector<std::vector<double>> predict(const std::vector<std::string>& pieces) const override;

private:
    mlm::Tokenizer tokenizer_;
};

// The i-th mask of a call receives tables[i % tables.size()]. Each table is
// a full distribution over the tokenizer vocabulary.
class TableMaskedLm : public mlm::MaskedLmRuntime {
public:
    TableMaskedLm(mlm::Tokenizer tokenizer, std::vector<std::vector<double>> tables);
    const mlm::Tokenizer& tokenizer() const override { return tokenizer_; }
    std::vector<std::vector<double>> predict(const std::vector<std::string>& pieces) const override;

private:
    mlm::Tokenizer tokenizer_;
    std::vector<std::vector<double>> tables_;
};

// Softmax over gain * (number of occurrences of each vocabulary word within
// `radius` pieces of the mask). Words that co-occur with a slot become its
// likely fillers, which is the behaviour the fusion metrics probe.
class ContextBagMaskedLm : public mlm::MaskedLmRuntime {
public:
    ContextBagMaskedLm(mlm::Tokenizer tokenizer, std::size_t radius = 8, double gain = 2.0);
    const mlm::Tokenizer& tokenizer() const override { return tokenizer_; }
    std::vector<std::vector<double>> predict(const std::vector<std::string>& pieces) const override;

private:
    mlm::Tokenizer tokenizer_;
    std::size_t radius_;
    double gain_;
};

// ---- sentence encoder and classifier ------------------------------------

// Signed feature hashing of lowercase words, L2-normalized.
class HashingSentenceEncoder : public features::SentenceEncoderRuntime {
public:
    explicit HashingSentenceEncoder(std::size_t dimension = features::kDefaultEmbeddingDim);
    std::size_t dimension() const override { return dim_; }
    std::vector<double> encode(std::string_view text) const override;

private:
    std::size_t dim_;
};

class FixedClassifier : public features::EncoderClassifierRuntime {
public:
    explicit FixedClassifier(std::array<double, 3> probabilities = {1.0 / 3, 1.0 / 3, 1.0 / 3});
    std::array<double, 3> probabilities(std::string_view) const override { return probabilities_; }

private:
    std::array<double, 3> probabilities_;
};

// ---- exported artifacts -------------------------------------------------

enum class ModelRole { masked_lm, sentence_encoder, ner, encoder_classifier };

std::string_view to_string(ModelRole r);
std::optional<ModelRole> parse_model_role(std::string_view s);

struct ExportManifest {
    ModelRole role = ModelRole::masked_lm;
    std::string source_checkpoint;
    std::string model_path;      // interchange-format file
    std::string tokenizer_path;  // vocab.txt or tokenizer.json
    std::size_t vocab_size = 0;
    std::size_t hidden_size = 0;
    std::size_t max_sequence_length = 0;
    std::optional<double> parity_max_abs_deviation;
    std::optional<double> parity_min_cosine;

    // Relative paths resolve against the manifest's directory. FormatError
    // on a malformed file, ConfigError when a referenced file is missing.
    static ExportManifest from_file(const std::string& path);
    nlohmann::json to_json() const;
};

// True when the build links an interchange-format inference engine.
bool interchange_backend_available();

// ---- factory ------------------------------------------------------------
// Runtime sections of the run configuration:
//   masked_lm:  {"kind":"uniform"|"context_bag", "vocab": path, "radius", "gain"}
//               {"kind":"exported", "manifest": path}
//   encoder:    {"kind":"hashing", "dim": n} | {"kind":"exported", ...}
//   classifier: {"kind":"fixed", "probabilities":[..3]} | {"kind":"exported", ...}
//   ner:        {"kind":"gazetteer", "path": p} | {"kind":"exported", ...}
// Relative paths resolve against base_dir. Exported artifacts without a
// linked backend raise InferenceError naming the manifest.

std::unique_ptr<mlm::MaskedLmRuntime> make_masked_lm(const nlohmann::json& cfg, const std::string& base_dir);
std::unique_ptr<features::SentenceEncoderRuntime> make_encoder(const nlohmann::json& cfg,
                                                               const std::string& base_dir);
std::unique_ptr<features::EncoderClassifierRuntime> make_classifier(const nlohmann::json& cfg,
                                                                    const std::string& base_dir);
std::unique_ptr<vocab::NerRuntime> make_ner(const nlohmann::json& cfg, const std::string& base_dir);

}  // namespace clifs::runtimes
