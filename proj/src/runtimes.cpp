#include "clifs/runtimes.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "clifs/errors.hpp"
#include "clifs/text.hpp"

namespace clifs::runtimes {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::size_t count_masks(const std::vector<std::string>& pieces) {
    std::size_t n = 0;
    for (const auto& p : pieces) n += p == mlm::kMaskToken;
    return n;
}

std::string resolve(const std::string& base_dir, const std::string& p) {
    fs::path fp(p);
    if (fp.is_absolute() || base_dir.empty()) return fp.string();
    return (fs::path(base_dir) / fp).string();
}

}  // namespace

// ---- masked LM ----------------------------------------------------------

std::vector<std::vector<double>> UniformMaskedLm::predict(const std::vector<std::string>& pieces) const {
    const auto v = tokenizer_.size();
    return std::vector<std::vector<double>>(count_masks(pieces), std::vector<double>(v, 1.0 / static_cast<double>(v)));
}

TableMaskedLm::TableMaskedLm(mlm::Tokenizer tokenizer, std::vector<std::vector<double>> tables)
    : tokenizer_(std::move(tokenizer)), tables_(std::move(tables)) {
    if (tables_.empty()) throw UsageError("TableMaskedLm needs at least one table");
    for (const auto& t : tables_)
        if (t.size() != tokenizer_.size()) throw UsageError("TableMaskedLm table size differs from the vocabulary");
}

std::vector<std::vector<double>> TableMaskedLm::predict(const std::vector<std::string>& pieces) const {
    std::vector<std::vector<double>> out;
    const auto n = count_masks(pieces);
    for (std::size_t i = 0; i < n; ++i) out.push_back(tables_[i % tables_.size()]);
    return out;
}

ContextBagMaskedLm::ContextBagMaskedLm(mlm::Tokenizer tokenizer, std::size_t radius, double gain)
    : tokenizer_(std::move(tokenizer)), radius_(radius), gain_(gain) {
    if (tokenizer_.size() == 0) throw UsageError("ContextBagMaskedLm needs a non-empty vocabulary");
}

std::vector<std::vector<double>> ContextBagMaskedLm::predict(const std::vector<std::string>& pieces) const {
    const auto v = tokenizer_.size();
    std::vector<std::optional<std::size_t>> ids(pieces.size());
    for (std::size_t i = 0; i < pieces.size(); ++i)
        if (pieces[i] != mlm::kMaskToken) ids[i] = tokenizer_.single_token_id(pieces[i]);

    std::vector<std::vector<double>> out;
    for (std::size_t m = 0; m < pieces.size(); ++m) {
        if (pieces[m] != mlm::kMaskToken) continue;
        std::map<std::size_t, double> counts;
        const auto lo = m > radius_ ? m - radius_ : 0;
        const auto hi = std::min(pieces.size(), m + radius_ + 1);
        for (auto i = lo; i < hi; ++i)
            if (i != m && ids[i]) counts[*ids[i]] += 1.0;
        double max_logit = 0.0;
        for (const auto& [id, c] : counts) max_logit = std::max(max_logit, gain_ * c);
        const double base = std::exp(-max_logit);
        double z = base * static_cast<double>(v - counts.size());
        for (const auto& [id, c] : counts) z += std::exp(gain_ * c - max_logit);
        std::vector<double> dist(v, base / z);
        for (const auto& [id, c] : counts) dist[id] = std::exp(gain_ * c - max_logit) / z;
        out.push_back(std::move(dist));
    }
    return out;
}

// ---- encoder and classifier ---------------------------------------------

HashingSentenceEncoder::HashingSentenceEncoder(std::size_t dimension) : dim_(dimension) {
    if (dim_ == 0) throw UsageError("encoder dimension must be positive");
}

std::vector<double> HashingSentenceEncoder::encode(std::string_view s) const {
    std::vector<double> v(dim_, 0.0);
    for (const auto& t : text::words(s, text::Apostrophes::keep)) {
        std::uint64_t h = 1469598103934665603ULL;
        for (unsigned char c : t.lower) {
            h ^= c;
            h *= 1099511628211ULL;
        }
        v[h % dim_] += (h >> 63) ? -1.0 : 1.0;
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    if (norm > 0.0) {
        norm = std::sqrt(norm);
        for (double& x : v) x /= norm;
    }
    return v;
}

FixedClassifier::FixedClassifier(std::array<double, 3> probabilities) : probabilities_(probabilities) {
    double s = 0.0;
    for (double p : probabilities_) {
        if (!(p >= 0.0)) throw UsageError("classifier probabilities must be non-negative");
        s += p;
    }
    if (std::abs(s - 1.0) > 1e-4) throw UsageError("classifier probabilities must sum to 1");
}

// ---- manifests ------------------------------------------------------------

std::string_view to_string(ModelRole r) {
    switch (r) {
        case ModelRole::masked_lm: return "masked_lm";
        case ModelRole::sentence_encoder: return "sentence_encoder";
        case ModelRole::ner: return "ner";
        case ModelRole::encoder_classifier: return "encoder_classifier";
    }
    return "masked_lm";
}

std::optional<ModelRole> parse_model_role(std::string_view s) {
    for (auto r : {ModelRole::masked_lm, ModelRole::sentence_encoder, ModelRole::ner, ModelRole::encoder_classifier})
        if (s == to_string(r)) return r;
    return std::nullopt;
}

ExportManifest ExportManifest::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open export manifest '" + path + "'");
    const auto base = fs::path(path).parent_path().string();
    ExportManifest m;
    try {
        json j;
        in >> j;
        auto role = parse_model_role(j.at("role").get<std::string>());
        if (!role) throw FormatError("export manifest '" + path + "': unknown role");
        m.role = *role;
        m.source_checkpoint = j.value("source_checkpoint", "");
        m.model_path = resolve(base, j.at("model_path").get<std::string>());
        if (j.contains("tokenizer_path")) m.tokenizer_path = resolve(base, j["tokenizer_path"].get<std::string>());
        m.vocab_size = j.value("vocab_size", std::size_t{0});
        m.hidden_size = j.value("hidden_size", std::size_t{0});
        m.max_sequence_length = j.value("max_sequence_length", std::size_t{0});
        if (j.contains("parity")) {
            const auto& p = j["parity"];
            if (p.contains("max_abs_deviation")) m.parity_max_abs_deviation = p["max_abs_deviation"].get<double>();
            if (p.contains("min_cosine")) m.parity_min_cosine = p["min_cosine"].get<double>();
        }
    } catch (const json::exception& e) {
        throw FormatError("export manifest '" + path + "': " + e.what());
    }
    if (!fs::exists(m.model_path))
        throw ConfigError("export manifest '" + path + "': model file '" + m.model_path + "' not found");
    if (!m.tokenizer_path.empty() && !fs::exists(m.tokenizer_path))
        throw ConfigError("export manifest '" + path + "': tokenizer '" + m.tokenizer_path + "' not found");
    if ((m.role == ModelRole::masked_lm || m.role == ModelRole::encoder_classifier) && m.tokenizer_path.empty())
        throw FormatError("export manifest '" + path + "': role needs a tokenizer_path");
    return m;
}

json ExportManifest::to_json() const {
    json j{{"role", to_string(role)},           {"source_checkpoint", source_checkpoint},
           {"model_path", model_path},          {"tokenizer_path", tokenizer_path},
           {"vocab_size", vocab_size},          {"hidden_size", hidden_size},
           {"max_sequence_length", max_sequence_length}};
    json parity = json::object();
    if (parity_max_abs_deviation) parity["max_abs_deviation"] = *parity_max_abs_deviation;
    if (parity_min_cosine) parity["min_cosine"] = *parity_min_cosine;
    if (!parity.empty()) j["parity"] = parity;
    return j;
}

bool interchange_backend_available() { return false; }

// ---- factory ------------------------------------------------------------

namespace {

std::string kind_of(const json& cfg, const char* section) {
    if (!cfg.is_object() || !cfg.contains("kind") || !cfg["kind"].is_string())
        throw ConfigError(std::string(section) + ": missing \"kind\"");
    return cfg["kind"].get<std::string>();
}

[[noreturn]] void exported_unavailable(const json& cfg, const std::string& base_dir, ModelRole role,
                                       const char* section) {
    if (!cfg.contains("manifest")) throw ConfigError(std::string(section) + ": exported runtime needs \"manifest\"");
    const auto path = resolve(base_dir, cfg["manifest"].get<std::string>());
    const auto m = ExportManifest::from_file(path);
    if (m.role != role)
        throw ConfigError(std::string(section) + ": manifest '" + path + "' has role '" +
                          std::string(to_string(m.role)) + "'");
    throw InferenceError(std::string(section) + ": manifest '" + path +
                         "' is valid but this build has no interchange-format inference backend");
}

template <typename T>
T get_or(const json& cfg, const char* key, T fallback, const char* section) {
    if (!cfg.contains(key)) return fallback;
    try {
        return cfg[key].get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string(section) + ": bad value for \"" + key + "\"");
    }
}

}  // namespace

std::unique_ptr<mlm::MaskedLmRuntime> make_masked_lm(const json& cfg, const std::string& base_dir) {
    const auto kind = kind_of(cfg, "masked_lm");
    if (kind == "exported") exported_unavailable(cfg, base_dir, ModelRole::masked_lm, "masked_lm");
    if (kind != "uniform" && kind != "context_bag") throw ConfigError("masked_lm: unknown kind '" + kind + "'");
    if (!cfg.contains("vocab")) throw ConfigError("masked_lm: \"vocab\" path required");
    auto tok = mlm::Tokenizer::from_file(resolve(base_dir, cfg["vocab"].get<std::string>()));
    if (kind == "uniform") return std::make_unique<UniformMaskedLm>(std::move(tok));
    return std::make_unique<ContextBagMaskedLm>(std::move(tok), get_or<std::size_t>(cfg, "radius", 8, "masked_lm"),
                                                get_or<double>(cfg, "gain", 2.0, "masked_lm"));
}

std::unique_ptr<features::SentenceEncoderRuntime> make_encoder(const json& cfg, const std::string& base_dir) {
    const auto kind = kind_of(cfg, "encoder");
    if (kind == "exported") exported_unavailable(cfg, base_dir, ModelRole::sentence_encoder, "encoder");
    if (kind != "hashing") throw ConfigError("encoder: unknown kind '" + kind + "'");
    return std::make_unique<HashingSentenceEncoder>(
        get_or<std::size_t>(cfg, "dim", features::kDefaultEmbeddingDim, "encoder"));
}

std::unique_ptr<features::EncoderClassifierRuntime> make_classifier(const json& cfg, const std::string& base_dir) {
    const auto kind = kind_of(cfg, "classifier");
    if (kind == "exported") exported_unavailable(cfg, base_dir, ModelRole::encoder_classifier, "classifier");
    if (kind != "fixed") throw ConfigError("classifier: unknown kind '" + kind + "'");
    auto p = get_or<std::array<double, 3>>(cfg, "probabilities", {1.0 / 3, 1.0 / 3, 1.0 / 3}, "classifier");
    try {
        return std::make_unique<FixedClassifier>(p);
    } catch (const UsageError& e) {
        throw ConfigError(std::string("classifier: ") + e.what());
    }
}

std::unique_ptr<vocab::NerRuntime> make_ner(const json& cfg, const std::string& base_dir) {
    const auto kind = kind_of(cfg, "ner");
    if (kind == "exported") exported_unavailable(cfg, base_dir, ModelRole::ner, "ner");
    if (kind != "gazetteer") throw ConfigError("ner: unknown kind '" + kind + "'");
    if (!cfg.contains("path")) throw ConfigError("ner: \"path\" required");
    return std::make_unique<vocab::GazetteerNer>(vocab::GazetteerNer::from_file(resolve(base_dir, cfg["path"].get<std::string>())));
}

}  // namespace clifs::runtimes
