#include "run_config.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "clifs/errors.hpp"
#include "clifs/runtimes.hpp"

#ifndef CLIFS_VERSION
#define CLIFS_VERSION "unknown"
#endif

namespace clifs::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::set<std::string> kTopLevelKeys{
    "seed",     "alpha",           "max_sequence_tokens", "embedding_dim", "degraded", "runtimes",
    "vocabulary", "lexicons",      "features",            "grid",          "hyperparameters",
    "folds",    "weighted",        "bootstrap",           "augment",       "risk",     "split"};

template <typename T>
T value_or(const json& j, const std::string& key, T fallback, const std::string& where) {
    if (!j.is_object() || !j.contains(key) || j.at(key).is_null()) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config: " + where + key + " has the wrong type");
    }
}

json* walk(json& root, const std::string& dotted, bool create) {
    json* node = &root;
    std::size_t pos = 0;
    while (true) {
        const auto dot = dotted.find('.', pos);
        const std::string key = dotted.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
        if (key.empty()) throw UsageError("config: bad key '" + dotted + "'");
        if (!node->is_object()) {
            if (!create) return nullptr;
            *node = json::object();
        }
        if (!node->contains(key) && !create) return nullptr;
        node = &(*node)[key];
        if (dot == std::string::npos) return node;
        pos = dot + 1;
    }
}

std::string fnv1a64_hex(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::set<FusionLabel> labels_from(const json& j, const std::string& key, std::set<FusionLabel> fallback) {
    if (!j.contains(key)) return fallback;
    std::set<FusionLabel> out;
    for (const auto& v : j.at(key)) {
        auto l = v.is_string() ? parse_fusion_label(v.get<std::string>()) : std::nullopt;
        if (!l) throw ConfigError("config: augment." + key + " holds an unknown label " + v.dump());
        out.insert(*l);
    }
    return out;
}

}  // namespace

RunConfig RunConfig::load(const std::optional<std::string>& path) {
    RunConfig c;
    if (!path) return c;
    std::ifstream in(*path);
    if (!in) throw ConfigError("config: cannot open " + *path);
    try {
        c.doc_ = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config: " + *path + ": " + e.what());
    }
    if (!c.doc_.is_object()) throw ConfigError("config: " + *path + " is not a JSON object");
    const auto parent = fs::path(*path).parent_path();
    c.base_dir_ = parent.empty() ? "." : parent.string();
    return c;
}

void RunConfig::apply_override(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--set expects key=value, got '" + assignment + "'");
    const auto raw = assignment.substr(eq + 1);
    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;
    set(assignment.substr(0, eq), std::move(value));
}

void RunConfig::set(const std::string& dotted_key, json value) { *walk(doc_, dotted_key, true) = std::move(value); }

std::string RunConfig::resolve(const std::string& path) const {
    if (path.empty() || fs::path(path).is_absolute()) return path;
    return (fs::path(base_dir_) / path).lexically_normal().string();
}

void RunConfig::validate() const {
    for (const auto& [key, _] : doc_.items())
        if (!kTopLevelKeys.contains(key)) throw ConfigError("config: unknown key '" + key + "'");

    auto check = [&](const char* dotted) {
        json copy = doc_;
        const json* node = walk(copy, dotted, false);
        if (!node || node->is_null()) return;
        if (!node->is_string()) throw ConfigError(std::string("config: ") + dotted + " must be a path string");
        const auto p = resolve(node->get<std::string>());
        if (!fs::exists(p)) throw ConfigError(std::string("config: ") + dotted + " points to missing file " + p);
    };
    for (const char* k : {"runtimes.masked_lm.vocab", "runtimes.masked_lm.manifest", "runtimes.encoder.manifest",
                          "runtimes.classifier.manifest", "runtimes.ner.path", "runtimes.ner.manifest",
                          "vocabulary.seeds", "vocabulary.embeddings", "lexicons.affiliation", "lexicons.cogproc",
                          "lexicons.vri_manifest", "augment.translation.path", "augment.generation.path"})
        check(k);

    const double a = alpha();
    if (!(a > 0.0 && a <= 1.0)) throw ConfigError("config: alpha must lie in (0, 1]");
    (void)seed();
    if (doc_.contains("features")) (void)dropped_groups();
    if (doc_.contains("grid")) grid().validate();
    if (doc_.contains("hyperparameters")) (void)fixed_hyperparameters();
    if (fit_options().folds < 2) throw ConfigError("config: folds must be at least 2");
}

std::uint64_t RunConfig::seed() const {
    if (!doc_.contains("seed")) return kDefaultSeed;
    const auto& s = doc_.at("seed");
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0))
        throw ConfigError("config: seed must be a non-negative integer");
    return s.get<std::uint64_t>();
}

double RunConfig::alpha() const { return value_or(doc_, "alpha", 0.5, ""); }

std::string RunConfig::hash() const { return fnv1a64_hex(doc_.dump()); }

json RunConfig::provenance() const {
    return {{"config_hash", hash()},
            {"seed", seed()},
            {"alpha", alpha()},
            {"layout_version", features::kLayoutVersion},
            {"version", CLIFS_VERSION}};
}

const json* RunConfig::section(const char* key) const {
    if (!doc_.contains(key) || doc_.at(key).is_null()) return nullptr;
    const auto& s = doc_.at(key);
    if (!s.is_object()) throw ConfigError(std::string("config: ") + key + " must be an object");
    return &s;
}

models::HyperparameterGrid RunConfig::grid() const {
    const auto* g = section("grid");
    if (!g) return models::HyperparameterGrid::defaults();
    try {
        return models::HyperparameterGrid::from_json(*g);
    } catch (const UsageError& e) {
        throw ConfigError(std::string("config: grid: ") + e.what());
    }
}

std::optional<models::Hyperparameters> RunConfig::fixed_hyperparameters() const {
    const auto* h = section("hyperparameters");
    if (!h) return std::nullopt;
    try {
        return models::hyperparameters_from_json(*h);
    } catch (const Error& e) {
        throw ConfigError(std::string("config: hyperparameters: ") + e.what());
    }
}

models::FitOptions RunConfig::fit_options() const {
    models::FitOptions o;
    o.folds = value_or(doc_, "folds", 4, "");
    o.seed = seed();
    o.weighted = value_or(doc_, "weighted", true, "");
    return o;
}

std::set<features::FeatureGroup> RunConfig::dropped_groups() const {
    std::set<features::FeatureGroup> out;
    const auto* f = section("features");
    if (!f || !f->contains("drop")) return out;
    for (const auto& g : f->at("drop")) {
        auto parsed = g.is_string() ? features::parse_group(g.get<std::string>()) : std::nullopt;
        if (!parsed) throw ConfigError("config: features.drop holds unknown group " + g.dump());
        out.insert(*parsed);
    }
    return out;
}

bool RunConfig::bootstrap() const { return value_or(doc_, "bootstrap", true, ""); }

corpus::SplitSpec RunConfig::split_spec() const {
    corpus::SplitSpec s;
    if (const auto* j = section("split")) {
        s.train = value_or(*j, "train", s.train, "split.");
        s.validation = value_or(*j, "validation", s.validation, "split.");
        s.test = value_or(*j, "test", s.test, "split.");
    }
    s.seed = seed();
    return s;
}

// ---- runtimes -------------------------------------------------------------

pipeline::Lexicons load_lexicons(const RunConfig& config, bool need_vri) {
    const auto* l = config.section("lexicons");
    if (!l || !l->contains("affiliation") || !l->contains("cogproc"))
        throw ConfigError("config: lexicons.affiliation and lexicons.cogproc are required");
    pipeline::Lexicons out{lexical::Lexicon::from_file(config.resolve(l->at("affiliation").get<std::string>())),
                           lexical::Lexicon::from_file(config.resolve(l->at("cogproc").get<std::string>())),
                           std::nullopt};
    if (l->contains("vri_manifest"))
        out.vri = lexical::VriManifest::from_file(config.resolve(l->at("vri_manifest").get<std::string>()));
    else if (need_vri)
        throw ConfigError("config: lexicons.vri_manifest is required");
    return out;
}

FeatureStack build_feature_stack(const RunConfig& config) {
    FeatureStack s;
    const auto* r = config.section("runtimes");
    if (!r || !r->contains("masked_lm")) throw ConfigError("config: runtimes.masked_lm is required");
    const auto& base = config.base_dir();
    s.masked_lm = runtimes::make_masked_lm(r->at("masked_lm"), base);
    if (r->contains("ner")) s.ner = runtimes::make_ner(r->at("ner"), base);
    if (r->contains("encoder")) s.encoder = runtimes::make_encoder(r->at("encoder"), base);
    if (r->contains("classifier")) s.classifier = runtimes::make_classifier(r->at("classifier"), base);

    const bool degraded = value_or(config.doc(), "degraded", false, "");
    auto lexicons = load_lexicons(config, !degraded);

    auto seeds = vocab::SeedLists::defaults();
    std::optional<vocab::EmbeddingTable> table;
    double threshold = vocab::kDefaultExpansionThreshold;
    if (const auto* v = config.section("vocabulary")) {
        if (v->contains("seeds")) seeds = vocab::SeedLists::from_json_file(config.resolve(v->at("seeds").get<std::string>()));
        if (v->contains("embeddings")) table = vocab::load_embeddings(config.resolve(v->at("embeddings").get<std::string>()));
        threshold = value_or(*v, "threshold", threshold, "vocabulary.");
    }
    auto vocabularies = pipeline::build_vocabularies(seeds, table ? &*table : nullptr, threshold);

    mlm::ScorerConfig scorer;
    scorer.alpha = config.alpha();
    scorer.max_sequence_tokens = value_or<std::size_t>(config.doc(), "max_sequence_tokens", 512, "");

    features::AssembleOptions options;
    options.degraded = degraded;
    options.embedding_dim = value_or<std::size_t>(
        config.doc(), "embedding_dim", s.encoder ? s.encoder->dimension() : features::kDefaultEmbeddingDim, "");

    s.featurizer = std::make_unique<pipeline::Featurizer>(
        std::move(vocabularies), std::move(lexicons),
        pipeline::Featurizer::Runtimes{s.masked_lm.get(), s.ner.get(), s.encoder.get(), s.classifier.get()}, scorer,
        options);
    return s;
}

// ---- augmentation ---------------------------------------------------------

remote::EndpointConfig endpoint_from_json(const json& j) {
    static const std::set<std::string> keys{"base_url",      "path",        "model",     "api_key_env",
                                            "temperature",   "timeout_seconds", "max_attempts", "backoff_ms"};
    if (!j.is_object()) throw ConfigError("config: endpoint must be an object");
    for (const auto& [k, _] : j.items())
        if (!keys.contains(k)) throw ConfigError("config: unknown endpoint key '" + k + "'");
    remote::EndpointConfig e;
    e.base_url = value_or(j, "base_url", e.base_url, "endpoint.");
    e.path = value_or(j, "path", e.path, "endpoint.");
    e.model = value_or(j, "model", e.model, "endpoint.");
    e.api_key_env = value_or(j, "api_key_env", e.api_key_env, "endpoint.");
    e.temperature = value_or(j, "temperature", e.temperature, "endpoint.");
    e.timeout_seconds = value_or(j, "timeout_seconds", e.timeout_seconds, "endpoint.");
    e.retry.max_attempts = value_or(j, "max_attempts", e.retry.max_attempts, "endpoint.");
    e.retry.backoff_ms = value_or(j, "backoff_ms", e.retry.backoff_ms, "endpoint.");
    return e;
}

augmentation::AugmentConfig augment_config(const RunConfig& config) {
    augmentation::AugmentConfig c;
    c.seed = config.seed();
    const auto* a = config.section("augment");
    if (!a) return c;
    try {
        if (a->contains("pivots")) c.pivots = a->at("pivots").get<std::vector<std::string>>();
        c.rtt_classes = labels_from(*a, "rtt_classes", c.rtt_classes);
        c.oversample_classes = labels_from(*a, "oversample_classes", c.oversample_classes);
        c.oversample_fraction = value_or(*a, "oversample_fraction", c.oversample_fraction, "augment.");
        c.max_generation_attempts = value_or(*a, "max_generation_attempts", c.max_generation_attempts, "augment.");
        if (a->contains("genai_per_class")) {
            const auto& g = a->at("genai_per_class");
            if (g.is_array()) {
                c.genai_per_class = g.get<std::array<std::size_t, 3>>();
            } else {
                for (auto l : kFusionLabels)
                    c.genai_per_class[to_index(l)] = value_or<std::size_t>(g, std::string(to_string(l)), 0,
                                                                           "augment.genai_per_class.");
            }
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: augment: ") + e.what());
    }
    return c;
}

AugmentClients augment_clients(const RunConfig& config) {
    AugmentClients out;
    const auto* a = config.section("augment");
    auto backend_for = [&](const json& j, const char* what) -> const remote::ChatBackend& {
        const auto kind = value_or<std::string>(j, "kind", "", std::string("augment.") + what + ".");
        if (kind == "replay") {
            if (!j.contains("path")) throw ConfigError(std::string("config: augment.") + what + ".path is required");
            out.backends.push_back(remote::ReplayChatBackend::from_file(config.resolve(j.at("path").get<std::string>())));
        } else if (kind == "chat") {
            out.backends.push_back(
                std::make_unique<remote::HttpChatBackend>(endpoint_from_json(j.value("endpoint", json::object()))));
        } else {
            throw ConfigError(std::string("config: augment.") + what + ".kind must be replay or chat, got '" + kind +
                              "'");
        }
        return *out.backends.back();
    };

    const json translation = a && a->contains("translation") ? a->at("translation") : json{{"kind", "identity"}};
    if (value_or<std::string>(translation, "kind", "", "augment.translation.") == "identity")
        out.translation = std::make_unique<augmentation::IdentityTranslationClient>();
    else
        out.translation = std::make_unique<augmentation::ChatTranslationClient>(backend_for(translation, "translation"));

    if (a && a->contains("generation"))
        out.generation = std::make_unique<augmentation::ChatGenerationClient>(backend_for(a->at("generation"), "generation"));
    return out;
}

}  // namespace clifs::cli
