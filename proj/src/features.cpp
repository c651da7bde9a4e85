#include "clifs/features.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "clifs/errors.hpp"
#include "json.hpp"

namespace clifs::features {

using nlohmann::json;

std::string_view to_string(FeatureGroup g) {
    switch (g) {
        case FeatureGroup::A_embeddings: return "A_embeddings";
        case FeatureGroup::B_class_probs: return "B_class_probs";
        case FeatureGroup::C_clifs: return "C_clifs";
        case FeatureGroup::D_uai: return "D_uai";
        case FeatureGroup::E_vri: return "E_vri";
    }
    return "?";
}

std::string_view short_name(FeatureGroup g) { return to_string(g).substr(0, 1); }

std::optional<FeatureGroup> parse_group(std::string_view s) {
    for (auto g : kAllGroups)
        if (s == to_string(g) || s == short_name(g)) return g;
    return std::nullopt;
}

// ---- layout ---------------------------------------------------------------

std::size_t Layout::begin(FeatureGroup g) const {
    const std::size_t d = embedding_dim;
    switch (g) {
        case FeatureGroup::A_embeddings: return 0;
        case FeatureGroup::B_class_probs: return d;
        case FeatureGroup::C_clifs: return d + 3;
        case FeatureGroup::D_uai: return d + 7;
        case FeatureGroup::E_vri: return d + 10;
    }
    return 0;
}

std::size_t Layout::end(FeatureGroup g) const {
    switch (g) {
        case FeatureGroup::A_embeddings: return begin(FeatureGroup::B_class_probs);
        case FeatureGroup::B_class_probs: return begin(FeatureGroup::C_clifs);
        case FeatureGroup::C_clifs: return begin(FeatureGroup::D_uai);
        case FeatureGroup::D_uai: return begin(FeatureGroup::E_vri);
        case FeatureGroup::E_vri: return size();
    }
    return 0;
}

std::vector<FeatureGroup> Layout::tags() const {
    std::vector<FeatureGroup> t(size());
    for (auto g : kAllGroups)
        for (std::size_t i = begin(g); i < end(g); ++i) t[i] = g;
    return t;
}

std::vector<std::string> Layout::column_names() const {
    std::vector<std::string> n;
    n.reserve(size());
    for (std::size_t i = 0; i < embedding_dim; ++i) n.push_back("emb_" + std::to_string(i));
    for (const char* s : {"p_low", "p_medium", "p_high", "fusion_proximity", "fictive_kinship", "s_i_to_t",
                          "s_t_to_i", "affiliation", "cogproc", "nuai", "vri_fusion", "identification"})
        n.emplace_back(s);
    return n;
}

// ---- assembly -------------------------------------------------------------

FeatureVector assemble(std::string_view text, const mlm::FusionMetrics& metrics, const lexical::UaiScores& uai,
                       double vri_fusion, double identification, const SentenceEncoderRuntime* encoder,
                       const EncoderClassifierRuntime* classifier, const AssembleOptions& options) {
    const Layout layout{options.embedding_dim};
    FeatureVector v;
    v.values.assign(layout.size(), 0.0);
    v.group_tags = layout.tags();

    if (encoder) {
        if (encoder->dimension() != layout.embedding_dim)
            throw ConfigError("sentence encoder dimension " + std::to_string(encoder->dimension()) +
                              " does not match layout dimension " + std::to_string(layout.embedding_dim));
        std::vector<double> e;
        try {
            e = encoder->encode(text);
        } catch (const Error&) {
            throw;
        } catch (const std::exception& ex) {
            throw InferenceError(std::string("sentence encoder failed: ") + ex.what());
        }
        if (e.size() != layout.embedding_dim)
            throw ConfigError("sentence encoder returned " + std::to_string(e.size()) + " components, expected " +
                              std::to_string(layout.embedding_dim));
        std::copy(e.begin(), e.end(), v.values.begin());
    } else if (options.degraded) {
        v.zero_filled.insert(FeatureGroup::A_embeddings);
    } else {
        throw ConfigError("no sentence encoder configured (enable degraded mode to zero-fill)");
    }

    const auto b = layout.begin(FeatureGroup::B_class_probs);
    if (classifier) {
        std::array<double, 3> p{};
        try {
            p = classifier->probabilities(text);
        } catch (const Error&) {
            throw;
        } catch (const std::exception& ex) {
            throw InferenceError(std::string("encoder classifier failed: ") + ex.what());
        }
        double sum = 0.0;
        for (double x : p) {
            if (!(x >= 0.0) || !std::isfinite(x)) throw InferenceError("encoder classifier returned a bad probability");
            sum += x;
        }
        if (std::abs(sum - 1.0) > 1e-4) throw InferenceError("encoder classifier probabilities do not sum to 1");
        for (std::size_t i = 0; i < 3; ++i) v.values[b + i] = p[i];
    } else if (options.degraded) {
        v.zero_filled.insert(FeatureGroup::B_class_probs);
    } else {
        throw ConfigError("no encoder classifier configured (enable degraded mode to zero-fill)");
    }

    const auto c = layout.begin(FeatureGroup::C_clifs);
    v.values[c + 0] = metrics.fusion_proximity;
    v.values[c + 1] = metrics.fictive_kinship;
    v.values[c + 2] = metrics.s_i_to_t;
    v.values[c + 3] = metrics.s_t_to_i;

    const auto d = layout.begin(FeatureGroup::D_uai);
    v.values[d + 0] = uai.affiliation;
    v.values[d + 1] = uai.cogproc;
    v.values[d + 2] = uai.nuai;

    const auto e = layout.begin(FeatureGroup::E_vri);
    v.values[e + 0] = vri_fusion;
    v.values[e + 1] = identification;
    return v;
}

std::vector<std::size_t> kept_columns(const std::vector<FeatureGroup>& tags, const std::set<FeatureGroup>& drop) {
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < tags.size(); ++i)
        if (!drop.contains(tags[i])) keep.push_back(i);
    return keep;
}

FeatureVector mask_groups(const FeatureVector& v, const std::set<FeatureGroup>& drop) {
    FeatureVector out;
    for (auto i : kept_columns(v.group_tags, drop)) {
        out.values.push_back(v.values[i]);
        out.group_tags.push_back(v.group_tags[i]);
    }
    for (auto g : v.zero_filled)
        if (!drop.contains(g)) out.zero_filled.insert(g);
    return out;
}

// ---- files ----------------------------------------------------------------

namespace {

json groups_json(const std::vector<FeatureGroup>& tags) {
    json groups = json::array();
    std::size_t i = 0;
    while (i < tags.size()) {
        std::size_t j = i;
        while (j < tags.size() && tags[j] == tags[i]) ++j;
        groups.push_back({{"name", to_string(tags[i])}, {"begin", i}, {"end", j}});
        i = j;
    }
    return groups;
}

FeatureGroup group_or_throw(const std::string& s) {
    auto g = parse_group(s);
    if (!g) throw FormatError("unknown feature group '" + s + "'");
    return *g;
}

}  // namespace

std::string header_line(const FeatureFileHeader& h) {
    json j{{"format", "clifs-features"},
           {"layout_version", h.layout_version},
           {"embedding_dim", h.embedding_dim},
           {"columns", h.group_tags.size()},
           {"groups", groups_json(h.group_tags)}};
    return j.dump();
}

std::string record_line(const FeatureRecord& r) {
    json j{{"id", r.id}, {"values", r.vector.values}};
    if (r.label) j["label"] = to_string(*r.label);
    if (r.vifs_score) j["vifs_score"] = *r.vifs_score;
    if (r.risk_label) j["risk_label"] = to_string(*r.risk_label);
    j["provenance"] = r.provenance;
    if (r.source_id) j["source_id"] = *r.source_id;
    if (!r.vector.zero_filled.empty()) {
        json z = json::array();
        for (auto g : r.vector.zero_filled) z.push_back(short_name(g));
        j["zero_filled"] = z;
    }
    return j.dump();
}

FeatureWriter::FeatureWriter(std::ostream& out, const FeatureFileHeader& header)
    : out_(out), columns_(header.group_tags.size()) {
    out_ << header_line(header) << '\n';
}

void FeatureWriter::write(const FeatureRecord& record) {
    if (record.vector.values.size() != columns_)
        throw UsageError("feature record '" + record.id + "' has " + std::to_string(record.vector.values.size()) +
                         " values, header declares " + std::to_string(columns_));
    out_ << record_line(record) << '\n';
    out_.flush();
}

FeatureFile read_feature_file(std::istream& in) {
    FeatureFile f;
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto where = "feature file line " + std::to_string(line_no) + ": ";
        try {
            const auto j = json::parse(line);
            if (!have_header) {
                if (j.value("format", "") != "clifs-features") throw FormatError(where + "missing clifs-features header");
                f.header.layout_version = j.at("layout_version").get<int>();
                if (f.header.layout_version != kLayoutVersion)
                    throw FormatError(where + "unsupported layout version " + std::to_string(f.header.layout_version));
                f.header.embedding_dim = j.at("embedding_dim").get<std::size_t>();
                const auto columns = j.at("columns").get<std::size_t>();
                f.header.group_tags.assign(columns, FeatureGroup::A_embeddings);
                std::size_t covered = 0;
                for (const auto& g : j.at("groups")) {
                    const auto grp = group_or_throw(g.at("name").get<std::string>());
                    const auto b = g.at("begin").get<std::size_t>(), e = g.at("end").get<std::size_t>();
                    if (b > e || e > columns) throw FormatError(where + "group range out of bounds");
                    for (auto i = b; i < e; ++i) f.header.group_tags[i] = grp;
                    covered += e - b;
                }
                if (covered != columns) throw FormatError(where + "groups do not cover every column");
                have_header = true;
                continue;
            }
            FeatureRecord r;
            r.id = j.at("id").get<std::string>();
            r.vector.values = j.at("values").get<std::vector<double>>();
            if (r.vector.values.size() != f.header.group_tags.size())
                throw FormatError(where + "record has " + std::to_string(r.vector.values.size()) +
                                  " values, header declares " + std::to_string(f.header.group_tags.size()));
            r.vector.group_tags = f.header.group_tags;
            if (j.contains("label")) {
                auto l = parse_fusion_label(j["label"].get<std::string>());
                if (!l) throw FormatError(where + "bad label");
                r.label = *l;
            }
            if (j.contains("vifs_score")) r.vifs_score = j["vifs_score"].get<double>();
            if (j.contains("risk_label")) {
                auto l = parse_risk_label(j["risk_label"].get<std::string>());
                if (!l) throw FormatError(where + "bad risk_label");
                r.risk_label = *l;
            }
            r.provenance = j.value("provenance", std::string("human"));
            if (j.contains("source_id")) r.source_id = j["source_id"].get<std::string>();
            if (j.contains("zero_filled"))
                for (const auto& g : j["zero_filled"]) r.vector.zero_filled.insert(group_or_throw(g.get<std::string>()));
            f.records.push_back(std::move(r));
        } catch (const json::exception& e) {
            throw FormatError(where + e.what());
        }
    }
    if (!have_header) throw FormatError("feature file has no header");
    return f;
}

FeatureFile read_feature_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open feature file '" + path + "'");
    return read_feature_file(in);
}

void write_feature_file(const std::string& path, const FeatureFile& file) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write feature file '" + path + "'");
    FeatureWriter w(out, file.header);
    for (const auto& r : file.records) w.write(r);
}

}  // namespace clifs::features
