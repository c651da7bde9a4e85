#include "clifs/lexical.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <istream>

#include "clifs/corpus.hpp"
#include "clifs/errors.hpp"
#include "clifs/text.hpp"
#include "json.hpp"

namespace clifs::lexical {

namespace {

std::vector<std::string> lower_words(std::string_view s) {
    std::vector<std::string> out;
    for (auto& t : text::words(s, text::Apostrophes::keep)) out.push_back(std::move(t.lower));
    return out;
}

}  // namespace

Lexicon::Lexicon(std::string name, const std::vector<std::string>& entries) : name_(std::move(name)) {
    for (const auto& raw : entries) {
        auto e = text::to_lower(text::trim(raw));
        if (e.empty()) continue;
        auto star = e.find('*');
        if (star != std::string::npos && star + 1 != e.size())
            throw UsageError("lexicon '" + name_ + "': '*' only allowed at the end of an entry ('" + e + "')");
        if (star != std::string::npos) {
            auto stem = e.substr(0, star);
            if (stem.empty()) throw UsageError("lexicon '" + name_ + "': bare '*' entry");
            stems_.push_back(std::move(stem));
            continue;
        }
        auto ws = lower_words(e);
        if (ws.empty()) continue;
        if (ws.size() == 1) {
            exact_.push_back(std::move(ws.front()));
        } else {
            phrases_.push_back(std::move(ws));
        }
    }
    if (exact_.empty() && stems_.empty() && phrases_.empty())
        throw UsageError("lexicon '" + name_ + "' has no entries");
    std::sort(exact_.begin(), exact_.end());
    exact_.erase(std::unique(exact_.begin(), exact_.end()), exact_.end());
}

Lexicon Lexicon::from_stream(std::string name, std::istream& in) {
    std::vector<std::string> entries;
    std::string line;
    while (std::getline(in, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto t = text::trim(line);
        if (!t.empty()) entries.push_back(std::move(t));
    }
    return Lexicon(std::move(name), entries);
}

Lexicon Lexicon::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open lexicon '" + path + "'");
    return from_stream(std::filesystem::path(path).stem().string(), in);
}

bool Lexicon::matches_word(std::string_view w) const {
    if (std::binary_search(exact_.begin(), exact_.end(), w)) return true;
    for (const auto& s : stems_)
        if (w.starts_with(s)) return true;
    return false;
}

std::size_t Lexicon::covered_words(const std::vector<std::string>& ws) const {
    std::vector<bool> covered(ws.size(), false);
    for (std::size_t i = 0; i < ws.size(); ++i) {
        if (matches_word(ws[i])) covered[i] = true;
        for (const auto& p : phrases_) {
            if (i + p.size() > ws.size()) continue;
            bool match = true;
            for (std::size_t k = 0; k < p.size() && match; ++k) match = ws[i + k] == p[k];
            if (match)
                for (std::size_t k = 0; k < p.size(); ++k) covered[i + k] = true;
        }
    }
    return static_cast<std::size_t>(std::count(covered.begin(), covered.end(), true));
}

double rate(std::string_view s, const Lexicon& lexicon, Unit unit) {
    if (unit == Unit::word) {
        auto ws = lower_words(s);
        if (ws.empty()) return 0.0;
        return static_cast<double>(lexicon.covered_words(ws)) / static_cast<double>(ws.size());
    }
    auto sentences = corpus::default_segmenter().segment(s);
    std::size_t total = 0, hit = 0;
    for (const auto& sent : sentences) {
        auto ws = lower_words(sent);
        if (ws.empty()) continue;
        ++total;
        if (lexicon.covered_words(ws) > 0) ++hit;
    }
    return total == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(total);
}

// ---- UAI ---------------------------------------------------------------

LexicalCounts count(std::string_view s, const Lexicon& affiliation, const Lexicon& cogproc) {
    return {rate(s, affiliation, Unit::word), rate(s, cogproc, Unit::word)};
}

UaiScores naive_uai(const LexicalCounts& c) {
    UaiScores u;
    u.affiliation = c.affiliation_rate;
    u.cogproc = c.cogproc_rate;
    u.nuai = c.affiliation_rate - c.cogproc_rate;
    return u;
}

namespace {

// z-scores with population sd; empty result when the variance is zero.
std::vector<double> zscores(const std::vector<double>& v) {
    const double n = static_cast<double>(v.size());
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= n;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / n);
    // Rounding in the mean leaves a residue for identical values.
    if (!std::isfinite(sd) || sd <= 1e-12 * std::max(1.0, std::abs(mean))) return {};
    std::vector<double> z;
    z.reserve(v.size());
    for (double x : v) z.push_back((x - mean) / sd);
    return z;
}

}  // namespace

UaiBatchResult uai_batch(const std::vector<LexicalCounts>& sample) {
    if (sample.size() < 2) throw UsageError("uai_batch needs at least 2 documents");
    std::vector<double> a, c;
    for (const auto& s : sample) {
        a.push_back(s.affiliation_rate);
        c.push_back(s.cogproc_rate);
    }
    const auto za = zscores(a);
    const auto zc = zscores(c);

    UaiBatchResult r;
    r.affiliation_zero_variance = za.empty();
    r.cogproc_zero_variance = zc.empty();
    if (r.affiliation_zero_variance) std::cerr << "warning: affiliation rate has zero variance in batch\n";
    if (r.cogproc_zero_variance) std::cerr << "warning: cogproc rate has zero variance in batch\n";

    for (std::size_t i = 0; i < sample.size(); ++i) {
        auto u = naive_uai(sample[i]);
        u.uai = (za.empty() ? 0.0 : za[i]) - (zc.empty() ? 0.0 : zc[i]);
        r.scores.push_back(u);
    }
    return r;
}

// ---- VRI ---------------------------------------------------------------

std::string_view to_string(VriClass c) {
    switch (c) {
        case VriClass::low: return "low";
        case VriClass::medium: return "medium";
        case VriClass::high: return "high";
        case VriClass::very_high: return "very_high";
    }
    return "low";
}

VriClass classify_vri(double vri) {
    if (std::isnan(vri)) throw UsageError("classify_vri: NaN");
    if (vri < 10.0) return VriClass::low;
    if (vri <= 30.0) return VriClass::medium;
    if (vri <= 70.0) return VriClass::high;
    return VriClass::very_high;
}

RiskLabel map_vri_class(VriClass c) {
    switch (c) {
        case VriClass::low:
        case VriClass::medium: return RiskLabel::moderate;
        case VriClass::high: return RiskLabel::ideologically_extreme;
        case VriClass::very_high: return RiskLabel::violent_self_sacrificial;
    }
    return RiskLabel::moderate;
}

namespace {

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

}  // namespace

VriResult vri_aggregate(const VriCategoryScores& s) {
    if (s.a_scores.size() != kVriA || s.b_scores.size() != kVriB || s.c_scores.size() != kVriC)
        throw UsageError("vri_aggregate: expected 4/3/5 category scores");
    VriResult r;
    r.a_bar = mean_of(s.a_scores);
    r.b_bar = mean_of(s.b_scores);
    r.c_bar = mean_of(s.c_scores);
    r.vri = 100.0 * (0.54 * r.a_bar + 0.25 * r.b_bar + 0.21 * r.c_bar);
    r.vri_class = classify_vri(r.vri);
    r.mapped_risk = map_vri_class(r.vri_class);
    return r;
}

double guarded_ratio(double numerator, double denominator) {
    const double d = denominator == 0.0 ? kRatioEpsilon : denominator;
    return std::min(numerator / d, kRatioCap);
}

// ---- manifest ------------------------------------------------------------

VriManifest::VriManifest(std::vector<VriCategory> categories, Lexicon identification_group,
                         Lexicon identification_identity)
    : identification_group_(std::move(identification_group)),
      identification_identity_(std::move(identification_identity)) {
    std::size_t counts[3] = {0, 0, 0};
    for (const auto& c : categories) ++counts[static_cast<int>(c.group)];
    if (counts[0] != kVriA || counts[1] != kVriB || counts[2] != kVriC)
        throw ConfigError("VRI manifest needs 4 A, 3 B and 5 C categories");
    auto fusion = std::find_if(categories.begin(), categories.end(),
                               [](const VriCategory& c) { return c.name == "fusion"; });
    if (fusion == categories.end() || fusion->group != VriGroup::A)
        throw ConfigError("VRI manifest needs a group-A category named 'fusion'");
    // A (fusion first), B, C; stable within a group.
    std::stable_partition(categories.begin(), categories.end(),
                          [](const VriCategory& c) { return c.name == "fusion"; });
    std::stable_sort(categories.begin(), categories.end(), [](const VriCategory& a, const VriCategory& b) {
        return static_cast<int>(a.group) < static_cast<int>(b.group);
    });
    categories_ = std::move(categories);
}

VriManifest VriManifest::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open VRI manifest '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("VRI manifest '" + path + "': " + e.what());
    }
    const auto base = std::filesystem::path(path).parent_path();
    auto resolve = [&](const std::string& p) {
        std::filesystem::path fp(p);
        return (fp.is_absolute() ? fp : base / fp).string();
    };
    try {
        std::vector<VriCategory> cats;
        for (const auto& c : j.at("categories")) {
            VriCategory cat;
            cat.name = c.at("name").get<std::string>();
            const auto g = c.at("group").get<std::string>();
            if (g == "A") cat.group = VriGroup::A;
            else if (g == "B") cat.group = VriGroup::B;
            else if (g == "C") cat.group = VriGroup::C;
            else throw ConfigError("VRI manifest: category '" + cat.name + "' has unknown group '" + g + "'");
            cat.lexicon = Lexicon::from_file(resolve(c.at("lexicon").get<std::string>()));
            const auto unit = c.value("unit", std::string("sentence"));
            if (unit == "word") cat.unit = Unit::word;
            else if (unit == "sentence") cat.unit = Unit::sentence;
            else throw ConfigError("VRI manifest: unknown unit '" + unit + "'");
            cats.push_back(std::move(cat));
        }
        const auto& id = j.at("identification");
        return VriManifest(std::move(cats), Lexicon::from_file(resolve(id.at("group").get<std::string>())),
                           Lexicon::from_file(resolve(id.at("identity").get<std::string>())));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("VRI manifest '" + path + "': " + e.what());
    }
}

VriCategoryScores VriManifest::score(std::string_view s) const {
    VriCategoryScores out;
    for (const auto& c : categories_) {
        const double r = rate(s, c.lexicon, c.unit);
        switch (c.group) {
            case VriGroup::A: out.a_scores.push_back(r); break;
            case VriGroup::B: out.b_scores.push_back(r); break;
            case VriGroup::C: out.c_scores.push_back(r); break;
        }
    }
    out.identification = guarded_ratio(rate(s, identification_group_, Unit::sentence),
                                       rate(s, identification_identity_, Unit::sentence));
    return out;
}

std::vector<std::string> VriManifest::non_fusion_names() const {
    std::vector<std::string> out;
    for (const auto& c : categories_)
        if (c.name != "fusion") out.push_back(c.name);
    return out;
}

}  // namespace clifs::lexical
