#include "clifs/corpus.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

#include "clifs/errors.hpp"
#include "clifs/text.hpp"
#include "json.hpp"

namespace clifs::corpus {

using nlohmann::json;

std::string_view to_string(Provenance p) {
    switch (p) {
        case Provenance::human: return "human";
        case Provenance::rtt: return "rtt";
        case Provenance::genai: return "genai";
        case Provenance::oversampled: return "oversampled";
    }
    return "?";
}

std::optional<Provenance> parse_provenance(std::string_view s) {
    for (auto p : {Provenance::human, Provenance::rtt, Provenance::genai, Provenance::oversampled})
        if (to_string(p) == s) return p;
    return std::nullopt;
}

void validate(const Document& doc) {
    if (text::trim(doc.text).empty()) throw UsageError("document '" + doc.id + "' has empty text");
    if (doc.vifs_score && (*doc.vifs_score < 1.0 || *doc.vifs_score > 7.0))
        throw UsageError("document '" + doc.id + "' has vifs_score outside [1,7]");
}

// ---- records -------------------------------------------------------------

std::string to_json_line(const Document& doc) {
    json j = json::object();
    j["id"] = doc.id;
    j["text"] = doc.text;
    j["target_category"] = doc.target_category;
    if (doc.vifs_score) j["vifs_score"] = *doc.vifs_score;
    if (doc.label) j["label"] = std::string(to_string(*doc.label));
    if (doc.author) j["author"] = *doc.author;
    if (doc.risk_label) j["risk_label"] = std::string(to_string(*doc.risk_label));
    if (doc.provenance != Provenance::human) j["provenance"] = std::string(to_string(doc.provenance));
    if (doc.source_id) j["source_id"] = *doc.source_id;
    return j.dump();
}

namespace {

std::string get_string(const json& j, const char* key, bool required) {
    auto it = j.find(key);
    if (it == j.end()) {
        if (required) throw FormatError(std::string("missing field '") + key + "'");
        return {};
    }
    if (!it->is_string()) throw FormatError(std::string("field '") + key + "' must be a string");
    return it->get<std::string>();
}

}  // namespace

Document from_json_line(std::string_view line) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("invalid JSON record: ") + e.what());
    }
    if (!j.is_object()) throw FormatError("record is not a JSON object");

    Document d;
    d.id = get_string(j, "id", true);
    d.text = get_string(j, "text", true);
    d.target_category = get_string(j, "target_category", false);
    if (auto it = j.find("vifs_score"); it != j.end()) {
        if (!it->is_number()) throw FormatError("field 'vifs_score' must be a number");
        d.vifs_score = it->get<double>();
    }
    if (j.contains("label")) {
        auto s = get_string(j, "label", true);
        d.label = parse_fusion_label(s);
        if (!d.label) throw FormatError("unknown label '" + s + "'");
    }
    if (j.contains("author")) d.author = get_string(j, "author", true);
    if (j.contains("risk_label")) {
        auto s = get_string(j, "risk_label", true);
        d.risk_label = parse_risk_label(s);
        if (!d.risk_label) throw FormatError("unknown risk_label '" + s + "'");
    }
    if (j.contains("provenance")) {
        auto s = get_string(j, "provenance", true);
        auto p = parse_provenance(s);
        if (!p) throw FormatError("unknown provenance '" + s + "'");
        d.provenance = *p;
    }
    if (j.contains("source_id")) d.source_id = get_string(j, "source_id", true);
    try {
        validate(d);
    } catch (const UsageError& e) {
        throw FormatError(e.what());
    }
    return d;
}

bool DocumentReader::next(Document& out) {
    std::string line;
    while (std::getline(in_, line)) {
        ++line_;
        if (text::trim(line).empty()) continue;
        try {
            out = from_json_line(line);
        } catch (const FormatError& e) {
            throw FormatError("line " + std::to_string(line_) + ": " + e.what());
        }
        return true;
    }
    return false;
}

std::vector<Document> read_documents(std::istream& in) {
    std::vector<Document> docs;
    DocumentReader reader(in);
    Document d;
    while (reader.next(d)) docs.push_back(std::move(d));
    return docs;
}

std::vector<Document> read_documents(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open dataset '" + path + "'");
    return read_documents(in);
}

void write_documents(std::ostream& out, const std::vector<Document>& docs) {
    for (const auto& d : docs) out << to_json_line(d) << '\n';
}

void write_documents(const std::string& path, const std::vector<Document>& docs) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write '" + path + "'");
    write_documents(out, docs);
}

// ---- discretization ------------------------------------------------------

FusionLabel DiscretizationBoundaries::classify(double score) const {
    if (score < low_cut) return FusionLabel::low;
    if (score > high_cut) return FusionLabel::high;
    return FusionLabel::medium;
}

Discretization discretize(const std::vector<double>& scores) {
    if (scores.empty()) throw UsageError("discretize: empty score list");
    for (double s : scores)
        if (!(s >= 1.0 && s <= 7.0)) throw UsageError("discretize: score outside [1,7]");

    const double n = static_cast<double>(scores.size());
    const double mean = std::accumulate(scores.begin(), scores.end(), 0.0) / n;
    double ss = 0.0;
    for (double s : scores) ss += (s - mean) * (s - mean);
    const double sd = std::sqrt(ss / n);

    Discretization out;
    out.boundaries = {mean, sd, mean - sd, mean + sd};
    out.labels.reserve(scores.size());
    for (double s : scores) out.labels.push_back(out.boundaries.classify(s));
    return out;
}

// ---- splitting -----------------------------------------------------------

SplitIndices split_indices(std::size_t n, const SplitSpec& spec) {
    for (double f : {spec.train, spec.validation, spec.test})
        if (!(f >= 0.0 && f <= 1.0)) throw UsageError("split fractions must lie in [0,1]");
    if (std::abs(spec.train + spec.validation + spec.test - 1.0) > 1e-9)
        throw UsageError("split fractions must sum to 1");

    auto order = iota_indices(n);
    Rng rng(spec.seed);
    rng.shuffle(order);

    const auto n_train = static_cast<std::size_t>(std::floor(spec.train * static_cast<double>(n) + 1e-9));
    const auto n_val = std::min(
        n - n_train, static_cast<std::size_t>(std::floor(spec.validation * static_cast<double>(n) + 1e-9)));

    SplitIndices out;
    out.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    out.validation.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                          order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    out.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
    return out;
}

Split split(const std::vector<Document>& dataset, const SplitSpec& spec) {
    if (dataset.empty()) throw UsageError("split: empty dataset");
    auto idx = split_indices(dataset.size(), spec);
    Split out;
    for (auto i : idx.train) out.train.push_back(dataset[i]);
    for (auto i : idx.validation) out.validation.push_back(dataset[i]);
    for (auto i : idx.test) out.test.push_back(dataset[i]);
    return out;
}

// ---- sentence segmentation ---------------------------------------------

namespace {

const std::vector<std::string>& default_abbreviations() {
    static const std::vector<std::string> list{
        "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "mt", "vs", "etc", "e.g", "i.e", "cf",
        "no", "vol", "fig", "gen", "col", "lt", "sgt", "capt", "rev", "gov", "sen", "rep", "inc",
        "ltd", "co", "corp", "jan", "feb", "mar", "apr", "jun", "jul", "aug", "sep", "sept", "oct",
        "nov", "dec", "u.s", "u.k", "u.s.a", "a.m", "p.m", "approx", "dept", "est"};
    return list;
}

bool is_closer(char c) { return c == '"' || c == '\'' || c == ')' || c == ']' || c == '}'; }

bool is_opener_or_start(unsigned char c) {
    return std::isupper(c) || std::isdigit(c) || c == '"' || c == '\'' || c == '(' || c == '[' || c >= 0x80;
}

}  // namespace

RuleSentenceSegmenter::RuleSentenceSegmenter() : abbreviations_(default_abbreviations()) {}

RuleSentenceSegmenter::RuleSentenceSegmenter(std::vector<std::string> abbreviations)
    : abbreviations_(std::move(abbreviations)) {
    for (auto& a : abbreviations_) a = text::to_lower(a);
}

std::vector<std::string> RuleSentenceSegmenter::segment(std::string_view s) const {
    std::vector<std::string> out;
    auto emit = [&](std::size_t b, std::size_t e) {
        auto t = text::trim(s.substr(b, e - b));
        if (!t.empty()) out.push_back(std::move(t));
    };

    std::size_t start = 0;
    std::size_t i = 0;
    while (i < s.size()) {
        const char c = s[i];
        if (c == '\n') {
            // Blank line: paragraph boundary.
            std::size_t j = i + 1;
            while (j < s.size() && (s[j] == ' ' || s[j] == '\t' || s[j] == '\r')) ++j;
            if (j < s.size() && s[j] == '\n') {
                emit(start, i);
                while (j < s.size() && std::isspace(static_cast<unsigned char>(s[j]))) ++j;
                start = i = j;
                continue;
            }
            ++i;
            continue;
        }
        if (c != '.' && c != '!' && c != '?') {
            ++i;
            continue;
        }

        std::size_t end = i;
        while (end < s.size() && (s[end] == '.' || s[end] == '!' || s[end] == '?')) ++end;
        while (end < s.size() && is_closer(s[end])) ++end;

        if (end < s.size() && !std::isspace(static_cast<unsigned char>(s[end]))) {
            i = end;
            continue;
        }
        std::size_t next = end;
        while (next < s.size() && std::isspace(static_cast<unsigned char>(s[next]))) ++next;
        if (next < s.size() && !is_opener_or_start(static_cast<unsigned char>(s[next]))) {
            i = end;
            continue;
        }

        if (c == '.' && end == i + 1) {
            // Word before the period, dots included ("e.g", "U.S").
            std::size_t w = i;
            while (w > start && (std::isalpha(static_cast<unsigned char>(s[w - 1])) || s[w - 1] == '.')) --w;
            std::string word = text::to_lower(s.substr(w, i - w));
            bool single_initial = word.size() == 1 && std::isupper(static_cast<unsigned char>(s[w]));
            bool abbreviation =
                std::find(abbreviations_.begin(), abbreviations_.end(), word) != abbreviations_.end();
            if ((single_initial || abbreviation) && next < s.size()) {
                i = end;
                continue;
            }
        }

        emit(start, end);
        start = i = next;
    }
    emit(start, s.size());
    return out;
}

const SentenceSegmenter& default_segmenter() {
    static const RuleSentenceSegmenter segmenter;
    return segmenter;
}

// ---- chunking -----------------------------------------------------------

std::vector<Chunk> chunk_text(std::string_view doc_text, std::size_t target_words,
                              const SentenceSegmenter& segmenter) {
    if (target_words == 0) throw UsageError("chunk_text: target_words must be positive");
    std::vector<Chunk> chunks;
    Chunk current;
    auto flush = [&] {
        if (current.sentences.empty()) return;
        std::string joined;
        for (const auto& s : current.sentences) {
            if (!joined.empty()) joined += ' ';
            joined += s;
        }
        current.text = std::move(joined);
        chunks.push_back(std::move(current));
        current = Chunk{};
    };

    for (auto& sentence : segmenter.segment(doc_text)) {
        const std::size_t wc = text::whitespace_word_count(sentence);
        if (wc == 0) continue;
        if (!current.sentences.empty() && current.word_count + wc > target_words) flush();
        current.sentences.push_back(std::move(sentence));
        current.word_count += wc;
    }
    flush();
    return chunks;
}

std::vector<Chunk> chunk_document(const Document& doc, std::size_t target_words,
                                  const SentenceSegmenter& segmenter) {
    auto chunks = chunk_text(doc.text, target_words, segmenter);
    for (auto& c : chunks) {
        c.source_id = doc.id;
        c.author = doc.author.value_or(doc.id);
        c.label = doc.risk_label;
    }
    return chunks;
}

// ---- balancing ----------------------------------------------------------

std::vector<Chunk> balance_round_robin(const std::vector<Chunk>& chunks, std::size_t per_class) {
    // class -> author order of first appearance -> chunk indices
    std::array<std::vector<std::string>, kNumClasses> author_order;
    std::array<std::map<std::string, std::vector<std::size_t>>, kNumClasses> by_author;
    std::array<std::size_t, kNumClasses> counts{};

    for (std::size_t i = 0; i < chunks.size(); ++i) {
        if (!chunks[i].label) throw UsageError("balance_round_robin: chunk without a risk label");
        auto c = static_cast<std::size_t>(to_index(*chunks[i].label));
        auto& authors = by_author[c];
        if (!authors.contains(chunks[i].author)) author_order[c].push_back(chunks[i].author);
        authors[chunks[i].author].push_back(i);
        ++counts[c];
    }

    std::size_t minority = SIZE_MAX;
    for (auto n : counts)
        if (n > 0) minority = std::min(minority, n);
    if (minority == SIZE_MAX) return {};
    if (per_class == 0) per_class = minority;
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        if (counts[c] < per_class)
            throw UsageError("balance_round_robin: class '" +
                             std::string(to_string(kRiskLabels[c])) + "' has " + std::to_string(counts[c]) +
                             " chunks, fewer than " + std::to_string(per_class));
    }

    std::vector<Chunk> out;
    out.reserve(per_class * kNumClasses);
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        std::vector<std::size_t> cursor(author_order[c].size(), 0);
        std::size_t taken = 0;
        while (taken < per_class) {
            for (std::size_t a = 0; a < author_order[c].size() && taken < per_class; ++a) {
                const auto& list = by_author[c][author_order[c][a]];
                if (cursor[a] < list.size()) {
                    out.push_back(chunks[list[cursor[a]++]]);
                    ++taken;
                }
            }
        }
    }
    return out;
}

}  // namespace clifs::corpus
