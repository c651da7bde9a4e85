#include <algorithm>
#include <map>

#include "clifs/augmentation.hpp"
#include "clifs/errors.hpp"
#include "doctest.h"

using namespace clifs;
using namespace clifs::augmentation;
using corpus::Document;
using corpus::Provenance;

namespace {

Document human(std::string id, FusionLabel label, double score) {
    Document d;
    d.id = std::move(id);
    d.text = "text of " + d.id + " about my people and our group";
    d.target_category = "country";
    d.label = label;
    d.vifs_score = score;
    return d;
}

std::vector<Document> dataset(std::size_t low, std::size_t medium, std::size_t high) {
    std::vector<Document> out;
    for (std::size_t i = 0; i < low; ++i) out.push_back(human("l" + std::to_string(i), FusionLabel::low, 1.5));
    for (std::size_t i = 0; i < medium; ++i) out.push_back(human("m" + std::to_string(i), FusionLabel::medium, 4.0));
    for (std::size_t i = 0; i < high; ++i) out.push_back(human("h" + std::to_string(i), FusionLabel::high, 6.5));
    return out;
}

class FailingPivot : public TranslationClient {
public:
    std::string round_trip(std::string_view text, std::string_view pivot) const override {
        if (pivot == "chinese") throw InferenceError("down");
        return "[" + std::string(pivot) + "] " + std::string(text);
    }
};

class ScriptedGenerator : public GenerationClient {
public:
    explicit ScriptedGenerator(std::vector<std::size_t> lengths) : lengths_(std::move(lengths)) {}
    std::string generate(std::string_view) const override {
        const auto n = lengths_[std::min(calls_++, lengths_.size() - 1)];
        std::string s;
        for (std::size_t i = 0; i < n; ++i) s += "word ";
        return s;
    }
    mutable std::size_t calls_ = 0;

private:
    std::vector<std::size_t> lengths_;
};

std::string words(std::size_t n) {
    std::string s;
    for (std::size_t i = 0; i < n; ++i) s += (i ? " w" : "w");
    return s;
}

}  // namespace

TEST_CASE("rtt: one record per pivot, passthrough stub, lineage") {
    auto src = human("d1", FusionLabel::high, 6.0);
    IdentityTranslationClient id;
    auto out = rtt(src, id);
    REQUIRE(out.size() == 2);
    for (const auto& d : out) {
        CHECK(d.text == src.text);
        CHECK(d.provenance == Provenance::rtt);
        CHECK(d.source_id == "d1");
        CHECK(d.label == src.label);
        CHECK(d.vifs_score == src.vifs_score);
    }
    CHECK(out[0].id == "d1#rtt-german");
    CHECK(out[1].id == "d1#rtt-chinese");

    std::vector<std::string> warnings;
    auto partial = rtt(src, FailingPivot{}, kDefaultPivots, &warnings);
    REQUIRE(partial.size() == 1);
    CHECK(partial[0].text.rfind("[german]", 0) == 0);
    CHECK(warnings.size() == 1);
}

TEST_CASE("chat translation client issues two requests") {
    remote::ReplayChatBackend b;
    b.add_sequential("Wir sind eins");
    b.add_sequential("We are one");
    ChatTranslationClient c(b);
    CHECK(c.round_trip("We are one.", "german") == "We are one");
    CHECK(b.calls() == 2);
}

TEST_CASE("oversample: counts, untouched classes, replayed selection") {
    auto data = dataset(100, 40, 30);
    auto out = oversample(data, {FusionLabel::low, FusionLabel::high}, 0.25, 42);
    auto h = out.class_histogram();
    CHECK(h[0] == 125);
    CHECK(h[1] == 40);
    CHECK(h[2] == 37);
    CHECK(out.records.size() == data.size() + 25 + 7);
    for (std::size_t i = 0; i < data.size(); ++i) CHECK(out.records[i].id == data[i].id);

    // Oracle: replay the per-class stream.
    std::vector<std::string> want;
    for (auto c : {FusionLabel::low, FusionLabel::high}) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < data.size(); ++i)
            if (data[i].label == c) members.push_back(i);
        const auto k = members.size() / 4;
        Rng rng(42, {static_cast<std::uint64_t>(to_index(c))});
        rng.shuffle(members);
        members.resize(k);
        std::sort(members.begin(), members.end());
        for (auto i : members) want.push_back(data[i].id + "#os");
    }
    std::vector<std::string> got;
    for (std::size_t i = data.size(); i < out.records.size(); ++i) {
        CHECK(out.records[i].provenance == Provenance::oversampled);
        CHECK(out.lineage.at(out.records[i].id) == *out.records[i].source_id);
        got.push_back(out.records[i].id);
    }
    CHECK(got == want);
    std::set<std::string> distinct(got.begin(), got.end());
    CHECK(distinct.size() == got.size());

    CHECK(oversample(data, {FusionLabel::low}, 0.25, 7).records.size() == data.size() + 25);
    CHECK_THROWS_AS(oversample(data, {FusionLabel::low}, 1.5, 7), UsageError);
}

TEST_CASE("target sampling is uniform") {
    const auto& targets = fusion_targets();
    REQUIRE(targets.size() == 12);
    std::map<std::string, std::size_t> counts;
    Rng rng(42);
    const std::size_t n = 12000;
    for (std::size_t i = 0; i < n; ++i) ++counts[sample_target(rng).specific];
    REQUIRE(counts.size() == targets.size());
    const double expected = static_cast<double>(n) / static_cast<double>(targets.size());
    double chi2 = 0;
    for (const auto& [k, c] : counts) chi2 += (c - expected) * (c - expected) / expected;
    CHECK(chi2 < 31.26);  // df 11, p = 0.001
}

TEST_CASE("generation prompt") {
    const std::array<AnchorExample, 3> anchors{AnchorExample{6.0, "first essay"}, AnchorExample{6.571428571, "second"},
                                               AnchorExample{7.0, "third"}};
    auto p = build_generation_prompt(FusionLabel::high, 7.0, anchors, {"group", "your gang"});
    CHECK(p.find("would score 7.0 out of 7") != std::string::npos);
    CHECK(p.find("Write between 57 and 249 words") != std::string::npos);
    CHECK(p.find("writing for 6-8 minutes") != std::string::npos);
    CHECK(p.find("Your target is a(n) group. The group is your gang.") != std::string::npos);
    CHECK(p.find("scored high on the verbal identity fusion scale") != std::string::npos);
    CHECK(p.find("Score:  6.571428571") != std::string::npos);
    CHECK(p.find('{') == std::string::npos);
    CHECK(p.find('}') == std::string::npos);
    std::size_t pos = 0;
    for (auto section : {"Role:", "Length:", "Target:", "Exclusivity:"}) {
        auto at = p.find(section);
        REQUIRE(at != std::string::npos);
        CHECK(at > pos);
        pos = at;
    }
    auto bad = anchors;
    bad[1].text = "  ";
    CHECK_THROWS_AS(build_generation_prompt(FusionLabel::low, 1.0, bad, {"group", "x"}), UsageError);

    CHECK(format_score(7.0) == "7.0");
    CHECK(format_score(4.5) == "4.5");
    CHECK(format_score(1.0 + 1.0 / 7.0) == "1.142857143");
}

TEST_CASE("generation word-count validation") {
    ScriptedGenerator ok({10, 300, 100});
    auto r = generate_validated(ok, "p");
    REQUIRE(r.has_value());
    CHECK(ok.calls_ == 3);
    ScriptedGenerator never({10});
    CHECK_FALSE(generate_validated(never, "p").has_value());
    CHECK(never.calls_ == 3);
    ScriptedGenerator edge({57});
    CHECK(generate_validated(edge, "p").has_value());
    ScriptedGenerator over({250});
    CHECK_FALSE(generate_validated(over, "p", 1).has_value());
}

TEST_CASE("leakage guard") {
    auto data = dataset(4, 2, 4);
    IdentityTranslationClient id;
    std::vector<Document> pool = data;
    for (const auto& d : rtt(data[0], id)) pool.push_back(d);
    CHECK_NOTHROW(verify_no_leakage(pool, {"t9"}));

    // A test item's rtt variant sneaks in.
    auto test_item = human("t1", FusionLabel::high, 6.8);
    auto leaked = pool;
    leaked.push_back(rtt(test_item, id)[0]);
    CHECK_THROWS_AS(verify_no_leakage(leaked, {"t1"}), LeakageError);
    CHECK_THROWS_AS(verify_no_leakage(leaked, {"t1"}), FormatError);

    // Second-generation descendant.
    auto os = oversample(leaked, {FusionLabel::high}, 1.0, 1).records;
    auto filtered = exclude_test_descendants(os, {"t1"});
    CHECK_NOTHROW(verify_no_leakage(filtered, {"t1"}));
    CHECK(filtered.size() == os.size() - 2);

    auto orphan = rtt(data[1], id)[0];
    orphan.source_id.reset();
    CHECK_THROWS_AS(verify_no_leakage({orphan}, {}), LeakageError);
    auto dangling = rtt(data[1], id)[0];
    CHECK_THROWS_AS(verify_no_leakage({dangling}, {}), LeakageError);
    CHECK_THROWS_AS(verify_no_leakage(pool, {"l0"}), LeakageError);
}

TEST_CASE("augment: full recipe, ordering, lineage closure") {
    auto data = dataset(8, 12, 8);
    data.push_back(human("test-1", FusionLabel::high, 7.0));
    IdentityTranslationClient id;
    remote::ReplayChatBackend gen_backend;
    gen_backend.add_sequential(words(120));
    ChatGenerationClient gen(gen_backend);
    AugmentConfig cfg;
    cfg.genai_per_class = {1, 2, 1};
    std::vector<std::string> warnings;
    auto out = augment(data, {"test-1"}, {&id, &gen}, cfg, &warnings);

    // humans 28, rtt 2 * 16, genai 4, oversampled floor(.25 * (8+16+1)) twice
    CHECK(out.records.size() == 28 + 32 + 4 + 6 + 6);
    CHECK(out.class_histogram() == std::array<std::size_t, 3>{31, 14, 31});
    std::map<std::string, const Document*> by_id;
    for (const auto& d : out.records) by_id[d.id] = &d;
    for (const auto& d : out.records) {
        CHECK(d.id.find("test-1") == std::string::npos);
        if (d.provenance == Provenance::rtt || d.provenance == Provenance::oversampled) {
            REQUIRE(d.source_id.has_value());
            REQUIRE(by_id.contains(*d.source_id));
            const auto* src = by_id.at(*d.source_id);
            CHECK(src->label == d.label);
            CHECK(src->vifs_score == d.vifs_score);
        }
        if (d.provenance == Provenance::rtt) CHECK(by_id.at(*d.source_id)->provenance == Provenance::human);
        if (d.provenance == Provenance::genai) {
            CHECK(d.vifs_score.has_value());
            CHECK_FALSE(d.source_id.has_value());
        }
    }
    // Source records are untouched.
    for (std::size_t i = 0; i < 28; ++i) CHECK(out.records[i] == data[i]);
    // Provenance blocks appear in recipe order.
    std::vector<Provenance> seq;
    for (const auto& d : out.records)
        if (seq.empty() || seq.back() != d.provenance) seq.push_back(d.provenance);
    CHECK(seq == std::vector<Provenance>{Provenance::human, Provenance::rtt, Provenance::genai,
                                         Provenance::oversampled});
    CHECK(augment(data, {"test-1"}, {&id, &gen}, cfg).records == out.records);

    CHECK_THROWS_AS(augment(data, {}, {nullptr, &gen}, cfg), ConfigError);
    AugmentConfig few = cfg;
    few.genai_per_class = {0, 0, 1};
    CHECK_THROWS_AS(augment(dataset(8, 8, 2), {}, {&id, &gen}, few), UsageError);
}

TEST_CASE("augment rejects a leaked variant in its input, keeps clean ones") {
    auto data = dataset(8, 8, 8);
    IdentityTranslationClient id;
    AugmentConfig cfg;
    cfg.rtt_classes = {};
    auto test_item = human("t1", FusionLabel::low, 1.1);
    auto input = data;
    input.push_back(rtt(test_item, id)[0]);
    CHECK_THROWS_AS(augment(input, {"t1"}, {&id, nullptr}, cfg), LeakageError);

    auto dangling = data;
    dangling.push_back(rtt(human("gone", FusionLabel::low, 1.0), id)[0]);
    CHECK_THROWS_AS(augment(dangling, {}, {&id, nullptr}, cfg), LeakageError);

    auto clean = data;
    clean.push_back(rtt(data[0], id)[0]);
    auto out = augment(clean, {"t1"}, {&id, nullptr}, cfg);
    CHECK(out.records[24].id == "l0#rtt-german");
}
