#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "clifs/errors.hpp"
#include "clifs/lexical.hpp"
#include "clifs/random.hpp"
#include "doctest.h"

using namespace clifs;
using namespace clifs::lexical;

namespace {

VriCategoryScores uniform_scores(double v) {
    return {std::vector<double>(kVriA, v), std::vector<double>(kVriB, v), std::vector<double>(kVriC, v), 0.0};
}

VriManifest toy_manifest() {
    std::vector<VriCategory> cats;
    const char* names[] = {"fusion", "a1", "a2", "a3", "b0", "b1", "b2", "c0", "c1", "c2", "c3", "c4"};
    for (int i = 0; i < 12; ++i) {
        const auto g = i < 4 ? VriGroup::A : i < 7 ? VriGroup::B : VriGroup::C;
        cats.push_back({names[i], g, Lexicon(names[i], {std::string("k") + names[i]}), Unit::sentence});
    }
    // Deliberately out of order: the manifest sorts by group with fusion first.
    std::swap(cats[0], cats[8]);
    return VriManifest(cats, Lexicon("group", {"we", "our"}), Lexicon("identity", {"i", "my"}));
}

}  // namespace

TEST_CASE("lexicon: words, stems, phrases") {
    Lexicon lex("x", {"friend*", "Social", "our people"});
    CHECK(lex.matches_word("friends"));
    CHECK(lex.matches_word("friend"));
    CHECK(lex.matches_word("social"));
    CHECK_FALSE(lex.matches_word("socially"));
    CHECK(lex.covered_words({"our", "people", "are", "friendly"}) == 3);
    CHECK(lex.covered_words({"our", "dogs"}) == 0);
    CHECK_THROWS_AS(Lexicon("bad", {"fr*nd"}), UsageError);
    CHECK_THROWS_AS(Lexicon("empty", {}), UsageError);

    std::istringstream in("# comment\nally\n\nmate*\n");
    auto l2 = Lexicon::from_stream("f", in);
    CHECK(l2.size() == 2);
}

TEST_CASE("rates per word and per sentence") {
    Lexicon lex("x", {"we"});
    CHECK(rate("We went home. They stayed. We left.", lex, Unit::word) == doctest::Approx(2.0 / 7.0));
    CHECK(rate("We went home. They stayed. We left.", lex, Unit::sentence) == doctest::Approx(2.0 / 3.0));
    CHECK(rate("", lex, Unit::word) == 0.0);
    CHECK(rate("   ", lex, Unit::sentence) == 0.0);
}

TEST_CASE("uai: hand-computed z-scores") {
    auto r = uai_batch({{1, 3}, {2, 2}, {3, 1}});
    // z(A) = (-1.2247, 0, 1.2247), z(C) = -z(A)
    const double z = std::sqrt(1.5);
    CHECK(r.scores[0].uai == doctest::Approx(-2 * z));
    CHECK(r.scores[1].uai == doctest::Approx(0.0));
    CHECK(r.scores[2].uai == doctest::Approx(2 * z));
    CHECK(r.scores[2].uai == doctest::Approx(2.449).epsilon(1e-3));
    CHECK(r.scores[0].nuai == doctest::Approx(-2.0));
    CHECK_FALSE(r.affiliation_zero_variance);
}

TEST_CASE("uai: zero variance and small batches") {
    auto r = uai_batch({{0.2, 0.1}, {0.2, 0.1}, {0.2, 0.1}});
    for (const auto& s : r.scores) CHECK(s.uai == 0.0);
    CHECK(r.affiliation_zero_variance);
    CHECK(r.cogproc_zero_variance);
    CHECK_THROWS_AS(uai_batch({{1, 1}}), UsageError);
    CHECK(naive_uai({5, 3}).nuai == 2.0);
}

TEST_CASE("uai properties: centred batches and sample-independent nuai") {
    Rng rng(4);
    for (int b = 0; b < 100; ++b) {
        std::vector<LexicalCounts> batch(2 + rng.index(30));
        for (auto& c : batch) c = {rng.uniform01(), rng.uniform01()};
        auto r = uai_batch(batch);
        double sum = 0;
        for (const auto& s : r.scores) sum += s.uai;
        CHECK(std::abs(sum / static_cast<double>(batch.size())) < 1e-9);
        for (std::size_t i = 0; i < batch.size(); ++i)
            CHECK(r.scores[i].nuai == naive_uai(batch[i]).nuai);
    }
}

TEST_CASE("vri aggregate and class thresholds") {
    auto zero = vri_aggregate(uniform_scores(0.0));
    CHECK(zero.vri == 0.0);
    CHECK(zero.vri_class == VriClass::low);
    CHECK(zero.mapped_risk == RiskLabel::moderate);

    auto half = vri_aggregate(uniform_scores(0.5));
    CHECK(half.vri == doctest::Approx(50.0).epsilon(1e-12));
    CHECK(half.vri_class == VriClass::high);
    CHECK(half.mapped_risk == RiskLabel::ideologically_extreme);

    CHECK(classify_vri(9.999) == VriClass::low);
    CHECK(classify_vri(10.0) == VriClass::medium);
    CHECK(classify_vri(30.0) == VriClass::medium);
    CHECK(classify_vri(30.0001) == VriClass::high);
    CHECK(classify_vri(70.0) == VriClass::high);
    CHECK(classify_vri(70.0001) == VriClass::very_high);
    CHECK(map_vri_class(VriClass::medium) == RiskLabel::moderate);
    CHECK(map_vri_class(VriClass::very_high) == RiskLabel::violent_self_sacrificial);

    VriCategoryScores bad{{0.1}, {0.1, 0.1, 0.1}, std::vector<double>(5, 0.1), 0};
    CHECK_THROWS_AS(vri_aggregate(bad), UsageError);
}

TEST_CASE("vri weights against direct evaluation and linearity") {
    Rng rng(8);
    for (int i = 0; i < 20; ++i) {
        VriCategoryScores s;
        for (std::size_t k = 0; k < kVriA; ++k) s.a_scores.push_back(rng.uniform01());
        for (std::size_t k = 0; k < kVriB; ++k) s.b_scores.push_back(rng.uniform01());
        for (std::size_t k = 0; k < kVriC; ++k) s.c_scores.push_back(rng.uniform01());
        auto mean = [](const std::vector<double>& v) {
            return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        };
        const double want = 100 * (0.54 * mean(s.a_scores) + 0.25 * mean(s.b_scores) + 0.21 * mean(s.c_scores));
        const auto r = vri_aggregate(s);
        CHECK(std::abs(r.vri - want) < 1e-9);

        const double lambda = rng.uniform01();
        auto scaled = s;
        for (auto* g : {&scaled.a_scores, &scaled.b_scores, &scaled.c_scores})
            for (auto& x : *g) x *= lambda;
        CHECK(std::abs(vri_aggregate(scaled).vri - lambda * r.vri) < 1e-9);
    }
}

TEST_CASE("guarded ratio") {
    CHECK(guarded_ratio(2.0, 4.0) == 0.5);
    CHECK(guarded_ratio(0.5, 0.0) == doctest::Approx(0.5 / kRatioEpsilon));
    CHECK(guarded_ratio(2.0, 0.0) == kRatioCap);
    CHECK(guarded_ratio(0.0, 0.0) == 0.0);
}

TEST_CASE("vri manifest: ordering and scoring") {
    auto m = toy_manifest();
    REQUIRE(m.categories().size() == 12);
    CHECK(m.categories()[0].name == "fusion");
    CHECK(m.categories()[0].group == VriGroup::A);
    CHECK(m.categories()[4].group == VriGroup::B);
    CHECK(m.categories()[7].group == VriGroup::C);
    auto names = m.non_fusion_names();
    CHECK(names.size() == 11);
    CHECK(std::find(names.begin(), names.end(), "fusion") == names.end());

    auto s = m.score("We are kfusion. I am kb1. My cause. Our kc4 plan.");
    CHECK(s.vri_fusion() == doctest::Approx(0.25));
    CHECK(s.b_scores[1] == doctest::Approx(0.25));
    CHECK(s.c_scores[4] == doctest::Approx(0.25));
    // group sentences 2, identity sentences 2
    CHECK(s.identification == doctest::Approx(1.0));

    std::vector<VriCategory> too_few(m.categories().begin(), m.categories().begin() + 11);
    CHECK_THROWS_AS(VriManifest(too_few, Lexicon("g", {"we"}), Lexicon("i", {"i"})), ConfigError);
}
