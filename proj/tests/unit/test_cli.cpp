#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "clifs/augmentation.hpp"
#include "clifs/corpus.hpp"
#include "clifs/errors.hpp"
#include "clifs/features.hpp"
#include "clifs/models.hpp"
#include "doctest.h"
#include "run_config.hpp"

using namespace clifs;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::string kConfig = CLIFS_TEST_CONFIG;

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("clifs-cli-" + std::to_string(::getpid()) + "-" +
                                            std::to_string(reinterpret_cast<std::uintptr_t>(this)));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
    std::string write(const std::string& name, const std::string& content) const {
        std::ofstream(path / name) << content;
        return file(name);
    }
};

struct Run {
    int code = 0;
    std::string out, err;
};

Run run(std::vector<std::string> args) {
    std::ostringstream out, err;
    Run r;
    r.code = cli::run_cli(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::size_t line_count(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

corpus::Document doc(std::string id, std::string text, FusionLabel label, double score) {
    corpus::Document d;
    d.id = std::move(id);
    d.text = std::move(text);
    d.target_category = "group";
    d.label = label;
    d.vifs_score = score;
    return d;
}

const char* kTexts[] = {
    "I think the weather is nice today and I went to the store.",
    "We played a game and I enjoyed it with friends at the club.",
    "My family is my team and I would die for my brothers. We are one.",
};

std::vector<corpus::Document> labelled_docs(std::size_t per_class) {
    std::vector<corpus::Document> docs;
    for (std::size_t i = 0; i < per_class; ++i)
        for (auto l : kFusionLabels) {
            const int c = to_index(l);
            docs.push_back(doc("d" + std::to_string(c) + "-" + std::to_string(i),
                               std::string(kTexts[c]) + " Entry " + std::to_string(i) + ".", l, 1.5 + 2.5 * c));
        }
    return docs;
}

// Feature file whose only informative column is the label itself.
features::FeatureFile toy_features(std::size_t per_class) {
    features::FeatureFile f;
    f.header.embedding_dim = 2;
    f.header.group_tags = features::Layout{2}.tags();
    for (std::size_t i = 0; i < per_class; ++i)
        for (auto l : kFusionLabels) {
            features::FeatureRecord r;
            r.id = "r" + std::to_string(to_index(l)) + "-" + std::to_string(i);
            r.vector.values.assign(f.header.group_tags.size(), 0.0);
            r.vector.values[5] = to_index(l) + 0.01 * static_cast<double>(i);
            r.vector.group_tags = f.header.group_tags;
            r.label = l;
            r.vifs_score = 1.0 + 3.0 * to_index(l);
            f.records.push_back(std::move(r));
        }
    return f;
}

}  // namespace

TEST_CASE("score: one record per document, byte-identical reruns") {
    TempDir dir;
    auto docs = labelled_docs(1);
    corpus::write_documents(dir.file("docs.jsonl"), docs);
    auto a = run({"score", "-c", kConfig, "-i", dir.file("docs.jsonl"), "-o", dir.file("a.feat"), "--metrics-out",
                  dir.file("a.metrics"), "--report", dir.file("a.json")});
    REQUIRE_MESSAGE(a.code == 0, a.err);
    auto file = features::read_feature_file(dir.file("a.feat"));
    CHECK(file.records.size() == 3);
    CHECK(file.header.embedding_dim == 32);
    CHECK(file.records[2].label == FusionLabel::high);
    CHECK(line_count(slurp(dir.file("a.metrics"))) == 3);

    auto b = run({"score", "-c", kConfig, "-i", dir.file("docs.jsonl"), "-o", dir.file("b.feat"), "--metrics-out",
                  dir.file("b.metrics")});
    REQUIRE(b.code == 0);
    CHECK(slurp(dir.file("a.feat")) == slurp(dir.file("b.feat")));
    CHECK(slurp(dir.file("a.metrics")) == slurp(dir.file("b.metrics")));

    auto report = json::parse(slurp(dir.file("a.json")));
    CHECK(report["documents"] == 3);
    CHECK(report["provenance"]["seed"] == 42);
    CHECK(report["provenance"]["layout_version"] == features::kLayoutVersion);
    CHECK(report["provenance"]["config_hash"].get<std::string>().size() == 16);
}

TEST_CASE("score: empty dataset gives a header and no records") {
    TempDir dir;
    dir.write("empty.jsonl", "");
    auto r = run({"score", "-c", kConfig, "-i", dir.file("empty.jsonl")});
    REQUIRE(r.code == 0);
    CHECK(line_count(r.out) == 1);
    std::istringstream in(r.out);
    CHECK(features::read_feature_file(in).records.empty());
}

TEST_CASE("train then eval round-trips the persisted model") {
    TempDir dir;
    features::write_feature_file(dir.file("train.feat"), toy_features(8));
    features::write_feature_file(dir.file("test.feat"), toy_features(3));
    auto t = run({"train", "-c", kConfig, "-f", dir.file("train.feat"), "-o", dir.file("m.json"), "--report",
                  dir.file("train.json"), "--set", R"(hyperparameters={"n_estimators":20})"});
    REQUIRE_MESSAGE(t.code == 0, t.err);

    auto loaded = models::ForestPipeline::load(dir.file("m.json"));
    REQUIRE(loaded.layout.has_value());
    CHECK(loaded.layout->group_tags == features::Layout{2}.tags());
    loaded.save(dir.file("m2.json"));
    CHECK(slurp(dir.file("m.json")) == slurp(dir.file("m2.json")));

    const auto train = toy_features(8);
    forest::Matrix x;
    std::vector<int> y;
    for (const auto& r : train.records) {
        x.push_back(r.vector.values);
        y.push_back(to_index(*r.label));
    }
    models::Hyperparameters hp;
    hp.n_estimators = 20;
    auto direct = models::train_classifier(x, y, hp, kDefaultSeed, true);
    CHECK(direct.predict_classes(x) == loaded.predict_classes(x));

    auto report = json::parse(slurp(dir.file("train.json")));
    CHECK(report["importances"].size() == 14);
    CHECK(report["importances"][5]["column"] == "fusion_proximity");
    CHECK_FALSE(report.contains("cv"));

    auto e = run({"eval", "-c", kConfig, "-f", dir.file("test.feat"), "-m", dir.file("m.json")});
    REQUIRE_MESSAGE(e.code == 0, e.err);
    auto ev = json::parse(e.out);
    CHECK(ev["rows"][0]["name"] == "model");
    CHECK(ev["rows"][0]["macro_f1"] == 1.0);
    CHECK(ev["provenance"]["seed"] == 42);
}

TEST_CASE("train with dropped groups and grid search") {
    TempDir dir;
    features::write_feature_file(dir.file("train.feat"), toy_features(8));
    features::write_feature_file(dir.file("test.feat"), toy_features(3));
    auto t = run({"train", "-c", kConfig, "-f", dir.file("train.feat"), "-o", dir.file("m.json"), "--report",
                  dir.file("r.json"), "--set", R"(features.drop=["A","E"])"});
    REQUIRE_MESSAGE(t.code == 0, t.err);
    auto report = json::parse(slurp(dir.file("r.json")));
    CHECK(report["cv"]["entries"].size() == 2);
    CHECK(report["importances"].size() == 10);
    CHECK(report["dropped_groups"] == json::array({"A", "E"}));
    auto e = run({"eval", "-c", kConfig, "-f", dir.file("test.feat"), "-m", dir.file("m.json")});
    REQUIRE_MESSAGE(e.code == 0, e.err);
    CHECK(json::parse(e.out)["rows"][0]["macro_f1"] == 1.0);

    features::FeatureFile other = toy_features(3);
    other.header.embedding_dim = 3;
    other.header.group_tags = features::Layout{3}.tags();
    for (auto& r : other.records) {
        r.vector.values.insert(r.vector.values.begin(), 0.0);
        r.vector.group_tags = other.header.group_tags;
    }
    features::write_feature_file(dir.file("other.feat"), other);
    CHECK(run({"eval", "-c", kConfig, "-f", dir.file("other.feat"), "-m", dir.file("m.json")}).code == 3);
}

TEST_CASE("eval: majority baseline on balanced data is 1/6") {
    TempDir dir;
    features::write_feature_file(dir.file("train.feat"), toy_features(4));
    features::write_feature_file(dir.file("test.feat"), toy_features(2));
    auto r = run({"eval", "-f", dir.file("test.feat"), "--train-features", dir.file("train.feat")});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    auto j = json::parse(r.out);
    REQUIRE(j["rows"].size() == 1);
    CHECK(j["rows"][0]["name"] == "majority");
    CHECK(j["rows"][0]["macro_f1"].get<double>() == doctest::Approx(1.0 / 6.0).epsilon(1e-12));

    auto ab = run({"eval", "-f", dir.file("test.feat"), "--train-features", dir.file("train.feat"), "--ablation",
                   "--set", R"(hyperparameters={"n_estimators":10})"});
    REQUIRE_MESSAGE(ab.code == 0, ab.err);
    auto rows = json::parse(ab.out)["ablation"]["rows"];
    REQUIRE(rows.size() == 6);
    CHECK(rows[0]["dropped"].empty());
    CHECK(rows[3]["dropped"] == json::array({"C"}));
    CHECK(rows[3]["macro_f1"].get<double>() < rows[0]["macro_f1"].get<double>());

    CHECK(run({"eval", "-f", dir.file("test.feat")}).code == 2);
    CHECK(run({"eval", "-f", dir.file("test.feat"), "--ablation", "-m", "x"}).code == 2);
}

TEST_CASE("augment with offline stubs is lineage-valid") {
    TempDir dir;
    auto docs = labelled_docs(6);
    std::vector<corpus::Document> train(docs.begin(), docs.begin() + 15), test(docs.begin() + 15, docs.end());
    corpus::write_documents(dir.file("train.jsonl"), train);
    corpus::write_documents(dir.file("test.jsonl"), test);
    auto r = run({"augment", "-c", kConfig, "-i", dir.file("train.jsonl"), "--test", dir.file("test.jsonl"), "-o",
                  dir.file("aug.jsonl"), "--report", dir.file("aug.json")});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    auto out = corpus::read_documents(dir.file("aug.jsonl"));
    std::set<std::string> test_ids;
    for (const auto& d : test) test_ids.insert(d.id);
    CHECK_NOTHROW(augmentation::verify_no_leakage(out, test_ids));
    auto report = json::parse(slurp(dir.file("aug.json")));
    CHECK(report["by_provenance"]["human"] == 15);
    CHECK(report["by_provenance"]["rtt"] == 20);
    CHECK(report["records"] == out.size());

    // A round-trip variant of a test item smuggled into the training input.
    auto leaked = train;
    corpus::Document bad = test[0];
    bad.id = test[0].id + "#rtt-german";
    bad.provenance = corpus::Provenance::rtt;
    bad.source_id = test[0].id;
    leaked.push_back(bad);
    corpus::write_documents(dir.file("leaked.jsonl"), leaked);
    auto l = run({"augment", "-c", kConfig, "-i", dir.file("leaked.jsonl"), "--test", dir.file("test.jsonl"), "-o",
                  dir.file("aug2.jsonl")});
    CHECK(l.code == 3);
}

TEST_CASE("split writes three files and discretizes") {
    TempDir dir;
    corpus::write_documents(dir.file("docs.jsonl"), labelled_docs(10));
    auto r = run({"split", "-c", kConfig, "-i", dir.file("docs.jsonl"), "--out-dir", dir.file("out"),
                  "--discretize", "--report", "-"});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    auto j = json::parse(r.out);
    CHECK(j["sizes"]["train"] == 21);
    CHECK(j["sizes"]["validation"] == 4);
    CHECK(j["sizes"]["test"] == 5);
    CHECK(j.contains("boundaries"));
    std::size_t total = 0;
    for (const char* part : {"train", "validation", "test"})
        total += corpus::read_documents(dir.file(std::string("out/") + part + ".jsonl")).size();
    CHECK(total == 30);
}

TEST_CASE("uai subcommand centres the batch") {
    TempDir dir;
    corpus::write_documents(dir.file("docs.jsonl"), labelled_docs(2));
    auto r = run({"uai", "-c", kConfig, "-i", dir.file("docs.jsonl")});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    std::istringstream in(r.out);
    std::string line;
    double sum = 0;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        sum += json::parse(line)["uai"].get<double>();
        ++n;
    }
    CHECK(n == 6);
    CHECK(std::abs(sum) < 1e-9);
}

TEST_CASE("exit codes") {
    TempDir dir;
    corpus::write_documents(dir.file("docs.jsonl"), labelled_docs(1));
    CHECK(run({}).code == 2);
    CHECK(run({"--help"}).code == 0);
    CHECK(run({"score", "--bogus"}).code == 2);
    CHECK(run({"score", "-c", dir.file("absent.json"), "-i", dir.file("docs.jsonl")}).code == 2);
    CHECK(run({"score", "-c", kConfig, "--set", "bogus=1", "-i", dir.file("docs.jsonl")}).code == 2);
    CHECK(run({"score", "-c", kConfig, "--alpha", "0", "-i", dir.file("docs.jsonl")}).code == 2);
    CHECK(run({"score", "-i", dir.file("docs.jsonl")}).code == 2);  // no runtimes configured
    CHECK(run({"score", "-c", kConfig, "-i", dir.file("absent.jsonl")}).code == 2);

    dir.write("bad.jsonl", "{not json\n");
    CHECK(run({"score", "-c", kConfig, "-i", dir.file("bad.jsonl"), "-o", dir.file("x.feat")}).code == 3);

    dir.write("model.onnx", "stub");
    dir.write("vocab.txt", "[MASK]\nwe\n");
    const auto manifest = dir.write("manifest.json", R"({"role":"masked_lm","model_path":"model.onnx",
        "tokenizer_path":"vocab.txt","vocab_size":2})");
    auto r = run({"score", "-c", kConfig, "--set",
                  R"(runtimes.masked_lm={"kind":"exported","manifest":")" + manifest + "\"}", "-i",
                  dir.file("docs.jsonl"), "-o", dir.file("y.feat")});
    CHECK(r.code == 4);
    CHECK(r.err.find("manifest") != std::string::npos);
}

TEST_CASE("run config precedence and hashing") {
    TempDir dir;
    dir.write("c.json", R"({"seed": 7, "lexicons": {"affiliation": "a.txt"}})");
    dir.write("a.txt", "we\n");
    auto c = cli::RunConfig::load(dir.file("c.json"));
    CHECK(c.seed() == 7);
    CHECK(c.resolve("a.txt") == dir.file("a.txt"));
    CHECK_NOTHROW(c.validate());
    const auto h = c.hash();
    c.apply_override("grid.n_estimators=[10]");
    c.apply_override("augment.translation.kind=identity");
    CHECK(c.doc()["grid"]["n_estimators"] == json::array({10}));
    CHECK(c.doc()["augment"]["translation"]["kind"] == "identity");
    CHECK(c.hash() != h);
    c.set("seed", 9);
    CHECK(c.provenance()["seed"] == 9);
    CHECK(c.grid().size() == 4 * 4 * 4 * 4);
    CHECK_THROWS_AS(c.apply_override("novalue"), UsageError);

    dir.write("missing.json", R"({"lexicons": {"cogproc": "nope.txt"}})");
    CHECK_THROWS_AS(cli::RunConfig::load(dir.file("missing.json")).validate(), ConfigError);
    dir.write("drop.json", R"({"features": {"drop": ["Z"]}})");
    CHECK_THROWS_AS(cli::RunConfig::load(dir.file("drop.json")).validate(), ConfigError);

    auto a = cli::RunConfig::load(kConfig);
    auto b = cli::RunConfig::load(kConfig);
    CHECK(a.hash() == b.hash());
    CHECK(cli::RunConfig::load(std::nullopt).seed() == kDefaultSeed);
}

TEST_CASE("risk subcommand reports four rows") {
    TempDir dir;
    corpus::write_documents(dir.file("docs.jsonl"), labelled_docs(6));
    REQUIRE(run({"score", "-c", kConfig, "-i", dir.file("docs.jsonl"), "-o", dir.file("f.feat")}).code == 0);
    REQUIRE(run({"train", "-c", kConfig, "-f", dir.file("f.feat"), "-o", dir.file("m.json"), "--set",
                 R"(hyperparameters={"n_estimators":10})"})
                .code == 0);

    const char* sentences[] = {"The martyr will die for the brothers.", "The elite cabal runs a hidden agenda.",
                               "We should vote and talk with our neighbours."};
    std::vector<corpus::Document> risk_docs;
    for (auto c : kRiskLabels)
        for (int d = 0; d < 4; ++d) {
            corpus::Document doc;
            doc.id = std::string(to_string(c)) + std::to_string(d);
            doc.author = "a" + std::to_string(d % 2);
            doc.risk_label = c;
            for (int s = 0; s < 30; ++s) doc.text += std::string(sentences[to_index(c)]) + " ";
            risk_docs.push_back(doc);
        }
    corpus::write_documents(dir.file("risk.jsonl"), risk_docs);
    auto r = run({"risk", "-c", kConfig, "--corpus", dir.file("risk.jsonl"), "--fusion-model", dir.file("m.json"),
                  "--set", "risk.chunk_words=50", "--set", R"(hyperparameters={"n_estimators":10})"});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    auto j = json::parse(r.out);
    REQUIRE(j["task"]["rows"].size() == 4);
    CHECK(j["task"]["rows"][0]["macro_f1"].get<double>() == doctest::Approx(1.0 / 6.0));
    CHECK(j["chunks"]["train"].get<int>() + j["chunks"]["test"].get<int>() == j["chunks"]["total"].get<int>());

    CHECK(run({"risk", "-c", kConfig, "--corpus", dir.file("risk.jsonl"), "--fusion-model", dir.file("absent.json")})
              .code != 0);
}
