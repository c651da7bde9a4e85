#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "cli.hpp"
#include "clifs/augmentation.hpp"
#include "clifs/corpus.hpp"
#include "clifs/errors.hpp"
#include "clifs/evaluation.hpp"
#include "clifs/features.hpp"
#include "clifs/models.hpp"
#include "clifs/risk.hpp"
#include "run_config.hpp"

#ifndef CLIFS_VERSION
#define CLIFS_VERSION "unknown"
#endif

namespace clifs::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Common {
    std::optional<std::string> config;
    std::optional<std::uint64_t> seed;
    std::optional<double> alpha;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("-c,--config", c.config, "JSON run configuration");
    cmd->add_option("--seed", c.seed, "Random seed (overrides the config)");
    cmd->add_option("--alpha", c.alpha, "Probability exponent (overrides the config)");
    cmd->add_option("--set", c.overrides, "Config override key.path=json (repeatable)");
}

RunConfig make_config(const Common& c) {
    auto config = RunConfig::load(c.config);
    for (const auto& o : c.overrides) config.apply_override(o);
    if (c.seed) config.set("seed", *c.seed);
    if (c.alpha) config.set("alpha", *c.alpha);
    config.validate();
    return config;
}

// Writes to `path`, or to the command's stdout stream when path is "-".
class Output {
public:
    Output(const std::string& path, std::ostream& fallback) {
        if (path == "-") {
            stream_ = &fallback;
            return;
        }
        file_.open(path, std::ios::binary);
        if (!file_) throw UsageError("cannot write " + path);
        stream_ = &file_;
    }
    std::ostream& stream() { return *stream_; }
    void close() {
        stream_->flush();
        if (!*stream_) throw Error("write failed");
    }

private:
    std::ofstream file_;
    std::ostream* stream_ = nullptr;
};

void write_report(const std::string& path, const json& report, std::ostream& out) {
    if (path.empty()) return;
    Output o(path, out);
    o.stream() << report.dump(2) << "\n";
    o.close();
}

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot open " + path);
    return in;
}

json group_list(const std::set<features::FeatureGroup>& groups) {
    json out = json::array();
    for (auto g : groups) out.push_back(features::short_name(g));
    return out;
}

std::set<features::FeatureGroup> groups_in(const std::vector<features::FeatureGroup>& tags) {
    return {tags.begin(), tags.end()};
}

// Column names for a possibly masked header.
std::vector<std::string> column_names(const features::FeatureFileHeader& h) {
    const features::Layout full{h.embedding_dim};
    const auto all = full.column_names();
    std::set<features::FeatureGroup> missing;
    for (auto g : features::kAllGroups)
        if (!groups_in(h.group_tags).contains(g)) missing.insert(g);
    const auto kept = features::kept_columns(full.tags(), missing);
    std::vector<std::string> names;
    if (kept.size() == h.group_tags.size()) {
        for (auto i : kept) names.push_back(all[i]);
    } else {
        for (std::size_t i = 0; i < h.group_tags.size(); ++i) names.push_back("col_" + std::to_string(i));
    }
    return names;
}

forest::Matrix matrix_of(const features::FeatureFile& file, const std::vector<std::size_t>& columns) {
    forest::Matrix x;
    x.reserve(file.records.size());
    for (const auto& r : file.records) {
        std::vector<double> row;
        row.reserve(columns.size());
        for (auto c : columns) row.push_back(r.vector.values[c]);
        x.push_back(std::move(row));
    }
    return x;
}

std::vector<int> class_labels(const features::FeatureFile& file, const std::string& what) {
    std::vector<int> y;
    for (const auto& r : file.records) {
        if (!r.label) throw UsageError(what + ": record " + r.id + " has no label");
        y.push_back(to_index(*r.label));
    }
    return y;
}

std::vector<double> score_targets(const features::FeatureFile& file, const std::string& what) {
    std::vector<double> y;
    for (const auto& r : file.records) {
        if (!r.vifs_score) throw UsageError(what + ": record " + r.id + " has no vifs_score");
        y.push_back(*r.vifs_score);
    }
    return y;
}

std::vector<std::size_t> all_columns(const features::FeatureFileHeader& h) {
    return iota_indices(h.group_tags.size());
}

// Columns of `file` that a model trained on `model_layout` expects.
std::vector<std::size_t> columns_for_model(const features::FeatureFileHeader& file,
                                           const std::optional<features::FeatureFileHeader>& model_layout) {
    if (!model_layout) return all_columns(file);
    if (model_layout->layout_version != file.layout_version || model_layout->embedding_dim != file.embedding_dim)
        throw FormatError("model layout (version " + std::to_string(model_layout->layout_version) + ", dim " +
                          std::to_string(model_layout->embedding_dim) + ") does not match the feature file (version " +
                          std::to_string(file.layout_version) + ", dim " + std::to_string(file.embedding_dim) + ")");
    std::set<features::FeatureGroup> drop;
    for (auto g : groups_in(file.group_tags))
        if (!groups_in(model_layout->group_tags).contains(g)) drop.insert(g);
    auto kept = features::kept_columns(file.group_tags, drop);
    std::vector<features::FeatureGroup> tags;
    for (auto i : kept) tags.push_back(file.group_tags[i]);
    if (tags != model_layout->group_tags) throw FormatError("feature file lacks columns the model was trained on");
    return kept;
}

json metrics_line(const std::string& id, const pipeline::DocumentFeatures& f) {
    return {{"id", id},
            {"s_i_to_t", f.metrics.s_i_to_t},
            {"s_t_to_i", f.metrics.s_t_to_i},
            {"fusion_proximity", f.metrics.fusion_proximity},
            {"fictive_kinship", f.metrics.fictive_kinship},
            {"no_mentions_i_to_t", f.metrics.no_mentions_i_to_t},
            {"no_mentions_t_to_i", f.metrics.no_mentions_t_to_i},
            {"no_mentions_kinship", f.metrics.no_mentions_kinship},
            {"affiliation", f.counts.affiliation_rate},
            {"cogproc", f.counts.cogproc_rate},
            {"nuai", f.uai.nuai},
            {"vri_fusion", f.vri.vri_fusion()},
            {"identification", f.vri.identification},
            {"zero_filled", group_list(f.vector.zero_filled)}};
}

// ClifsPredictor for fusion models trained on a masked layout.
class MaskedPredictor : public risk::FusionPredictor {
public:
    MaskedPredictor(const pipeline::Featurizer& featurizer, const models::ForestPipeline& model,
                    std::vector<std::size_t> columns)
        : featurizer_(featurizer), model_(model), columns_(std::move(columns)) {}

    Analysis analyze(std::string_view text) const override {
        const auto f = featurizer_.featurize(text);
        std::vector<double> row;
        row.reserve(columns_.size());
        for (auto c : columns_) row.push_back(f.vector.values[c]);
        return {f.metrics, fusion_label_from_index(model_.predict_class(row))};
    }

private:
    const pipeline::Featurizer& featurizer_;
    const models::ForestPipeline& model_;
    std::vector<std::size_t> columns_;
};

// ---- commands -------------------------------------------------------------

struct ScoreArgs {
    std::string input, out = "-", metrics_out, report;
};

void cmd_score(const RunConfig& config, const ScoreArgs& a, std::ostream& out) {
    auto stack = build_feature_stack(config);
    const auto layout = stack.featurizer->layout();
    auto in = open_input(a.input);
    Output features_out(a.out, out);
    std::optional<Output> metrics_out;
    if (!a.metrics_out.empty()) metrics_out.emplace(a.metrics_out, out);

    features::FeatureWriter writer(features_out.stream(),
                                   {features::kLayoutVersion, layout.embedding_dim, layout.tags()});
    corpus::DocumentReader reader(in);
    corpus::Document doc;
    std::size_t n = 0;
    while (reader.next(doc)) {
        const auto f = stack.featurizer->featurize(doc.text);
        features::FeatureRecord r;
        r.id = doc.id;
        r.vector = f.vector;
        r.label = doc.label;
        r.vifs_score = doc.vifs_score;
        r.risk_label = doc.risk_label;
        r.provenance = std::string(corpus::to_string(doc.provenance));
        r.source_id = doc.source_id;
        writer.write(r);
        if (metrics_out) metrics_out->stream() << metrics_line(doc.id, f).dump() << "\n";
        ++n;
    }
    features_out.close();
    if (metrics_out) metrics_out->close();
    write_report(a.report,
                 {{"provenance", config.provenance()},
                  {"command", "score"},
                  {"documents", n},
                  {"embedding_dim", layout.embedding_dim}},
                 out);
}

struct UaiArgs {
    std::string input, out = "-", report;
};

void cmd_uai(const RunConfig& config, const UaiArgs& a, std::ostream& out) {
    const auto lex = load_lexicons(config, false);
    auto in = open_input(a.input);
    corpus::DocumentReader reader(in);
    corpus::Document doc;
    std::vector<std::string> ids;
    std::vector<lexical::LexicalCounts> counts;
    while (reader.next(doc)) {
        ids.push_back(doc.id);
        counts.push_back(lexical::count(doc.text, lex.affiliation, lex.cogproc));
    }
    const auto batch = lexical::uai_batch(counts);
    Output o(a.out, out);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const auto& s = batch.scores[i];
        o.stream() << json{{"id", ids[i]},
                           {"uai", s.uai},
                           {"nuai", s.nuai},
                           {"affiliation", s.affiliation},
                           {"cogproc", s.cogproc}}
                          .dump()
                   << "\n";
    }
    o.close();
    write_report(a.report,
                 {{"provenance", config.provenance()},
                  {"command", "uai"},
                  {"documents", ids.size()},
                  {"affiliation_zero_variance", batch.affiliation_zero_variance},
                  {"cogproc_zero_variance", batch.cogproc_zero_variance}},
                 out);
}

struct TrainArgs {
    std::string features, out, task = "classification", report;
};

void cmd_train(const RunConfig& config, const TrainArgs& a, std::ostream& out) {
    const auto file = features::read_feature_file(a.features);
    if (file.records.empty()) throw UsageError("train: " + a.features + " has no records");
    const auto drop = config.dropped_groups();
    const auto kept = features::kept_columns(file.header.group_tags, drop);
    if (kept.empty()) throw ConfigError("train: features.drop removes every column");
    const auto x = matrix_of(file, kept);

    features::FeatureFileHeader layout = file.header;
    layout.group_tags.clear();
    for (auto i : kept) layout.group_tags.push_back(file.header.group_tags[i]);

    const auto options = config.fit_options();
    const auto fixed = config.fixed_hyperparameters();
    models::ForestPipeline model;
    std::optional<models::CvReport> cv;
    if (a.task == "classification") {
        const auto y = class_labels(file, "train");
        if (fixed) {
            model = models::train_classifier(x, y, *fixed, options.seed, options.weighted);
        } else {
            auto fit = models::fit_classifier(x, y, config.grid(), options);
            model = std::move(fit.model);
            cv = std::move(fit.report);
        }
    } else if (a.task == "regression") {
        const auto y = score_targets(file, "train");
        if (fixed) {
            model = models::train_regressor(x, y, *fixed, options.seed);
        } else {
            auto fit = models::fit_regressor(x, y, config.grid(), options);
            model = std::move(fit.model);
            cv = std::move(fit.report);
        }
    } else {
        throw UsageError("train: --task must be classification or regression");
    }
    model.layout = layout;
    model.save(a.out);

    const auto names = column_names(layout);
    const auto imp = models::importances(model);
    json importance = json::array();
    for (std::size_t i = 0; i < imp.size(); ++i) importance.push_back({{"column", names[i]}, {"importance", imp[i]}});
    json report{{"provenance", config.provenance()},
                {"command", "train"},
                {"task", a.task},
                {"records", file.records.size()},
                {"dropped_groups", group_list(drop)},
                {"hyperparameters", models::to_json(model.hyperparameters())},
                {"importances", importance}};
    if (cv) report["cv"] = cv->to_json();
    write_report(a.report, report, out);
}

struct EvalArgs {
    std::string features, model, train_features, out = "-";
    bool ablation = false;
};

void cmd_eval(const RunConfig& config, const EvalArgs& a, std::ostream& out) {
    if (a.model.empty() && a.train_features.empty())
        throw UsageError("eval: give --model, --train-features or both");
    const auto test = features::read_feature_file(a.features);
    if (test.records.empty()) throw UsageError("eval: " + a.features + " has no records");
    const bool bootstrap = config.bootstrap();
    const auto seed = config.seed();

    json rows = json::array();
    std::optional<models::ForestPipeline> model;
    if (!a.model.empty()) {
        model = models::ForestPipeline::load(a.model);
        const auto x = matrix_of(test, columns_for_model(test.header, model->layout));
        if (model->task() == forest::Task::classification) {
            const auto y = class_labels(test, "eval");
            const auto pred = model->predict_classes(x);
            rows.push_back(evaluation::classification_report("model", y, pred, bootstrap, seed).to_json());
        } else {
            const auto y = score_targets(test, "eval");
            const auto pred = model->predict_values(x);
            rows.push_back(evaluation::regression_report("model", y, pred, bootstrap, seed).to_json());
        }
    }

    std::optional<features::FeatureFile> train;
    if (!a.train_features.empty()) {
        train = features::read_feature_file(a.train_features);
        const auto y_train = class_labels(*train, "eval --train-features");
        const auto y_test = class_labels(test, "eval");
        rows.push_back(evaluation::majority_baseline(y_train, y_test).to_json());
    }

    json report{{"provenance", config.provenance()}, {"command", "eval"}, {"records", test.records.size()},
                {"rows", rows}};

    if (a.ablation) {
        if (!train) throw UsageError("eval: --ablation needs --train-features");
        if (train->header.group_tags != test.header.group_tags)
            throw FormatError("eval: training and test feature files have different layouts");
        const auto options = config.fit_options();
        auto hp = config.fixed_hyperparameters().value_or(models::Hyperparameters{});
        if (model && model->task() == forest::Task::classification) hp = model->hyperparameters();
        const evaluation::Trainer trainer = [&](const forest::Matrix& xtr, const std::vector<int>& ytr,
                                                const forest::Matrix& xte) {
            return models::train_classifier(xtr, ytr, hp, options.seed, options.weighted).predict_classes(xte);
        };
        const auto cols = all_columns(test.header);
        const auto table = evaluation::ablate(matrix_of(*train, cols), class_labels(*train, "eval"),
                                              matrix_of(test, cols), class_labels(test, "eval"),
                                              test.header.group_tags, trainer);
        json ab = json::array();
        for (const auto& r : table)
            ab.push_back({{"dropped", group_list(r.dropped)}, {"macro_f1", r.macro_f1}, {"delta", r.delta}});
        report["ablation"] = {{"hyperparameters", models::to_json(hp)}, {"rows", ab}};
    }
    write_report(a.out, report, out);
}

struct AugmentArgs {
    std::string input, test, out, report;
};

void cmd_augment(const RunConfig& config, const AugmentArgs& a, std::ostream& out, std::ostream& err) {
    const auto training = corpus::read_documents(a.input);
    std::set<std::string> test_ids;
    if (!a.test.empty())
        for (const auto& d : corpus::read_documents(a.test)) test_ids.insert(d.id);

    auto clients = augment_clients(config);
    std::vector<std::string> warnings;
    const auto result = augmentation::augment(training, test_ids, {clients.translation.get(), clients.generation.get()},
                                              augment_config(config), &warnings);
    for (const auto& w : warnings) err << "warning: " << w << "\n";

    Output o(a.out, out);
    corpus::write_documents(o.stream(), result.records);
    o.close();

    std::map<std::string, std::size_t> by_provenance;
    for (const auto& d : result.records) ++by_provenance[std::string(corpus::to_string(d.provenance))];
    const auto hist = result.class_histogram();
    write_report(a.report,
                 {{"provenance", config.provenance()},
                  {"command", "augment"},
                  {"records", result.records.size()},
                  {"by_provenance", by_provenance},
                  {"class_histogram", {{"low", hist[0]}, {"medium", hist[1]}, {"high", hist[2]}}},
                  {"test_ids", test_ids.size()},
                  {"warnings", warnings}},
                 out);
}

struct RiskArgs {
    std::string corpus, fusion_model, out = "-";
};

void cmd_risk(const RunConfig& config, const RiskArgs& a, std::ostream& out) {
    std::size_t chunk_words = corpus::kDefaultChunkWords;
    double train_fraction = 0.8;
    if (const auto* r = config.section("risk")) {
        chunk_words = r->value("chunk_words", chunk_words);
        train_fraction = r->value("train_fraction", train_fraction);
    }
    auto stack = build_feature_stack(config);
    const auto& manifest = stack.featurizer->lexicons().vri;
    if (!manifest) throw ConfigError("risk: lexicons.vri_manifest is required");
    const auto model = models::ForestPipeline::load(a.fusion_model);
    if (!model.trained() || model.task() != forest::Task::classification)
        throw ConfigError("risk: " + a.fusion_model + " is not a trained fusion classifier");
    const auto layout = stack.featurizer->layout();
    const auto columns =
        columns_for_model({features::kLayoutVersion, layout.embedding_dim, layout.tags()}, model.layout);
    MaskedPredictor predictor(*stack.featurizer, model, columns);

    const auto chunks = risk::prepare(corpus::read_documents(a.corpus), chunk_words);
    const auto split = risk::split_chunks(chunks, train_fraction, config.seed());
    auto grid = config.grid();
    if (const auto hp = config.fixed_hyperparameters()) {
        grid.n_estimators = {hp->n_estimators};
        grid.max_depth = {hp->max_depth};
        grid.min_samples_leaf = {hp->min_samples_leaf};
        grid.min_samples_split = {hp->min_samples_split};
        grid.scalers = {hp->scaler};
    }
    auto options = config.fit_options();
    options.weighted = false;
    const auto task = risk::run_task(split.train, split.test, predictor, *manifest, grid, options);
    json report{{"provenance", config.provenance()},
                {"command", "risk"},
                {"chunks", {{"total", chunks.size()}, {"train", split.train.size()}, {"test", split.test.size()}}},
                {"chunk_words", chunk_words},
                {"task", task.to_json()}};
    write_report(a.out, report, out);
}

struct SplitArgs {
    std::string input, out_dir, report;
    bool discretize = false;
};

void cmd_split(const RunConfig& config, const SplitArgs& a, std::ostream& out) {
    auto docs = corpus::read_documents(a.input);
    json report{{"provenance", config.provenance()}, {"command", "split"}};
    if (a.discretize) {
        std::vector<double> scores;
        for (const auto& d : docs) {
            if (!d.vifs_score) throw UsageError("split: record " + d.id + " has no vifs_score to discretize");
            scores.push_back(*d.vifs_score);
        }
        const auto disc = corpus::discretize(scores);
        for (std::size_t i = 0; i < docs.size(); ++i) docs[i].label = disc.labels[i];
        const auto& b = disc.boundaries;
        report["boundaries"] = {{"mean", b.mean}, {"sd", b.sd}, {"low_cut", b.low_cut}, {"high_cut", b.high_cut}};
    }
    const auto spec = config.split_spec();
    const auto parts = corpus::split(docs, spec);
    fs::create_directories(a.out_dir);
    const auto dir = fs::path(a.out_dir);
    corpus::write_documents((dir / "train.jsonl").string(), parts.train);
    corpus::write_documents((dir / "validation.jsonl").string(), parts.validation);
    corpus::write_documents((dir / "test.jsonl").string(), parts.test);
    report["sizes"] = {{"train", parts.train.size()},
                       {"validation", parts.validation.size()},
                       {"test", parts.test.size()}};
    report["fractions"] = {{"train", spec.train}, {"validation", spec.validation}, {"test", spec.test}};
    write_report(a.report, report, out);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Identity-fusion feature scoring, model training and evaluation", "clifs"};
    app.require_subcommand(1);
    app.set_version_flag("--version", CLIFS_VERSION);

    Common common;

    ScoreArgs score;
    auto* s = app.add_subcommand("score", "Featurize a dataset (streaming)");
    add_common(s, common);
    s->add_option("-i,--input", score.input, "Dataset (.jsonl)")->required();
    s->add_option("-o,--out", score.out, "Feature file, '-' for stdout");
    s->add_option("--metrics-out", score.metrics_out, "Per-document metrics (.jsonl)");
    s->add_option("--report", score.report, "Run report (.json)");

    UaiArgs uai;
    auto* u = app.add_subcommand("uai", "Batch UAI and nUAI");
    add_common(u, common);
    u->add_option("-i,--input", uai.input, "Dataset (.jsonl)")->required();
    u->add_option("-o,--out", uai.out, "Scores (.jsonl), '-' for stdout");
    u->add_option("--report", uai.report, "Run report (.json)");

    TrainArgs train;
    auto* t = app.add_subcommand("train", "Fit a random-forest classifier or regressor");
    add_common(t, common);
    t->add_option("-f,--features", train.features, "Training feature file")->required();
    t->add_option("-o,--out", train.out, "Model file (.json)")->required();
    t->add_option("--task", train.task, "classification | regression")
        ->check(CLI::IsMember({"classification", "regression"}));
    t->add_option("--report", train.report, "Training report (.json)");

    EvalArgs eval;
    auto* e = app.add_subcommand("eval", "Evaluate a model and baselines on a feature file");
    add_common(e, common);
    e->add_option("-f,--features", eval.features, "Test feature file")->required();
    e->add_option("-m,--model", eval.model, "Model file");
    e->add_option("--train-features", eval.train_features, "Training feature file (majority baseline, ablation)");
    e->add_flag("--ablation", eval.ablation, "Retrain without each feature group");
    e->add_option("-o,--out", eval.out, "Report (.json), '-' for stdout");

    AugmentArgs aug;
    auto* g = app.add_subcommand("augment", "Round-trip translation, generation and oversampling");
    add_common(g, common);
    g->add_option("-i,--input", aug.input, "Training dataset (.jsonl)")->required();
    g->add_option("--test", aug.test, "Test dataset whose ids must not leak");
    g->add_option("-o,--out", aug.out, "Augmented dataset (.jsonl)")->required();
    g->add_option("--report", aug.report, "Run report (.json)");

    RiskArgs risk_args;
    auto* r = app.add_subcommand("risk", "Violence-risk task with and without fusion features");
    add_common(r, common);
    r->add_option("--corpus", risk_args.corpus, "Risk corpus (.jsonl)")->required();
    r->add_option("--fusion-model", risk_args.fusion_model, "Trained fusion classifier")->required();
    r->add_option("-o,--out", risk_args.out, "Report (.json), '-' for stdout");

    SplitArgs split;
    auto* p = app.add_subcommand("split", "Train/validation/test split");
    add_common(p, common);
    p->add_option("-i,--input", split.input, "Dataset (.jsonl)")->required();
    p->add_option("--out-dir", split.out_dir, "Directory for train/validation/test.jsonl")->required();
    p->add_flag("--discretize", split.discretize, "Label from vifs_score before splitting");
    p->add_option("--report", split.report, "Run report (.json)");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& ex) {
        const int code = app.exit(ex, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        const auto config = make_config(common);
        if (s->parsed()) cmd_score(config, score, out);
        else if (u->parsed()) cmd_uai(config, uai, out);
        else if (t->parsed()) cmd_train(config, train, out);
        else if (e->parsed()) cmd_eval(config, eval, out);
        else if (g->parsed()) cmd_augment(config, aug, out, err);
        else if (r->parsed()) cmd_risk(config, risk_args, out);
        else if (p->parsed()) cmd_split(config, split, out);
        return 0;
    } catch (const Error& ex) {
        err << "error: " << ex.what() << "\n";
        return ex.exit_code();
    } catch (const std::exception& ex) {
        err << "error: " << ex.what() << "\n";
        return 1;
    }
}

}  // namespace clifs::cli
