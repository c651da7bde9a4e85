#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "cli.hpp"
#include "clifs/corpus.hpp"
#include "clifs/errors.hpp"
#include "clifs/evaluation.hpp"
#include "clifs/lexical.hpp"
#include "clifs/mlm.hpp"
#include "run_config.hpp"

namespace py = pybind11;
using namespace clifs;

namespace {

// Featurizer built from a run configuration file.
class Scorer {
public:
    explicit Scorer(const std::optional<std::string>& config_path, const std::vector<std::string>& overrides) {
        auto config = cli::RunConfig::load(config_path);
        for (const auto& o : overrides) config.apply_override(o);
        config.validate();
        stack_ = cli::build_feature_stack(config);
        provenance_ = config.provenance().dump();
    }

    py::dict featurize(const std::string& text) const {
        pipeline::DocumentFeatures f;
        {
            py::gil_scoped_release release;
            f = stack_.featurizer->featurize(text);
        }
        py::dict d;
        d["s_i_to_t"] = f.metrics.s_i_to_t;
        d["s_t_to_i"] = f.metrics.s_t_to_i;
        d["fusion_proximity"] = f.metrics.fusion_proximity;
        d["fictive_kinship"] = f.metrics.fictive_kinship;
        d["no_mentions_i_to_t"] = f.metrics.no_mentions_i_to_t;
        d["no_mentions_t_to_i"] = f.metrics.no_mentions_t_to_i;
        d["no_mentions_kinship"] = f.metrics.no_mentions_kinship;
        d["affiliation"] = f.counts.affiliation_rate;
        d["cogproc"] = f.counts.cogproc_rate;
        d["nuai"] = f.uai.nuai;
        d["vri_fusion"] = f.vri.vri_fusion();
        d["identification"] = f.vri.identification;
        d["vector"] = f.vector.values;
        return d;
    }

    std::vector<std::string> column_names() const { return stack_.featurizer->layout().column_names(); }
    std::size_t embedding_dim() const { return stack_.featurizer->layout().embedding_dim; }
    std::string provenance() const { return provenance_; }

private:
    cli::FeatureStack stack_;
    std::string provenance_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "clifs core bindings";
    m.attr("__version__") = CLIFS_VERSION;

    // Later registrations are tried first, so subclasses go after the base.
    const auto& base = py::register_exception<Error>(m, "ClifsError", PyExc_RuntimeError);
    py::register_exception<UsageError>(m, "UsageError", base.ptr());
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<FormatError>(m, "FormatError", base.ptr());
    py::register_exception<InferenceError>(m, "InferenceError", base.ptr());

    m.def("fusion_proximity", &mlm::fusion_proximity, py::arg("s_it"), py::arg("s_ti"));

    m.def(
        "classify_vri",
        [](double vri) {
            const auto c = lexical::classify_vri(vri);
            return py::make_tuple(std::string(lexical::to_string(c)),
                                  std::string(to_string(lexical::map_vri_class(c))));
        },
        py::arg("vri"), "(vri class, mapped risk label)");

    m.def(
        "discretize",
        [](const std::vector<double>& scores) {
            const auto d = corpus::discretize(scores);
            std::vector<std::string> labels;
            for (auto l : d.labels) labels.emplace_back(to_string(l));
            py::dict b;
            b["mean"] = d.boundaries.mean;
            b["sd"] = d.boundaries.sd;
            b["low_cut"] = d.boundaries.low_cut;
            b["high_cut"] = d.boundaries.high_cut;
            return py::make_tuple(labels, b);
        },
        py::arg("scores"));

    m.def(
        "macro_f1",
        [](const std::vector<int>& y_true, const std::vector<int>& y_pred) {
            if (y_true.size() != y_pred.size()) throw UsageError("macro_f1: length mismatch");
            return evaluation::macro_f1(y_true, y_pred).macro;
        },
        py::arg("y_true"), py::arg("y_pred"));

    m.def(
        "bootstrap_macro_f1",
        [](const std::vector<int>& y_true, const std::vector<int>& y_pred, std::size_t n_resamples,
           std::uint64_t seed) {
            const auto b = evaluation::bootstrap_macro_f1(y_true, y_pred, n_resamples, seed);
            return py::make_tuple(b.point, b.ci_low, b.ci_high);
        },
        py::arg("y_true"), py::arg("y_pred"), py::arg("n_resamples") = evaluation::kDefaultResamples,
        py::arg("seed") = kDefaultSeed, "(point, ci_low, ci_high)");

    m.def(
        "spearman",
        [](const std::vector<double>& x, const std::vector<double>& y) {
            const auto s = evaluation::spearman(x, y);
            return py::make_tuple(s.rs, s.p_value);
        },
        py::arg("x"), py::arg("y"), "(rs, p_value)");

    py::class_<Scorer>(m, "Scorer")
        .def(py::init<const std::optional<std::string>&, const std::vector<std::string>&>(), py::arg("config"),
             py::arg("overrides") = std::vector<std::string>{})
        .def("featurize", &Scorer::featurize, py::arg("text"))
        .def_property_readonly("column_names", &Scorer::column_names)
        .def_property_readonly("embedding_dim", &Scorer::embedding_dim)
        .def_property_readonly("provenance", &Scorer::provenance);

    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            std::ostringstream out, err;
            int code;
            {
                py::gil_scoped_release release;
                code = cli::run_cli(args, out, err);
            }
            return py::make_tuple(code, py::bytes(out.str()), err.str());
        },
        py::arg("args"), "(exit code, stdout bytes, stderr text)");
}
