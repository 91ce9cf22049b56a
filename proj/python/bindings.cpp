#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "styleflow/augment.hpp"
#include "styleflow/checkpoint.hpp"
#include "styleflow/commands.hpp"
#include "styleflow/config.hpp"
#include "styleflow/error.hpp"
#include "styleflow/metrics.hpp"
#include "styleflow/model.hpp"

namespace py = pybind11;
using namespace styleflow;

namespace {

py::array_t<double> to_numpy(const Tensor& t) {
    std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
    py::array_t<double> out(shape);
    std::copy(t.data().begin(), t.data().end(), out.mutable_data());
    return out;
}

// Loaded model plus the text-level operations on it.
class LoadedModel {
public:
    explicit LoadedModel(const std::filesystem::path& path) : model_(load_model(path).first) {}

    std::string transfer_text(const std::string& sentence, int target, bool replace_style) const {
        TransferOptions opts;
        opts.replace_style = replace_style;
        const TransferRecord r = transfer(model_, tokens(sentence, 1 - target), target, opts);
        return detokenize(r.output, model_.vocab);
    }

    py::array_t<double> encode_text(const std::string& sentence) const {
        return to_numpy(encode(model_, tokens(sentence, 0)).values);
    }

    double log_density_text(const std::string& sentence) const { return log_density(encode(model_, tokens(sentence, 0))); }

    std::vector<double> classify_text(const std::string& sentence) const {
        return model_.scorer.classify(tokens(sentence, 0));
    }

    std::vector<std::string> augment_text(const std::string& sentence, int label, double epsilon, std::size_t samples,
                                          std::uint64_t seed) const {
        PerturbationConfig pc;
        pc.epsilon = epsilon;
        pc.samples = samples;
        pc.seed = seed;
        std::vector<std::string> out;
        for (const AugmentedSample& s : augment(model_, tokens(sentence, label), pc))
            out.push_back(render_sample(s, model_.vocab));
        return out;
    }

    std::size_t vocab_size() const { return model_.vocab.size(); }
    std::size_t model_dim() const { return model_.chain.model_dim(); }

private:
    TokenSequence tokens(const std::string& sentence, int label) const {
        return tokenize(sentence, model_.vocab, label);
    }

    Model model_;
};

py::dict report_dict(const EvalReport& r) {
    py::dict d;
    d["rows"] = r.rows;
    d["acc"] = r.acc;
    d["self_bleu"] = r.self_bleu;
    d["ref_bleu"] = r.ref_bleu ? py::cast(*r.ref_bleu) : py::none();
    d["ppl"] = r.ppl ? py::cast(*r.ppl) : py::none();
    d["ppl_source"] = r.ppl_source ? py::cast(*r.ppl_source) : py::none();
    return d;
}

Config make_config(const std::optional<std::filesystem::path>& path, const py::dict& overrides) {
    Config c = path ? load_config(*path) : Config{};
    for (const auto& [k, v] : overrides) set_config_value(c, py::str(k).cast<std::string>(), py::str(v).cast<std::string>());
    c.validate();
    return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Flow-based text style transfer";

    static PyObject* error_type = PyErr_NewException("styleflow._core.StyleflowError", PyExc_RuntimeError, nullptr);
    m.attr("StyleflowError") = py::handle(error_type);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            PyErr_SetString(error_type, (std::string(to_string(e.kind())) + ": " + e.what()).c_str());
        }
    });

    py::class_<Config>(m, "Config")
        .def(py::init(&make_config), py::arg("path") = std::nullopt, py::arg("overrides") = py::dict())
        .def("get", [](const Config& c, const std::string& key) { return get_config_value(c, key); })
        .def("set", [](Config& c, const std::string& key, const std::string& value) { set_config_value(c, key, value); })
        .def("resolve", [](const Config& c, const std::string& p) { return c.resolve(p); })
        .def_property(
            "workspace", [](const Config& c) { return c.workspace; },
            [](Config& c, const std::filesystem::path& p) { c.workspace = p; })
        .def("__str__", &format_config);

    m.def("config_keys", [] {
        std::vector<std::string> out;
        for (const ConfigKey& k : config_keys()) out.push_back(k.name);
        return out;
    });

    // Pipeline commands; each returns its log text.
    auto logged = [](auto f) {
        return [f](const Config& c) {
            std::ostringstream log;
            f(c, log);
            return log.str();
        };
    };
    m.def("synth", logged([](const Config& c, std::ostream& o) { cmd_synth(c, o); }));
    m.def("train_scorer", logged([](const Config& c, std::ostream& o) { cmd_train_scorer(c, o); }));
    m.def("train", logged([](const Config& c, std::ostream& o) { cmd_train(c, o); }));
    m.def(
        "transfer",
        [](const Config& c, const std::string& input, std::optional<std::string> target) {
            std::ostringstream log;
            cmd_transfer(c, input, log, target);
            return log.str();
        },
        py::arg("config"), py::arg("input") = "", py::arg("target") = std::nullopt);
    m.def(
        "augment",
        [](const Config& c, const std::string& input) {
            std::ostringstream log;
            cmd_augment(c, input, log);
            return log.str();
        },
        py::arg("config"), py::arg("input") = "");
    m.def(
        "evaluate",
        [](const Config& c, const std::string& input) {
            std::ostringstream log;
            return report_dict(cmd_eval(c, input, log));
        },
        py::arg("config"), py::arg("input") = "");

    py::class_<LoadedModel>(m, "Model")
        .def(py::init<const std::filesystem::path&>(), py::arg("checkpoint"))
        .def("transfer", &LoadedModel::transfer_text, py::arg("sentence"), py::arg("target"),
             py::arg("replace_style") = true)
        .def("encode", &LoadedModel::encode_text)
        .def("log_density", &LoadedModel::log_density_text)
        .def("classify", &LoadedModel::classify_text)
        .def("augment", &LoadedModel::augment_text, py::arg("sentence"), py::arg("label"), py::arg("epsilon") = 0.1,
             py::arg("samples") = 4, py::arg("seed") = 1)
        .def_property_readonly("vocab_size", &LoadedModel::vocab_size)
        .def_property_readonly("model_dim", &LoadedModel::model_dim);

    m.def(
        "bleu",
        [](const std::string& candidate, const std::vector<std::string>& references) {
            std::vector<Words> refs;
            for (const auto& r : references) refs.push_back(split_words(r, false));
            return bleu(split_words(candidate, false), refs);
        },
        py::arg("candidate"), py::arg("references"));

    py::class_<NGramLM>(m, "NGramLM")
        .def(py::init<std::size_t, double>(), py::arg("order") = 5, py::arg("discount") = 0.75)
        .def("train",
             [](NGramLM& lm, const std::vector<std::string>& sentences) {
                 std::vector<Words> ws;
                 for (const auto& s : sentences) ws.push_back(split_words(s, false));
                 lm.train(ws);
             })
        .def("perplexity", [](const NGramLM& lm, const std::vector<std::string>& sentences) {
            std::vector<Words> ws;
            for (const auto& s : sentences) ws.push_back(split_words(s, false));
            return perplexity(lm, ws).perplexity;
        });
}
