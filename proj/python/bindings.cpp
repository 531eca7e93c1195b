#include <pybind11/eigen.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "aan/anonymizer.hpp"
#include "aan/asv_eval.hpp"
#include "aan/dataset.hpp"
#include "aan/errors.hpp"
#include "aan/model.hpp"
#include "aan/pipeline.hpp"

namespace py = pybind11;
using namespace aan;

namespace {

PseudoPool pool_from_matrix(const Eigen::MatrixXd& m) {
  std::vector<Vector> rows;
  rows.reserve(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.emplace_back(m.row(r).transpose());
  return PseudoPool(std::move(rows), "python");
}

py::dict loss_dict(const LossBreakdown& l) {
  py::dict d;
  d["l_au"] = l.l_au;
  d["l_gender"] = l.l_gender;
  d["l_accent"] = l.l_accent;
  d["l_speaker"] = l.l_speaker;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "AAN speaker de-identification core";
  m.attr("__version__") = AAN_VERSION;

  py::register_exception<Error>(m, "AanError", PyExc_RuntimeError);

  py::class_<CorpusSpec>(m, "CorpusSpec")
      .def(py::init<>())
      .def_readwrite("n_speakers", &CorpusSpec::n_speakers)
      .def_readwrite("n_genders", &CorpusSpec::n_genders)
      .def_readwrite("n_accents", &CorpusSpec::n_accents)
      .def_readwrite("utterances_per_speaker", &CorpusSpec::utterances_per_speaker)
      .def_readwrite("dim", &CorpusSpec::dim)
      .def_property(
          "speaker_strength", [](const CorpusSpec& s) { return s.attribute_strength.speaker; },
          [](CorpusSpec& s, double v) { s.attribute_strength.speaker = v; })
      .def_property(
          "gender_strength", [](const CorpusSpec& s) { return s.attribute_strength.gender; },
          [](CorpusSpec& s, double v) { s.attribute_strength.gender = v; })
      .def_property(
          "accent_strength", [](const CorpusSpec& s) { return s.attribute_strength.accent; },
          [](CorpusSpec& s, double v) { s.attribute_strength.accent = v; })
      .def_readwrite("noise_sigma", &CorpusSpec::noise_sigma)
      .def_readwrite("seed", &CorpusSpec::seed)
      .def("validate", &CorpusSpec::validate);

  m.def("default_desk_spec", &default_desk_spec, py::arg("seed"));

  py::class_<Corpus>(m, "Corpus")
      .def_property_readonly("dim", [](const Corpus& c) { return c.dim; })
      .def("__len__", &Corpus::size)
      .def("matrix", &Corpus::matrix)
      .def_property_readonly("utterance_ids",
                             [](const Corpus& c) {
                               std::vector<std::string> out;
                               for (const auto& e : c.embeddings) out.push_back(e.utterance_id);
                               return out;
                             })
      .def_property_readonly("speaker_ids",
                             [](const Corpus& c) {
                               std::vector<std::string> out;
                               for (const auto& e : c.embeddings) out.push_back(e.speaker_id);
                               return out;
                             })
      .def("speaker_labels", &Corpus::speaker_labels)
      .def("gender_labels", &Corpus::gender_labels)
      .def("accent_labels", &Corpus::accent_labels)
      .def("to_csv", &corpus_to_csv)
      .def_static("from_csv", [](const std::string& text) { return corpus_from_csv(text); })
      .def(py::self == py::self);

  m.def("generate_corpus", &generate_corpus, py::arg("spec"));
  m.def(
      "split_corpus",
      [](const Corpus& c, std::size_t n) {
        auto s = split_corpus(c, n);
        return py::make_tuple(s.train, s.valid, s.test);
      },
      py::arg("corpus"), py::arg("n_heldout_per_speaker"));

  py::class_<AanDims>(m, "AanDims")
      .def(py::init<>())
      .def_readwrite("input", &AanDims::input)
      .def_readwrite("hidden", &AanDims::hidden)
      .def_readwrite("latent", &AanDims::latent)
      .def_readwrite("branch_hidden", &AanDims::branch_hidden)
      .def_readwrite("gender_classes", &AanDims::gender_classes)
      .def_readwrite("accent_classes", &AanDims::accent_classes)
      .def_readwrite("speaker_classes", &AanDims::speaker_classes)
      .def_static("for_corpus", &AanDims::for_corpus);

  py::class_<AanModel, std::shared_ptr<AanModel>>(m, "AanModel")
      .def_readonly("dims", &AanModel::dims)
      .def_readwrite("lambda_", &AanModel::lambda)
      .def("parameter_count", &AanModel::parameter_count)
      .def("serialize", [](const AanModel& a) { return py::bytes(serialize_model(a)); })
      .def_static("deserialize",
                  [](const py::bytes& b) { return std::make_shared<AanModel>(deserialize_model(std::string(b))); })
      .def("save", [](const AanModel& a, const std::filesystem::path& p) { save_model(a, p); })
      .def_static("load", [](const std::filesystem::path& p) { return std::make_shared<AanModel>(load_model(p)); });

  m.def(
      "build_aan",
      [](const AanDims& d, double lambda, std::uint64_t seed) {
        return std::make_shared<AanModel>(build_aan(d, lambda, seed));
      },
      py::arg("dims"), py::arg("lambda_") = 8.0, py::arg("seed") = 0);

  m.def(
      "forward",
      [](const AanModel& a, const Eigen::MatrixXd& x) {
        const AanOutput o = aan_forward(a, x);
        py::dict d;
        d["reconstruction"] = o.reconstruction;
        d["latent"] = o.latent;
        d["gender_logits"] = o.gender_logits;
        d["accent_logits"] = o.accent_logits;
        d["speaker_logits"] = o.speaker_logits;
        return d;
      },
      py::arg("model"), py::arg("x"));

  m.def(
      "loss",
      [](const AanModel& a, const Corpus& c) { return loss_dict(aan_loss(a, LabeledBatch::from_corpus(c))); },
      py::arg("model"), py::arg("corpus"));

  m.def(
      "train",
      [](const AanModel& init, const Corpus& train_set, const Corpus& valid_set, double lambda,
         std::size_t epochs, std::size_t batch_size, double lr, std::uint64_t seed, bool last_epoch) {
        TrainConfig t;
        t.lambda = lambda;
        t.epochs = epochs;
        t.batch_size = batch_size;
        t.adam.lr = lr;
        t.seed = seed;
        t.selection = last_epoch ? Selection::LastEpoch : Selection::BestValidLoss;
        TrainResult r;
        {
          py::gil_scoped_release release;
          r = train(init, train_set, valid_set, t);
        }
        py::list history;
        for (const auto& e : r.history.epochs) {
          py::dict d;
          d["epoch"] = e.epoch;
          d["train"] = loss_dict(e.train);
          d["valid"] = loss_dict(e.valid);
          d["valid_gender_acc"] = e.valid_gender_acc;
          d["valid_accent_acc"] = e.valid_accent_acc;
          d["valid_speaker_acc"] = e.valid_speaker_acc;
          history.append(d);
        }
        return py::make_tuple(std::make_shared<AanModel>(std::move(r.model)), history,
                              r.history.best_epoch, r.history.diverged);
      },
      py::arg("model"), py::arg("train"), py::arg("valid"), py::arg("lambda_") = 8.0,
      py::arg("epochs") = 200, py::arg("batch_size") = 32, py::arg("lr") = 1e-3, py::arg("seed") = 0,
      py::arg("last_epoch") = true);

  m.def("anonymize_aan1", &anonymize_aan1, py::arg("model"), py::arg("x"));
  m.def(
      "baseline_anonymize",
      [](const Eigen::MatrixXd& pool, const Vector& x, std::size_t top_k) {
        return baseline_anonymize(pool_from_matrix(pool), x, top_k);
      },
      py::arg("pool"), py::arg("x"), py::arg("top_k") = 10);
  m.def(
      "anonymize_aan2",
      [](const AanModel& a, const Eigen::MatrixXd& pool, const Vector& x, std::size_t top_k) {
        return anonymize_aan2(a, pool_from_matrix(pool), x, top_k);
      },
      py::arg("model"), py::arg("pool"), py::arg("x"), py::arg("top_k") = 10);

  m.def(
      "compute_eer",
      [](const std::vector<double>& t, const std::vector<double>& n) { return compute_eer(t, n); },
      py::arg("targets"), py::arg("nontargets"));
  m.def(
      "compute_cllr",
      [](const std::vector<double>& t, const std::vector<double>& n) { return compute_cllr(t, n); },
      py::arg("targets"), py::arg("nontargets"));
  m.def(
      "compute_min_cllr",
      [](const std::vector<double>& t, const std::vector<double>& n) { return compute_min_cllr(t, n); },
      py::arg("targets"), py::arg("nontargets"));

  m.def(
      "gradient_check",
      [](std::uint64_t seed) {
        const GradcheckResult r = gradient_check(seed);
        py::dict d;
        d["encoder"] = r.encoder;
        d["decoder"] = r.decoder;
        d["gender"] = r.gender;
        d["accent"] = r.accent;
        d["speaker"] = r.speaker;
        d["max"] = r.max();
        return d;
      },
      py::arg("seed") = 0);

  m.def("default_run_config", [] { return to_json(RunConfig::defaults()).dump(2); });
}
