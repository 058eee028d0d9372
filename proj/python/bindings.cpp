// Samples cross the boundary as JSONL text in the same format as corpus
// files; the Python package converts them to and from dicts.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>

#include "lolal/active_learner.hpp"
#include "lolal/experiment.hpp"
#include "lolal/featurizer.hpp"
#include "lolal/io.hpp"
#include "lolal/naive_bayes.hpp"
#include "lolal/synth_corpus.hpp"
#include "lolal/tokenizer.hpp"

namespace py = pybind11;
using namespace lolal;

namespace {

py::array_t<double> to_numpy(const Matrix& m) {
  py::array_t<double> out({m.rows(), m.cols()});
  auto view = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) view(i, j) = m(i, j);
  }
  return out;
}

Matrix from_numpy(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw Error("expected a 2-d array");
  Matrix m(a.shape(0), a.shape(1));
  auto view = a.unchecked<2>();
  for (py::ssize_t i = 0; i < a.shape(0); ++i) {
    for (py::ssize_t j = 0; j < a.shape(1); ++j) m(i, j) = view(i, j);
  }
  return m;
}

EmbeddingConfig embedding_config(const std::string& mode, std::size_t dim, std::size_t epochs, std::uint64_t seed) {
  auto parsed = parse_embedding_mode(mode);
  if (!parsed) throw Error("unknown embedding mode: " + mode);
  EmbeddingConfig c;
  c.mode = *parsed;
  c.dim = dim;
  c.epochs = epochs;
  c.seed = seed;
  return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Active learning for living-off-the-land command lines";

  py::register_exception<Error>(m, "LolalError", PyExc_ValueError);

  m.def("tokenize_line", [](const std::string& line) { return tokenize_line(line).tokens; }, py::arg("line"));
  m.def(
      "tokenize",
      [](const std::string& parent, const std::string& child) {
        RawSample s;
        s.parent = parent;
        s.child = child;
        return tokenize(s).tokens;
      },
      py::arg("parent"), py::arg("child"));

  m.def(
      "generate_corpus",
      [](const std::string& spec_json) {
        const CorpusSpec spec = spec_json.empty() ? CorpusSpec{} : CorpusSpec::from_json(spec_json);
        const Corpus corpus = generate_corpus(spec);
        return py::make_tuple(format_corpus(corpus.labeled), format_corpus(corpus.unlabeled));
      },
      py::arg("spec_json") = "");

  m.def("uncertainty_score", [](const std::vector<double>& p) { return uncertainty_score(p); }, py::arg("posterior"));

  m.def(
      "rank_round_robin",
      [](const std::vector<std::tuple<int, double, double>>& candidates, std::size_t n_classes,
         std::size_t max_uncertain, std::size_t max_anomalous) {
        std::vector<Candidate> cs;
        for (std::size_t i = 0; i < candidates.size(); ++i) {
          const auto& [cls, u, a] = candidates[i];
          cs.push_back({i, cls, u, a});
        }
        py::list out;
        for (const auto& e : rank_round_robin(cs, n_classes, max_uncertain, max_anomalous)) {
          out.append(py::make_tuple(e.index, e.predicted_class, std::string(to_string(e.reason)), e.score));
        }
        return out;
      },
      py::arg("candidates"), py::arg("n_classes"), py::arg("max_uncertain") = kUnlimited,
      py::arg("max_anomalous") = kUnlimited,
      "Candidates are (predicted_class, uncertainty, anomaly); returns (index, class, reason, score).");

  m.def(
      "nb_anomaly_scores",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& train, const std::vector<int>& assigned,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& query,
         const std::vector<int>& query_class) {
        const NaiveBayesModel model = fit_nb(from_numpy(train), assigned);
        const Matrix q = from_numpy(query);
        if (query_class.size() != q.rows()) throw Error("one class per query row is required");
        std::vector<double> out;
        for (std::size_t i = 0; i < q.rows(); ++i) out.push_back(model.anomaly_score(q.row(i), query_class[i]));
        return out;
      },
      py::arg("train"), py::arg("assigned"), py::arg("query"), py::arg("query_class"));

  py::class_<FeaturePipeline, std::shared_ptr<FeaturePipeline>>(m, "Pipeline")
      .def_static(
          "train",
          [](const std::string& corpus_jsonl, const std::string& mode, std::size_t dim, std::size_t epochs,
             std::uint64_t seed, const std::string& feature_set) {
            PipelineConfig config;
            config.embedding = embedding_config(mode, dim, epochs, seed);
            auto set = parse_feature_set(feature_set);
            if (!set) throw Error("unknown feature set: " + feature_set);
            config.feature_set = *set;
            const auto corpus = parse_corpus(corpus_jsonl);
            return std::make_shared<FeaturePipeline>(FeaturePipeline::train(corpus, config));
          },
          py::arg("corpus_jsonl"), py::arg("mode") = "fasttext", py::arg("dim") = 16, py::arg("epochs") = 20,
          py::arg("seed") = 1, py::arg("feature_set") = "S+V(W)")
      .def_static("load", [](const std::string& path) { return std::make_shared<FeaturePipeline>(FeaturePipeline::load(path)); })
      .def("save", &FeaturePipeline::save)
      .def_property_readonly("width", &FeaturePipeline::width)
      .def_property_readonly("names", &FeaturePipeline::names)
      .def_property_readonly("vocabulary", [](const FeaturePipeline& p) { return p.vocabulary().tokens(); })
      .def(
          "token_scores",
          [](const FeaturePipeline& p, const std::string& labeled_jsonl) {
            const auto labeled = parse_corpus(labeled_jsonl);
            const TokenScoreTable table = p.score_table(labeled);
            py::dict out;
            for (const auto& [key, score] : table.entries()) {
              out[py::make_tuple(key.first, std::string(to_string(key.second)))] = score;
            }
            return out;
          },
          py::arg("labeled_jsonl"))
      .def(
          "featurize",
          [](const FeaturePipeline& p, const std::string& samples_jsonl, const std::string& labeled_jsonl) {
            const auto labeled = parse_corpus(labeled_jsonl);
            const auto samples = parse_corpus(samples_jsonl);
            return to_numpy(p.featurize(samples, p.score_table(labeled)));
          },
          py::arg("samples_jsonl"), py::arg("labeled_jsonl"),
          "Token scores are built from the labeled samples.");

  m.def(
      "simulate",
      [](const std::string& labeled_jsonl, const std::string& extra_jsonl, const std::vector<std::string>& strategies,
         std::size_t iterations, std::size_t batch_size, std::size_t seed_labels, std::size_t runs, std::uint64_t seed,
         std::size_t dim, std::size_t epochs) {
        AlExperimentConfig config;
        config.strategies.clear();
        for (const auto& name : strategies) {
          auto s = parse_strategy(name);
          if (!s) throw Error("unknown strategy: " + name);
          config.strategies.push_back(*s);
        }
        config.iterations = iterations;
        config.batch_size = batch_size;
        config.seed_labels = seed_labels;
        config.runs = runs;
        config.seed = seed;
        config.pipeline.embedding = embedding_config("fasttext", dim, epochs, seed);
        const auto labeled = parse_corpus(labeled_jsonl);
        const auto extra = parse_corpus(extra_jsonl);
        py::gil_scoped_release release;
        return run_al_experiment(labeled, extra, config).to_json();
      },
      py::arg("labeled_jsonl"), py::arg("extra_jsonl") = "", py::arg("strategies") = std::vector<std::string>{"lolal", "random"},
      py::arg("iterations") = 50, py::arg("batch_size") = 5, py::arg("seed_labels") = 10, py::arg("runs") = 5,
      py::arg("seed") = 1, py::arg("dim") = 16, py::arg("epochs") = 20,
      "Returns the experiment report as JSON text.");
}
