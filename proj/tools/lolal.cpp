// Command-line front end: corpus generation, embedding training, experiments
// and the labeling service.

#include <csignal>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "httplib.h"
#include "lolal/active_learner.hpp"
#include "lolal/embedding.hpp"
#include "lolal/experiment.hpp"
#include "lolal/featurizer.hpp"
#include "lolal/io.hpp"
#include "lolal/labeling_service.hpp"
#include "lolal/synth_corpus.hpp"
#include "lolal/tokenizer.hpp"

namespace fs = std::filesystem;
using namespace lolal;

namespace {

httplib::Server* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

std::vector<RawSample> read_optional(const std::string& path) {
  return path.empty() ? std::vector<RawSample>{} : read_corpus(path);
}

EmbeddingMode mode_or_throw(const std::string& text) {
  auto mode = parse_embedding_mode(text);
  if (!mode) throw Error("unknown embedding mode: " + text);
  return *mode;
}

struct EmbeddingOptions {
  std::string mode = "fasttext";
  std::size_t dim = 16;
  std::size_t window = 5;
  std::size_t epochs = 20;
  std::size_t min_count = 5;
  std::uint64_t seed = 1;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--mode", mode, "word2vec or fasttext")->capture_default_str();
    cmd->add_option("--dim", dim)->capture_default_str();
    cmd->add_option("--window", window)->capture_default_str();
    cmd->add_option("--epochs", epochs)->capture_default_str();
    cmd->add_option("--min-count", min_count)->capture_default_str();
  }

  EmbeddingConfig config() const {
    EmbeddingConfig c;
    c.mode = mode_or_throw(mode);
    c.dim = dim;
    c.window = window;
    c.epochs = epochs;
    c.min_count = min_count;
    c.seed = seed;
    return c;
  }
};

FeatureSet feature_set_or_throw(const std::string& text) {
  auto set = parse_feature_set(text);
  if (!set) throw Error("unknown feature set: " + text);
  return *set;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Active learning for living-off-the-land command lines"};
  app.require_subcommand(1);

  // gen-corpus
  auto* gen = app.add_subcommand("gen-corpus", "Generate a labeled synthetic corpus and an unlabeled pool");
  std::string gen_spec, gen_out, gen_pool;
  std::optional<std::uint64_t> gen_seed;
  std::optional<double> gen_scale;
  gen->add_option("--spec", gen_spec, "Corpus spec JSON; defaults are used when omitted");
  gen->add_option("--out", gen_out, "Labeled corpus (JSONL)")->required();
  gen->add_option("--pool", gen_pool, "Unlabeled pool (JSONL); defaults to <out stem>.pool.jsonl");
  gen->add_option("--seed", gen_seed);
  gen->add_option("--scale", gen_scale);

  // train-embeddings
  auto* emb = app.add_subcommand("train-embeddings", "Train token embeddings on a corpus");
  EmbeddingOptions emb_opts;
  std::string emb_in, emb_out;
  emb_opts.add_to(emb);
  emb->add_option("--seed", emb_opts.seed)->capture_default_str();
  emb->add_option("--in", emb_in)->required();
  emb->add_option("--out", emb_out)->required();

  // simulate
  auto* sim = app.add_subcommand("simulate", "Run the active-learning loop with an oracle labeler");
  std::vector<std::string> sim_strategies{"lolal", "random"};
  AlExperimentConfig sim_config;
  EmbeddingOptions sim_emb;
  std::string sim_corpus, sim_pool, sim_out, sim_features = "S+V(W)";
  bool sim_quiet = false;
  sim->add_option("--strategy", sim_strategies, "lolal, lolal-lr, uncertainty, anomaly, random")
      ->delimiter(',')
      ->capture_default_str();
  sim->add_option("--iters", sim_config.iterations)->capture_default_str();
  sim->add_option("--batch", sim_config.batch_size)->capture_default_str();
  sim->add_option("--seed-labels", sim_config.seed_labels)->capture_default_str();
  sim->add_option("--runs", sim_config.runs)->capture_default_str();
  sim->add_option("--seed", sim_config.seed)->capture_default_str();
  sim->add_option("--features", sim_features)->capture_default_str();
  sim_emb.add_to(sim);
  sim->add_option("--corpus", sim_corpus, "Labeled pool; labels act as the oracle")->required();
  sim->add_option("--pool", sim_pool, "Extra unlabeled text for embedding training");
  sim->add_option("--out", sim_out)->required();
  sim->add_flag("--quiet", sim_quiet);

  // feature-eval
  auto* fe = app.add_subcommand("feature-eval", "Cross-validate every feature set and embedding mode");
  FeatureEvalConfig fe_config;
  EmbeddingOptions fe_emb;
  std::string fe_corpus, fe_pool, fe_out;
  fe->add_option("--folds", fe_config.folds)->capture_default_str();
  fe->add_option("--seed", fe_config.seed)->capture_default_str();
  fe_emb.add_to(fe);
  fe->add_option("--corpus", fe_corpus)->required();
  fe->add_option("--pool", fe_pool);
  fe->add_option("--out", fe_out)->required();

  // score-table
  auto* st = app.add_subcommand("score-table", "Train the pipeline and write token scores as CSV");
  EmbeddingOptions st_emb;
  std::string st_corpus, st_pool, st_out;
  st_emb.add_to(st);
  st->add_option("--seed", st_emb.seed)->capture_default_str();
  st->add_option("--corpus", st_corpus)->required();
  st->add_option("--pool", st_pool);
  st->add_option("--out", st_out)->required();

  // featurize
  auto* ft = app.add_subcommand("featurize", "Write the feature matrix of a corpus as CSV");
  EmbeddingOptions ft_emb;
  std::string ft_corpus, ft_pool, ft_out, ft_features = "S+V(W)";
  ft_emb.add_to(ft);
  ft->add_option("--seed", ft_emb.seed)->capture_default_str();
  ft->add_option("--features", ft_features)->capture_default_str();
  ft->add_option("--corpus", ft_corpus, "Labeled samples used for token scores")->required();
  ft->add_option("--pool", ft_pool, "Samples to featurize; the corpus itself when omitted");
  ft->add_option("--out", ft_out)->required();

  // serve
  auto* srv = app.add_subcommand("serve", "Run the labeling service");
  std::string srv_corpus, srv_pool, srv_state, srv_host = "127.0.0.1";
  int srv_port = 8080;
  EmbeddingOptions srv_emb;
  srv_emb.add_to(srv);
  srv->add_option("--seed", srv_emb.seed)->capture_default_str();
  srv->add_option("--corpus", srv_corpus, "Labeled corpus")->required();
  srv->add_option("--pool", srv_pool, "Unlabeled pool");
  srv->add_option("--state", srv_state, "State directory")->required();
  srv->add_option("--host", srv_host)->capture_default_str();
  srv->add_option("--port", srv_port, "0 picks a free port")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      CorpusSpec spec = gen_spec.empty() ? CorpusSpec{} : CorpusSpec::from_json(read_file(gen_spec));
      if (gen_seed) spec.seed = *gen_seed;
      if (gen_scale) spec.scale = *gen_scale;
      const Corpus corpus = generate_corpus(spec);
      if (gen_pool.empty()) {
        fs::path p(gen_out);
        gen_pool = (p.parent_path() / (p.stem().string() + ".pool.jsonl")).string();
      }
      write_corpus(gen_out, corpus.labeled);
      write_corpus(gen_pool, corpus.unlabeled);
      std::cout << "wrote " << corpus.labeled.size() << " labeled samples to " << gen_out << " and "
                << corpus.unlabeled.size() << " unlabeled samples to " << gen_pool << "\n";
    } else if (*emb) {
      const auto corpus = read_corpus(emb_in);
      const EmbeddingConfig config = emb_opts.config();
      const Vocabulary vocab = build_vocabulary(corpus, config.min_count);
      std::vector<TokenSequence> sequences;
      sequences.reserve(corpus.size());
      for (const auto& s : corpus) sequences.push_back(normalize(tokenize(s), vocab));
      const EmbeddingModel model = train_embeddings(sequences, config);
      model.save(emb_out);
      std::cout << "trained " << model.word_count() << " words, final loss "
                << (model.epoch_loss().empty() ? 0.0 : model.epoch_loss().back()) << "\n";
    } else if (*sim) {
      const auto labeled = read_corpus(sim_corpus);
      const auto extra = read_optional(sim_pool);
      sim_config.strategies.clear();
      for (const auto& name : sim_strategies) {
        auto s = parse_strategy(name);
        if (!s) throw Error("unknown strategy: " + name);
        sim_config.strategies.push_back(*s);
      }
      sim_emb.seed = sim_config.seed;
      sim_config.pipeline.embedding = sim_emb.config();
      sim_config.pipeline.feature_set = feature_set_or_throw(sim_features);
      fs::create_directories(sim_out);
      sim_config.checkpoint_dir = (fs::path(sim_out) / "checkpoints").string();
      fs::create_directories(*sim_config.checkpoint_dir);
      ProgressFn progress;
      if (!sim_quiet) {
        progress = [](Strategy s, std::size_t run, std::size_t it) {
          std::cerr << "\r" << to_string(s) << " run " << run << " iteration " << it << "   " << std::flush;
        };
      }
      const AlReport report = run_al_experiment(labeled, extra, sim_config, progress);
      if (!sim_quiet) std::cerr << "\n";
      write_file_atomic((fs::path(sim_out) / "report.json").string(), report.to_json());
      write_file_atomic((fs::path(sim_out) / "curves.csv").string(), report.curves_csv());
      write_file_atomic((fs::path(sim_out) / "snapshots.csv").string(), report.snapshot_csv());
      for (Strategy s : sim_config.strategies) {
        std::cout << to_string(s);
        for (std::size_t it : sim_config.snapshots) {
          if (it > sim_config.iterations) continue;
          const SummaryStat f1 = report.macro_f1(s, it);
          std::cout << "  F1@" << it << "=" << f1.mean << "±" << f1.sd;
        }
        std::cout << "\n";
      }
    } else if (*fe) {
      fe_emb.seed = fe_config.seed;
      fe_config.embedding = fe_emb.config();
      const auto labeled = read_corpus(fe_corpus);
      const auto extra = read_optional(fe_pool);
      const FeatureEvalReport report = run_feature_eval(labeled, extra, fe_config);
      fs::create_directories(fe_out);
      write_file_atomic((fs::path(fe_out) / "feature_eval.json").string(), report.to_json());
      write_file_atomic((fs::path(fe_out) / "feature_eval.csv").string(), report.to_csv());
      std::cout << report.to_csv();
      if (report.fold_note) std::cout << *report.fold_note << "\n";
    } else if (*st || *ft) {
      EmbeddingOptions& opts = *st ? st_emb : ft_emb;
      const auto labeled = read_corpus(*st ? st_corpus : ft_corpus);
      const auto extra = read_optional(*st ? st_pool : ft_pool);
      std::vector<RawSample> text = labeled;
      text.insert(text.end(), extra.begin(), extra.end());
      PipelineConfig config;
      config.embedding = opts.config();
      if (*ft) config.feature_set = feature_set_or_throw(ft_features);
      const FeaturePipeline pipeline = FeaturePipeline::train(text, config);
      const TokenScoreTable scores = pipeline.score_table(labeled);
      if (*st) {
        write_file_atomic(st_out, scores.to_csv());
        std::cout << "scored " << scores.size() << " tokens\n";
      } else {
        const auto& samples = extra.empty() ? labeled : extra;
        const Matrix features = pipeline.featurize(samples, scores);
        write_file_atomic(ft_out, feature_matrix_csv(samples, features, pipeline.names()));
        std::cout << "wrote " << features.rows() << " x " << features.cols() << " features\n";
      }
    } else if (*srv) {
      PipelineConfig config;
      config.embedding = srv_emb.config();
      LabelingService service(read_corpus(srv_corpus), read_optional(srv_pool), srv_state, config);
      httplib::Server server;
      register_routes(server, service);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      int port = srv_port;
      if (port == 0) {
        port = server.bind_to_any_port(srv_host);
      } else if (!server.bind_to_port(srv_host, port)) {
        port = -1;
      }
      if (port < 0) throw Error("cannot bind " + srv_host + ":" + std::to_string(srv_port));
      std::cout << "listening on " << srv_host << ":" << port << std::endl;
      server.listen_after_bind();
      g_server = nullptr;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
