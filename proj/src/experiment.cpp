#include "lolal/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"
#include "lolal/rng.hpp"

namespace lolal {

std::map<std::string, Label> truth_of(std::span<const RawSample> samples) {
  std::map<std::string, Label> out;
  for (const auto& s : samples) {
    if (!s.label) throw Error("sample without a ground-truth label: " + s.id);
    out.emplace(s.id, *s.label);
  }
  return out;
}

std::map<std::string, Label> draw_seed_labels(std::span<const RawSample> pool, std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), 0);
  n = std::min(n, pool.size());
  Rng rng(seed);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    // Partial Fisher-Yates over the first n positions.
    for (std::size_t i = 0; i < n; ++i) std::swap(order[i], order[i + rng.index(order.size() - i)]);
    std::map<std::string, Label> out;
    std::set<Label> classes;
    for (std::size_t i = 0; i < n; ++i) {
      const RawSample& s = pool[order[i]];
      if (!s.label) throw Error("seed pool sample without a label: " + s.id);
      out.emplace(s.id, *s.label);
      classes.insert(*s.label);
    }
    if (classes.size() >= 2) return out;
  }
  throw Error("could not draw seed labels covering two classes");
}

namespace {

std::vector<RawSample> concat(std::span<const RawSample> a, std::span<const RawSample> b) {
  std::vector<RawSample> out(a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

nlohmann::ordered_json opt_json(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json();
}

std::string class_name(std::size_t k) { return std::string(to_string(label_from_index(static_cast<int>(k)))); }

}  // namespace

FeatureEvalReport run_feature_eval(std::span<const RawSample> labeled, std::span<const RawSample> extra_text,
                                   const FeatureEvalConfig& config) {
  if (labeled.empty()) throw Error("feature evaluation needs labeled samples");
  std::vector<int> y;
  std::map<int, std::size_t> counts;
  for (const auto& s : labeled) {
    if (!s.label) throw Error("feature evaluation needs labels on every sample: " + s.id);
    y.push_back(class_index(*s.label));
    ++counts[y.back()];
  }
  if (counts.size() < 2) throw Error("feature evaluation needs at least two classes");
  std::size_t smallest = labeled.size();
  for (const auto& [c, n] : counts) smallest = std::min(smallest, n);

  FeatureEvalReport report;
  std::size_t k = config.folds;
  if (smallest < k) {
    report.fold_note = "fold count reduced from " + std::to_string(k) + " to " + std::to_string(smallest) +
                       " by the smallest class";
    k = smallest;
  }
  if (k < 2) throw Error("every class needs at least two samples for cross-validation");
  const std::vector<std::size_t> fold = stratified_folds(y, k, config.seed);
  const std::vector<RawSample> text = concat(labeled, extra_text);

  for (EmbeddingMode mode : config.modes) {
    PipelineConfig pc;
    pc.embedding = config.embedding;
    pc.embedding.mode = mode;
    pc.token_forest = config.token_forest;
    const FeaturePipeline pipeline = FeaturePipeline::train(text, pc);

    std::vector<std::vector<int>> predicted(config.feature_sets.size(), std::vector<int>(labeled.size(), 0));
    for (std::size_t f = 0; f < k; ++f) {
      std::vector<RawSample> train_samples;
      std::vector<std::size_t> train_index, test_index;
      for (std::size_t i = 0; i < labeled.size(); ++i) {
        if (fold[i] == f) {
          test_index.push_back(i);
        } else {
          train_index.push_back(i);
          train_samples.push_back(labeled[i]);
        }
      }
      const TokenScoreTable scores = pipeline.score_table(train_samples);
      for (std::size_t s = 0; s < config.feature_sets.size(); ++s) {
        const FeatureSet set = config.feature_sets[s];
        auto features = [&](std::size_t i) {
          return featurize(labeled[i], pipeline.embeddings(), scores, pipeline.vocabulary(), set).values;
        };
        Matrix train_x;
        std::vector<int> train_y;
        for (std::size_t i : train_index) {
          train_x.append_row(features(i));
          train_y.push_back(y[i]);
        }
        const Classifier model = fit_classifier(train_x, train_y, kClassCount, config.classifier);
        for (std::size_t i : test_index) predicted[s][i] = model.predict(features(i)).label;
      }
    }
    for (std::size_t s = 0; s < config.feature_sets.size(); ++s) {
      report.rows.push_back({mode, config.feature_sets[s], k, compute_metrics(y, predicted[s], kClassCount)});
    }
  }
  return report;
}

std::string FeatureEvalReport::to_json() const {
  nlohmann::ordered_json doc;
  doc["fold_note"] = fold_note ? nlohmann::ordered_json(*fold_note) : nlohmann::ordered_json();
  nlohmann::ordered_json rows_json = nlohmann::ordered_json::array();
  for (const auto& row : rows) {
    rows_json.push_back({{"mode", std::string(to_string(row.mode))},
                         {"feature_set", std::string(to_string(row.feature_set))},
                         {"folds", row.folds},
                         {"metrics", nlohmann::ordered_json::parse(row.pooled.to_json())}});
  }
  doc["rows"] = std::move(rows_json);
  return doc.dump(2);
}

std::string FeatureEvalReport::to_csv() const {
  std::ostringstream out;
  out << "mode,feature_set,class,prec,rec,f1,fpr\n";
  auto cell = [](const std::optional<double>& v) { return v ? std::to_string(*v) : std::string(); };
  for (const auto& row : rows) {
    const std::string prefix = std::string(to_string(row.mode)) + "," + std::string(to_string(row.feature_set)) + ",";
    for (std::size_t c = 0; c < row.pooled.per_class.size(); ++c) {
      const auto& m = row.pooled.per_class[c];
      out << prefix << class_name(c) << ',' << cell(m.precision) << ',' << cell(m.recall) << ',' << cell(m.f1) << ','
          << cell(m.fpr) << '\n';
    }
    out << prefix << "macro," << cell(row.pooled.macro_precision) << ',' << cell(row.pooled.macro_recall) << ','
        << cell(row.pooled.macro_f1) << ',' << cell(row.pooled.macro_fpr) << '\n';
  }
  return out.str();
}

AlReport run_al_experiment(std::span<const RawSample> labeled, std::span<const RawSample> extra_text,
                           const AlExperimentConfig& config, const ProgressFn& progress) {
  const std::vector<RawSample> text = concat(labeled, extra_text);
  auto pipeline = std::make_shared<const FeaturePipeline>(FeaturePipeline::train(text, config.pipeline));
  return run_al_experiment(pipeline, labeled, config, progress);
}

AlReport run_al_experiment(std::shared_ptr<const FeaturePipeline> pipeline, std::span<const RawSample> labeled,
                           const AlExperimentConfig& config, const ProgressFn& progress) {
  if (config.batch_size == 0) throw Error("batch size must be at least 1");
  const auto truth = truth_of(labeled);
  const std::vector<RawSample> pool(labeled.begin(), labeled.end());
  const Labeler oracle = [&truth](const RawSample& s) { return std::string(to_string(truth.at(s.id))); };

  AlReport report;
  report.config = config;
  for (std::size_t run = 0; run < config.runs; ++run) {
    const std::uint64_t run_seed = derive_seed(config.seed, run);
    const auto seeds = draw_seed_labels(pool, config.seed_labels, run_seed);
    for (Strategy strategy : config.strategies) {
      LearnerConfig lc;
      lc.strategy = strategy;
      lc.batch_size = config.batch_size;
      lc.classifier = config.classifier;
      lc.seed = run_seed;
      ActiveLearner learner(pipeline, pool, lc);
      learner.add_labels(seeds);
      RunResult result;
      result.strategy = strategy;
      result.run = run;
      for (std::size_t t = 0; t < config.iterations; ++t) {
        result.labeled_counts.push_back(learner.state().labeled.size());
        learner.run_iteration(oracle, &truth);
        if (config.checkpoint_dir) {
          learner.save_checkpoint((std::filesystem::path(*config.checkpoint_dir) /
                                   (std::string(to_string(strategy)) + "_run" + std::to_string(run) + ".json"))
                                      .string());
        }
        if (progress) progress(strategy, run, t);
      }
      result.labeled_counts.push_back(learner.state().labeled.size());
      learner.record_metrics(truth);
      result.history = learner.state().history();
      report.runs.push_back(std::move(result));
    }
  }
  return report;
}

SummaryStat AlReport::summarize(Strategy strategy, std::size_t iteration,
                                const std::function<std::optional<double>(const Metrics&)>& metric) const {
  std::vector<double> values;
  for (const auto& run : runs) {
    if (run.strategy != strategy) continue;
    if (iteration >= run.history.size()) throw Error("iteration beyond the recorded history");
    values.push_back(metric(run.history[iteration]).value_or(0.0));
  }
  if (values.empty()) throw Error("no runs recorded for strategy " + std::string(to_string(strategy)));
  SummaryStat s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

SummaryStat AlReport::macro_f1(Strategy strategy, std::size_t iteration) const {
  return summarize(strategy, iteration, [](const Metrics& m) { return m.macro_f1; });
}

SummaryStat AlReport::precision(Strategy strategy, std::size_t iteration, std::size_t class_index) const {
  return summarize(strategy, iteration, [class_index](const Metrics& m) { return m.per_class.at(class_index).precision; });
}

SummaryStat AlReport::recall(Strategy strategy, std::size_t iteration, std::size_t class_index) const {
  return summarize(strategy, iteration, [class_index](const Metrics& m) { return m.per_class.at(class_index).recall; });
}

std::string AlReport::to_json() const {
  nlohmann::ordered_json doc;
  nlohmann::ordered_json strategies = nlohmann::ordered_json::array();
  for (Strategy s : config.strategies) strategies.push_back(std::string(to_string(s)));
  doc["config"] = {{"strategies", strategies},
                   {"iterations", config.iterations},
                   {"batch_size", config.batch_size},
                   {"seed_labels", config.seed_labels},
                   {"runs", config.runs},
                   {"seed", config.seed},
                   {"embedding_mode", std::string(to_string(config.pipeline.embedding.mode))},
                   {"feature_set", std::string(to_string(config.pipeline.feature_set))}};

  nlohmann::ordered_json summary = nlohmann::ordered_json::object();
  for (Strategy s : config.strategies) {
    nlohmann::ordered_json curve = nlohmann::ordered_json::array();
    for (std::size_t t = 0; t <= config.iterations; ++t) {
      const SummaryStat f1 = macro_f1(s, t);
      const SummaryStat fpr = summarize(s, t, [](const Metrics& m) { return m.macro_fpr; });
      nlohmann::ordered_json classes = nlohmann::ordered_json::array();
      for (std::size_t c = 0; c < kClassCount; ++c) {
        const SummaryStat p = precision(s, t, c), r = recall(s, t, c);
        classes.push_back({{"class", class_name(c)},
                           {"prec", p.mean},
                           {"prec_sd", p.sd},
                           {"tp", r.mean},
                           {"tp_sd", r.sd}});
      }
      curve.push_back({{"iteration", t},
                       {"macro_f1", f1.mean},
                       {"macro_f1_sd", f1.sd},
                       {"macro_fpr", fpr.mean},
                       {"classes", classes}});
    }
    summary[std::string(to_string(s))] = std::move(curve);
  }
  doc["summary"] = std::move(summary);

  nlohmann::ordered_json runs_json = nlohmann::ordered_json::array();
  for (const auto& run : runs) {
    nlohmann::ordered_json confusion = nlohmann::ordered_json::array();
    for (const auto& m : run.history) confusion.push_back(m.confusion);
    nlohmann::ordered_json f1 = nlohmann::ordered_json::array();
    for (const auto& m : run.history) f1.push_back(opt_json(m.macro_f1));
    runs_json.push_back({{"strategy", std::string(to_string(run.strategy))},
                         {"run", run.run},
                         {"labeled_counts", run.labeled_counts},
                         {"macro_f1", f1},
                         {"confusion", confusion}});
  }
  doc["runs"] = std::move(runs_json);
  return doc.dump();
}

std::string AlReport::curves_csv() const {
  std::ostringstream out;
  out.precision(10);
  out << "iteration,strategy,metric,mean,sd\n";
  for (Strategy s : config.strategies) {
    for (std::size_t t = 0; t <= config.iterations; ++t) {
      auto row = [&](const std::string& metric, SummaryStat v) {
        out << t << ',' << to_string(s) << ',' << metric << ',' << v.mean << ',' << v.sd << '\n';
      };
      row("macro_f1", macro_f1(s, t));
      row("macro_fpr", summarize(s, t, [](const Metrics& m) { return m.macro_fpr; }));
      for (std::size_t c = 0; c < kClassCount; ++c) {
        row("prec_" + class_name(c), precision(s, t, c));
        row("tp_" + class_name(c), recall(s, t, c));
      }
    }
  }
  return out.str();
}

std::string AlReport::snapshot_csv() const {
  std::ostringstream out;
  out.precision(6);
  out << "strategy,iteration,class,prec_mean,prec_sd,tp_mean,tp_sd\n";
  for (Strategy s : config.strategies) {
    for (std::size_t t : config.snapshots) {
      if (t > config.iterations) continue;
      for (std::size_t c = 0; c < kClassCount; ++c) {
        const SummaryStat p = precision(s, t, c), r = recall(s, t, c);
        out << to_string(s) << ',' << t << ',' << class_name(c) << ',' << p.mean << ',' << p.sd << ',' << r.mean
            << ',' << r.sd << '\n';
      }
    }
  }
  return out.str();
}

}  // namespace lolal
