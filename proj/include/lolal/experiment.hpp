#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lolal/active_learner.hpp"
#include "lolal/classifiers.hpp"
#include "lolal/embedding.hpp"
#include "lolal/featurizer.hpp"
#include "lolal/metrics.hpp"
#include "lolal/types.hpp"

namespace lolal {

/// Ground truth of every labeled sample, keyed by id.
std::map<std::string, Label> truth_of(std::span<const RawSample> samples);

/// Draws `n` distinct sample ids uniformly, redrawing the whole set until it
/// covers at least two classes (at most 1000 attempts).
std::map<std::string, Label> draw_seed_labels(std::span<const RawSample> pool, std::size_t n, std::uint64_t seed);

struct FeatureEvalConfig {
  std::vector<FeatureSet> feature_sets = {FeatureSet::Scores, FeatureSet::Vectors, FeatureSet::ScoresVectors,
                                          FeatureSet::ScoresVectorsWeighted};
  std::vector<EmbeddingMode> modes = {EmbeddingMode::Word2Vec, EmbeddingMode::FastText};
  std::size_t folds = 10;
  EmbeddingConfig embedding;
  ClassifierConfig classifier = [] {
    ClassifierConfig c;
    c.kind = ClassifierKind::Forest;
    return c;
  }();
  ForestConfig token_forest;
  std::uint64_t seed = 1;
};

struct FeatureEvalRow {
  EmbeddingMode mode = EmbeddingMode::FastText;
  FeatureSet feature_set = FeatureSet::ScoresVectorsWeighted;
  std::size_t folds = 0;
  Metrics pooled;
};

struct FeatureEvalReport {
  std::vector<FeatureEvalRow> rows;
  /// Set when a class was too small for the requested fold count.
  std::optional<std::string> fold_note;

  std::string to_json() const;
  /// mode,feature_set,class,prec,rec,f1,fpr rows plus a macro row per setting.
  std::string to_csv() const;
};

/// Stratified cross-validation per embedding mode and feature set. Token
/// scores are rebuilt from the training folds only. Embeddings are trained
/// once per mode on the command text of `labeled` and `extra_text`.
FeatureEvalReport run_feature_eval(std::span<const RawSample> labeled, std::span<const RawSample> extra_text,
                                   const FeatureEvalConfig& config);

struct AlExperimentConfig {
  std::vector<Strategy> strategies = {Strategy::Lolal, Strategy::Random};
  std::size_t iterations = 50;
  std::size_t batch_size = 5;
  std::size_t seed_labels = 10;
  std::size_t runs = 5;
  std::uint64_t seed = 1;
  PipelineConfig pipeline;
  ClassifierConfig classifier;
  /// When set, every run writes its iteration state here after each iteration.
  std::optional<std::string> checkpoint_dir;
  std::vector<std::size_t> snapshots = {5, 10, 15, 20, 30};
};

struct RunResult {
  Strategy strategy = Strategy::Lolal;
  std::size_t run = 0;
  /// history[t] evaluates the model trained after t iterations.
  std::vector<Metrics> history;
  std::vector<std::size_t> labeled_counts;
};

struct SummaryStat {
  double mean = 0.0;
  double sd = 0.0;
};

struct AlReport {
  AlExperimentConfig config;
  std::vector<RunResult> runs;

  /// Mean and sample standard deviation across runs of a metric taken from
  /// each run's history at `iteration`. Undefined per-run values count as 0.
  SummaryStat summarize(Strategy strategy, std::size_t iteration,
                        const std::function<std::optional<double>(const Metrics&)>& metric) const;
  SummaryStat macro_f1(Strategy strategy, std::size_t iteration) const;
  SummaryStat precision(Strategy strategy, std::size_t iteration, std::size_t class_index) const;
  SummaryStat recall(Strategy strategy, std::size_t iteration, std::size_t class_index) const;

  std::string to_json() const;
  /// iteration,strategy,metric,mean,sd
  std::string curves_csv() const;
  /// strategy,iteration,class,prec_mean,prec_sd,tp_mean,tp_sd at the snapshot iterations.
  std::string snapshot_csv() const;
};

using ProgressFn = std::function<void(Strategy, std::size_t run, std::size_t iteration)>;

/// The pool is `labeled`; its labels act as the oracle and the evaluation
/// truth. Embeddings are trained once on `labeled` plus `extra_text`. Runs
/// share seed labels across strategies so strategies are compared on equal
/// starting points.
AlReport run_al_experiment(std::span<const RawSample> labeled, std::span<const RawSample> extra_text,
                           const AlExperimentConfig& config, const ProgressFn& progress = {});

/// Same, with a pipeline trained by the caller.
AlReport run_al_experiment(std::shared_ptr<const FeaturePipeline> pipeline, std::span<const RawSample> labeled,
                           const AlExperimentConfig& config, const ProgressFn& progress = {});

}  // namespace lolal
