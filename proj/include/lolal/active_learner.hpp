#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lolal/classifiers.hpp"
#include "lolal/featurizer.hpp"
#include "lolal/metrics.hpp"
#include "lolal/naive_bayes.hpp"
#include "lolal/token_scorer.hpp"
#include "lolal/types.hpp"

namespace lolal {

/// Margin uncertainty: -(P_top1 - P_top2), in [-1, 0]. Values closer to 0 are
/// more uncertain. Throws with fewer than two classes.
double uncertainty_score(std::span<const double> posterior);

enum class Reason { Uncertain, Anomalous, Random };
std::string_view to_string(Reason reason);
std::optional<Reason> parse_reason(std::string_view text);

/// An unlabeled sample as seen by the ranking: its position in the caller's
/// list, its predicted class and both scores.
struct Candidate {
  std::size_t index = 0;
  int predicted_class = 0;
  double uncertainty = 0.0;
  double anomaly = 0.0;
};

struct RankedEntry {
  std::size_t index = 0;
  int predicted_class = 0;
  Reason reason = Reason::Uncertain;
  /// Uncertainty for uncertain picks, anomaly score for anomalous picks.
  double score = 0.0;
};

inline constexpr std::size_t kUnlimited = std::numeric_limits<std::size_t>::max();

/// Each round emits the most uncertain remaining candidate of every class in
/// class order, then the most anomalous remaining candidate of every class.
/// Classes without remaining candidates are skipped and a candidate is never
/// emitted twice. Ties go to the lower candidate index. Once a reason has
/// emitted its quota its slots are skipped; ranking stops when no slot can
/// emit anything.
std::vector<RankedEntry> rank_round_robin(std::span<const Candidate> candidates, std::size_t n_classes,
                                          std::size_t max_uncertain = kUnlimited,
                                          std::size_t max_anomalous = kUnlimited);

/// Round robin over classes by a single score.
std::vector<RankedEntry> rank_by_single_score(std::span<const Candidate> candidates, std::size_t n_classes,
                                              Reason reason);

enum class Strategy { Lolal, LolalLr, UncertaintyOnly, AnomalyOnly, Random };
std::string_view to_string(Strategy strategy);
/// Accepts "lolal", "lolal-lr", "uncertainty", "anomaly", "random".
std::optional<Strategy> parse_strategy(std::string_view text);
ClassifierKind classifier_for(Strategy strategy);

struct LearnerConfig {
  Strategy strategy = Strategy::Lolal;
  std::size_t batch_size = 5;
  /// The kind is taken from the strategy.
  ClassifierConfig classifier;
  std::uint64_t seed = 1;
  /// Per-reason caps on the round-robin ranking of the LOLAL strategies.
  std::size_t max_uncertain = kUnlimited;
  std::size_t max_anomalous = kUnlimited;
};

struct QueueItem {
  std::string sample_id;
  Reason reason = Reason::Uncertain;
  int predicted_class = 0;
  Vector posterior;
  double uncertainty = 0.0;
  double anomaly = 0.0;
};

/// Everything needed to resume a learning session. Models are refitted from
/// the labeled pool, which is deterministic, so they are not stored except
/// the naive-Bayes parameters kept for audit.
struct IterationState {
  static constexpr int kFormatVersion = 1;

  std::size_t iteration = 0;
  std::uint64_t seed = 1;
  Strategy strategy = Strategy::Lolal;
  std::map<std::string, Label> labeled;
  /// Selected for labeling and not yet answered.
  std::set<std::string> pending;
  /// Ranking computed from the current labeled pool.
  std::vector<QueueItem> queue;
  /// confusion[t] is the evaluation of the model trained at iteration t.
  std::vector<std::vector<std::vector<std::size_t>>> confusion_history;
  std::optional<NaiveBayesModel> nb;

  std::vector<Metrics> history() const;

  std::string to_json() const;
  static IterationState from_json(std::string_view text);
};

/// Output of steps 1-6 for the current labeled pool.
struct Ranking {
  TokenScoreTable scores;
  /// One row per pool sample.
  Matrix features;
  std::optional<Classifier> classifier;
  NaiveBayesModel nb;
  std::vector<QueueItem> queue;
  /// Pool index of each queue item.
  std::vector<std::size_t> queue_index;
};

/// Returns a label name, or an empty string to leave the sample pending.
using Labeler = std::function<std::string(const RawSample&)>;

struct IterationOutcome {
  std::vector<std::string> selected;
  std::map<std::string, Label> accepted;
  /// Samples whose labels were deferred or rejected.
  std::vector<std::string> still_pending;
};

class ActiveLearner {
 public:
  /// The pool is sorted by id; labels on the pool samples are ignored.
  ActiveLearner(std::shared_ptr<const FeaturePipeline> pipeline, std::vector<RawSample> pool, LearnerConfig config);

  const IterationState& state() const { return state_; }
  const LearnerConfig& config() const { return config_; }
  const std::vector<RawSample>& pool() const { return pool_; }
  const FeaturePipeline& pipeline() const { return *pipeline_; }
  std::optional<std::size_t> index_of(std::string_view sample_id) const;

  /// Replaces the state, for example from a checkpoint. The ranking is
  /// recomputed lazily.
  void restore(IterationState state);

  /// Adds labels directly to the labeled pool.
  void add_labels(const std::map<std::string, Label>& labels);
  /// Adds labels collected outside `run_iteration` and counts an iteration.
  void commit_iteration(const std::map<std::string, Label>& labels);

  /// Steps 1-6. Cached until the labeled pool changes. Throws unless the
  /// labeled pool covers at least two classes.
  const Ranking& rank();

  /// Queue prefix (or everything when the queue is shorter).
  std::vector<std::string> select_batch(std::size_t batch_size);

  /// One full iteration: rank, select `batch_size` samples, ask the labeler,
  /// move accepted labels into the labeled pool and increment the iteration.
  /// Pending samples from earlier iterations are offered to the labeler
  /// again. When `truth` is given, the model trained in step 1 is evaluated
  /// on the whole pool and appended to the history.
  IterationOutcome run_iteration(const Labeler& labeler, const std::map<std::string, Label>* truth = nullptr);

  /// Evaluates the model of the current ranking on every pool sample that
  /// has a truth label.
  Metrics evaluate(const std::map<std::string, Label>& truth);
  /// Evaluates and appends to the history.
  Metrics record_metrics(const std::map<std::string, Label>& truth);

  void save_checkpoint(const std::string& path) const;

 private:
  void invalidate() { ranking_.reset(); }

  std::shared_ptr<const FeaturePipeline> pipeline_;
  std::vector<RawSample> pool_;
  std::map<std::string, std::size_t> index_;
  LearnerConfig config_;
  IterationState state_;
  std::optional<Ranking> ranking_;
};

}  // namespace lolal
