#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "lolal/active_learner.hpp"
#include "lolal/featurizer.hpp"
#include "lolal/types.hpp"

namespace httplib {
class Server;
}

namespace lolal {

inline constexpr int kSchemaVersion = 1;

/// Failure of a service operation; `status` is the HTTP status to report.
class ServiceError : public Error {
 public:
  ServiceError(int status, const std::string& message) : Error(message), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

struct SessionConfig {
  std::size_t k_uncertain = 25;
  std::size_t k_anomalous = 25;
  /// 0 uses every label in the corpus; otherwise a seeded random subset.
  std::size_t seed_labels = 0;
  std::uint64_t seed = 1;
  Strategy strategy = Strategy::Lolal;
  /// Labels that must be staged before an iteration can advance.
  std::size_t min_staged = 1;
};

/// Share of queued samples predicted malicious that the analyst confirmed as
/// malicious, for one selection reason.
struct ReasonAccuracy {
  std::size_t predicted_malicious = 0;
  std::size_t confirmed_malicious = 0;
  std::optional<double> accuracy;
};

struct IterationAccuracy {
  std::size_t iteration = 0;
  ReasonAccuracy uncertain;
  ReasonAccuracy anomalous;
};

struct StagedLabel {
  Label label = Label::Benign;
  std::string analyst_id;
  std::string submitted_at;
};

/// One live learning session. All public methods are safe to call
/// concurrently; mutations are serialized and written to disk before they
/// return.
class LabelingSession {
 public:
  /// Trains the initial model and computes the first queue.
  LabelingSession(std::string id, std::shared_ptr<const FeaturePipeline> pipeline, std::vector<RawSample> pool,
                  std::map<std::string, Label> initial_labels, SessionConfig config, std::string directory);
  /// Reloads a session written by a previous process.
  static std::unique_ptr<LabelingSession> load(const std::string& directory,
                                               std::shared_ptr<const FeaturePipeline> pipeline,
                                               std::vector<RawSample> pool);

  const std::string& id() const { return id_; }

  std::string queue_json() const;
  std::string submit_label(const std::string& sample_id, const std::string& label, const std::string& analyst_id);
  std::string advance();
  std::string metrics_json() const;
  std::string sample_json(const std::string& sample_id);
  std::string summary_json() const;

  std::size_t iteration() const;
  std::size_t pending_count() const;

 private:
  LabelingSession(std::string id, SessionConfig config, std::string directory, std::unique_ptr<ActiveLearner> learner);

  std::vector<QueueItem> build_queue(ActiveLearner& learner) const;
  void persist() const;
  std::string summary_locked() const;
  std::vector<const QueueItem*> open_items() const;

  std::string id_;
  SessionConfig config_;
  std::string directory_;
  std::unique_ptr<ActiveLearner> learner_;
  std::vector<QueueItem> queue_;
  std::map<std::string, StagedLabel> staged_;
  std::vector<IterationAccuracy> accuracy_;
  bool retraining_ = false;
  mutable std::mutex mutex_;
};

/// Holds the corpus, the trained feature pipeline and all sessions under one
/// state directory.
class LabelingService {
 public:
  /// Loads the pipeline from the state directory when present; otherwise
  /// trains it from `corpus` plus `pool` text and saves it. Existing sessions
  /// are reloaded.
  LabelingService(std::vector<RawSample> corpus, std::vector<RawSample> pool, std::string state_dir,
                  PipelineConfig pipeline_config = {});

  /// Body: optional k_uncertain, k_anomalous, seed_labels, seed, strategy, min_staged.
  std::string create_session(const std::string& body);
  LabelingSession& session(const std::string& id);

 private:
  void save_index() const;

  std::vector<RawSample> corpus_;
  std::vector<RawSample> pool_;
  std::string state_dir_;
  std::shared_ptr<const FeaturePipeline> pipeline_;
  std::map<std::string, std::unique_ptr<LabelingSession>> sessions_;
  std::size_t next_session_ = 1;
  mutable std::mutex mutex_;
};

/// Registers the HTTP routes on `server`.
void register_routes(httplib::Server& server, LabelingService& service);

}  // namespace lolal
