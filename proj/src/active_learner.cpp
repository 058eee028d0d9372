#include "lolal/active_learner.hpp"

#include <algorithm>
#include <numeric>

#include "json.hpp"
#include "lolal/io.hpp"
#include "lolal/rng.hpp"

namespace lolal {

double uncertainty_score(std::span<const double> posterior) {
  if (posterior.size() < 2) throw Error("uncertainty needs at least two classes");
  double first = -std::numeric_limits<double>::infinity();
  double second = first;
  for (double p : posterior) {
    if (p > first) {
      second = first;
      first = p;
    } else if (p > second) {
      second = p;
    }
  }
  return -(first - second);
}

std::string_view to_string(Reason reason) {
  switch (reason) {
    case Reason::Uncertain: return "uncertain";
    case Reason::Anomalous: return "anomalous";
    case Reason::Random: return "random";
  }
  return "?";
}

std::optional<Reason> parse_reason(std::string_view text) {
  if (text == "uncertain") return Reason::Uncertain;
  if (text == "anomalous") return Reason::Anomalous;
  if (text == "random") return Reason::Random;
  return std::nullopt;
}

namespace {

// Candidate positions per class, best first by `key`, ties by candidate index.
std::vector<std::vector<std::size_t>> per_class_order(std::span<const Candidate> candidates, std::size_t n_classes,
                                                      double Candidate::*key) {
  std::vector<std::vector<std::size_t>> order(n_classes);
  for (std::size_t p = 0; p < candidates.size(); ++p) {
    const int c = candidates[p].predicted_class;
    if (c < 0 || static_cast<std::size_t>(c) >= n_classes) throw Error("candidate class out of range");
    order[static_cast<std::size_t>(c)].push_back(p);
  }
  for (auto& members : order) {
    std::sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
      const double ka = candidates[a].*key, kb = candidates[b].*key;
      if (ka != kb) return ka > kb;
      return candidates[a].index < candidates[b].index;
    });
  }
  return order;
}

struct Lane {
  Reason reason;
  double Candidate::*key;
  std::size_t quota;
  std::vector<std::vector<std::size_t>> order;
  std::vector<std::size_t> cursor;
  std::size_t emitted = 0;
};

std::vector<RankedEntry> run_lanes(std::span<const Candidate> candidates, std::size_t n_classes,
                                   std::vector<Lane>& lanes) {
  std::vector<char> taken(candidates.size(), 0);
  std::vector<RankedEntry> out;
  for (auto& lane : lanes) {
    lane.order = per_class_order(candidates, n_classes, lane.key);
    lane.cursor.assign(n_classes, 0);
  }
  bool progress = true;
  while (progress) {
    progress = false;
    for (auto& lane : lanes) {
      for (std::size_t c = 0; c < n_classes; ++c) {
        if (lane.emitted >= lane.quota) break;
        auto& members = lane.order[c];
        std::size_t& at = lane.cursor[c];
        while (at < members.size() && taken[members[at]]) ++at;
        if (at == members.size()) continue;
        const std::size_t p = members[at++];
        taken[p] = 1;
        ++lane.emitted;
        progress = true;
        out.push_back({candidates[p].index, candidates[p].predicted_class, lane.reason, candidates[p].*lane.key});
      }
    }
  }
  return out;
}

}  // namespace

std::vector<RankedEntry> rank_round_robin(std::span<const Candidate> candidates, std::size_t n_classes,
                                          std::size_t max_uncertain, std::size_t max_anomalous) {
  std::vector<Lane> lanes;
  lanes.push_back({Reason::Uncertain, &Candidate::uncertainty, max_uncertain, {}, {}});
  lanes.push_back({Reason::Anomalous, &Candidate::anomaly, max_anomalous, {}, {}});
  return run_lanes(candidates, n_classes, lanes);
}

std::vector<RankedEntry> rank_by_single_score(std::span<const Candidate> candidates, std::size_t n_classes,
                                              Reason reason) {
  if (reason == Reason::Random) throw Error("random order has no score to rank by");
  std::vector<Lane> lanes;
  lanes.push_back({reason, reason == Reason::Uncertain ? &Candidate::uncertainty : &Candidate::anomaly, kUnlimited,
                   {}, {}});
  return run_lanes(candidates, n_classes, lanes);
}

std::string_view to_string(Strategy strategy) {
  switch (strategy) {
    case Strategy::Lolal: return "lolal";
    case Strategy::LolalLr: return "lolal-lr";
    case Strategy::UncertaintyOnly: return "uncertainty";
    case Strategy::AnomalyOnly: return "anomaly";
    case Strategy::Random: return "random";
  }
  return "?";
}

std::optional<Strategy> parse_strategy(std::string_view text) {
  if (text == "lolal") return Strategy::Lolal;
  if (text == "lolal-lr" || text == "lolal_lr") return Strategy::LolalLr;
  if (text == "uncertainty" || text == "uncertainty-only") return Strategy::UncertaintyOnly;
  if (text == "anomaly" || text == "anomaly-only") return Strategy::AnomalyOnly;
  if (text == "random") return Strategy::Random;
  return std::nullopt;
}

ClassifierKind classifier_for(Strategy strategy) {
  return strategy == Strategy::LolalLr ? ClassifierKind::Logistic : ClassifierKind::Boosted;
}

std::vector<Metrics> IterationState::history() const {
  std::vector<Metrics> out;
  out.reserve(confusion_history.size());
  for (const auto& confusion : confusion_history) out.push_back(metrics_from_confusion(confusion));
  return out;
}

std::string IterationState::to_json() const {
  nlohmann::ordered_json doc;
  doc["version"] = kFormatVersion;
  doc["iteration"] = iteration;
  doc["seed"] = seed;
  doc["strategy"] = std::string(lolal::to_string(strategy));
  nlohmann::ordered_json labels = nlohmann::ordered_json::object();
  for (const auto& [id, label] : labeled) labels[id] = std::string(lolal::to_string(label));
  doc["labeled"] = std::move(labels);
  doc["pending"] = pending;
  nlohmann::ordered_json items = nlohmann::ordered_json::array();
  for (const auto& q : queue) {
    items.push_back({{"sample_id", q.sample_id},
                     {"reason", std::string(lolal::to_string(q.reason))},
                     {"predicted_class", q.predicted_class},
                     {"posterior", q.posterior},
                     {"uncertainty", q.uncertainty},
                     {"anomaly", q.anomaly}});
  }
  doc["queue"] = std::move(items);
  doc["confusion_history"] = confusion_history;
  doc["naive_bayes"] = nb ? nlohmann::ordered_json::parse(nb->to_json()) : nlohmann::ordered_json();
  return doc.dump();
}

IterationState IterationState::from_json(std::string_view text) {
  const auto doc = nlohmann::json::parse(text);
  if (doc.value("version", 0) != kFormatVersion) throw Error("unsupported iteration state version");
  IterationState s;
  s.iteration = doc.at("iteration").get<std::size_t>();
  s.seed = doc.at("seed").get<std::uint64_t>();
  auto strategy = parse_strategy(doc.at("strategy").get<std::string>());
  if (!strategy) throw Error("unknown strategy in iteration state");
  s.strategy = *strategy;
  for (const auto& [id, name] : doc.at("labeled").items()) {
    auto label = parse_label(name.get<std::string>());
    if (!label) throw Error("unknown label in iteration state: " + name.get<std::string>());
    s.labeled.emplace(id, *label);
  }
  s.pending = doc.at("pending").get<std::set<std::string>>();
  for (const auto& q : doc.at("queue")) {
    QueueItem item;
    item.sample_id = q.at("sample_id").get<std::string>();
    auto reason = parse_reason(q.at("reason").get<std::string>());
    if (!reason) throw Error("unknown queue reason in iteration state");
    item.reason = *reason;
    item.predicted_class = q.at("predicted_class").get<int>();
    item.posterior = q.at("posterior").get<Vector>();
    item.uncertainty = q.at("uncertainty").get<double>();
    item.anomaly = q.at("anomaly").get<double>();
    s.queue.push_back(std::move(item));
  }
  s.confusion_history = doc.at("confusion_history").get<std::vector<std::vector<std::vector<std::size_t>>>>();
  if (doc.contains("naive_bayes") && !doc.at("naive_bayes").is_null()) {
    s.nb = NaiveBayesModel::from_json(doc.at("naive_bayes").dump());
  }
  return s;
}

ActiveLearner::ActiveLearner(std::shared_ptr<const FeaturePipeline> pipeline, std::vector<RawSample> pool,
                             LearnerConfig config)
    : pipeline_(std::move(pipeline)), pool_(std::move(pool)), config_(std::move(config)) {
  if (!pipeline_) throw Error("active learner needs a feature pipeline");
  if (config_.batch_size == 0) throw Error("batch size must be at least 1");
  std::sort(pool_.begin(), pool_.end(), [](const RawSample& a, const RawSample& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < pool_.size(); ++i) {
    pool_[i].label.reset();
    if (!index_.emplace(pool_[i].id, i).second) throw Error("duplicate sample id in pool: " + pool_[i].id);
  }
  state_.seed = config_.seed;
  state_.strategy = config_.strategy;
}

std::optional<std::size_t> ActiveLearner::index_of(std::string_view sample_id) const {
  auto it = index_.find(std::string(sample_id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void ActiveLearner::restore(IterationState state) {
  for (const auto& [id, label] : state.labeled) {
    if (!index_of(id)) throw Error("checkpoint labels a sample outside the pool: " + id);
  }
  for (const auto& id : state.pending) {
    if (!index_of(id)) throw Error("checkpoint has a pending sample outside the pool: " + id);
  }
  state_ = std::move(state);
  invalidate();
}

void ActiveLearner::add_labels(const std::map<std::string, Label>& labels) {
  for (const auto& [id, label] : labels) {
    if (!index_of(id)) throw Error("unknown sample id: " + id);
    state_.labeled[id] = label;
    state_.pending.erase(id);
  }
  invalidate();
}

void ActiveLearner::commit_iteration(const std::map<std::string, Label>& labels) {
  add_labels(labels);
  ++state_.iteration;
}

const Ranking& ActiveLearner::rank() {
  if (ranking_) return *ranking_;

  std::vector<RawSample> labeled;
  std::vector<int> y;
  std::set<int> classes;
  for (const auto& [id, label] : state_.labeled) {
    RawSample s = pool_[index_.at(id)];
    s.label = label;
    labeled.push_back(std::move(s));
    y.push_back(class_index(label));
    classes.insert(class_index(label));
  }
  if (classes.size() < 2) throw Error("labeled pool must cover at least two classes");

  Ranking r;
  r.scores = pipeline_->score_table(labeled);
  r.features = pipeline_->featurize(pool_, r.scores);

  Matrix train(0, r.features.cols());
  for (const auto& [id, label] : state_.labeled) train.append_row(r.features.row(index_.at(id)));
  ClassifierConfig cc = config_.classifier;
  cc.kind = classifier_for(config_.strategy);
  r.classifier = fit_classifier(train, y, kClassCount, cc);

  std::vector<std::size_t> unlabeled;
  for (std::size_t i = 0; i < pool_.size(); ++i) {
    if (!state_.labeled.contains(pool_[i].id) && !state_.pending.contains(pool_[i].id)) unlabeled.push_back(i);
  }

  std::vector<Prediction> predictions;
  std::vector<Candidate> candidates;
  Matrix unlabeled_x(0, r.features.cols());
  std::vector<int> assigned;
  for (std::size_t k = 0; k < unlabeled.size(); ++k) {
    auto x = r.features.row(unlabeled[k]);
    Prediction p = r.classifier->predict(x);
    candidates.push_back({k, p.label, uncertainty_score(p.posterior), 0.0});
    unlabeled_x.append_row(x);
    assigned.push_back(p.label);
    predictions.push_back(std::move(p));
  }
  if (!unlabeled.empty()) {
    r.nb = fit_nb(unlabeled_x, assigned);
    for (std::size_t k = 0; k < unlabeled.size(); ++k) {
      candidates[k].anomaly = r.nb.anomaly_score(unlabeled_x.row(k), assigned[k]);
    }
  }

  std::vector<RankedEntry> order;
  switch (config_.strategy) {
    case Strategy::Lolal:
    case Strategy::LolalLr:
      order = rank_round_robin(candidates, kClassCount, config_.max_uncertain, config_.max_anomalous);
      break;
    case Strategy::UncertaintyOnly: order = rank_by_single_score(candidates, kClassCount, Reason::Uncertain); break;
    case Strategy::AnomalyOnly: order = rank_by_single_score(candidates, kClassCount, Reason::Anomalous); break;
    case Strategy::Random: {
      std::vector<std::size_t> shuffled(unlabeled.size());
      std::iota(shuffled.begin(), shuffled.end(), 0);
      Rng rng(derive_seed(state_.seed, state_.iteration));
      rng.shuffle(shuffled);
      for (std::size_t k : shuffled) order.push_back({k, candidates[k].predicted_class, Reason::Random, 0.0});
      break;
    }
  }

  for (const auto& entry : order) {
    const std::size_t k = entry.index;
    QueueItem item;
    item.sample_id = pool_[unlabeled[k]].id;
    item.reason = entry.reason;
    item.predicted_class = predictions[k].label;
    item.posterior = predictions[k].posterior;
    item.uncertainty = candidates[k].uncertainty;
    item.anomaly = candidates[k].anomaly;
    r.queue.push_back(std::move(item));
    r.queue_index.push_back(unlabeled[k]);
  }

  state_.queue = r.queue;
  state_.nb = unlabeled.empty() ? std::nullopt : std::optional<NaiveBayesModel>(r.nb);
  ranking_ = std::move(r);
  return *ranking_;
}

std::vector<std::string> ActiveLearner::select_batch(std::size_t batch_size) {
  if (batch_size == 0) throw Error("batch size must be at least 1");
  const Ranking& r = rank();
  std::vector<std::string> out;
  for (std::size_t i = 0; i < r.queue.size() && i < batch_size; ++i) out.push_back(r.queue[i].sample_id);
  return out;
}

IterationOutcome ActiveLearner::run_iteration(const Labeler& labeler, const std::map<std::string, Label>* truth) {
  rank();
  if (truth) record_metrics(*truth);
  IterationOutcome out;
  out.selected = select_batch(config_.batch_size);

  std::vector<std::string> offer(state_.pending.begin(), state_.pending.end());
  offer.insert(offer.end(), out.selected.begin(), out.selected.end());
  for (const auto& id : out.selected) state_.pending.insert(id);
  for (const auto& id : offer) {
    const std::string answer = labeler(pool_[index_.at(id)]);
    const auto label = answer.empty() ? std::nullopt : parse_label(answer);
    if (!label) {
      out.still_pending.push_back(id);
      continue;
    }
    out.accepted.emplace(id, *label);
  }
  for (const auto& [id, label] : out.accepted) {
    state_.labeled[id] = label;
    state_.pending.erase(id);
  }
  ++state_.iteration;
  invalidate();
  return out;
}

Metrics ActiveLearner::evaluate(const std::map<std::string, Label>& truth) {
  const Ranking& r = rank();
  std::vector<int> expected, predicted;
  for (std::size_t i = 0; i < pool_.size(); ++i) {
    auto it = truth.find(pool_[i].id);
    if (it == truth.end()) continue;
    expected.push_back(class_index(it->second));
    predicted.push_back(r.classifier->predict(r.features.row(i)).label);
  }
  return compute_metrics(expected, predicted, kClassCount);
}

Metrics ActiveLearner::record_metrics(const std::map<std::string, Label>& truth) {
  Metrics m = evaluate(truth);
  state_.confusion_history.push_back(m.confusion);
  return m;
}

void ActiveLearner::save_checkpoint(const std::string& path) const { write_file_atomic(path, state_.to_json()); }

}  // namespace lolal
