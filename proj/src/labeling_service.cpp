#include "lolal/labeling_service.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <set>

#include "httplib.h"
#include "json.hpp"
#include "lolal/experiment.hpp"
#include "lolal/io.hpp"
#include "lolal/tokenizer.hpp"

namespace lolal {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

std::string now_utc() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string class_name(int k) { return std::string(to_string(label_from_index(k))); }

ordered_json opt_json(const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(); }

ordered_json reason_json(const ReasonAccuracy& r) {
  return {{"predicted_malicious", r.predicted_malicious},
          {"confirmed_malicious", r.confirmed_malicious},
          {"accuracy", opt_json(r.accuracy)}};
}

ReasonAccuracy reason_from(const json& j) {
  ReasonAccuracy r;
  r.predicted_malicious = j.at("predicted_malicious").get<std::size_t>();
  r.confirmed_malicious = j.at("confirmed_malicious").get<std::size_t>();
  if (!j.at("accuracy").is_null()) r.accuracy = j.at("accuracy").get<double>();
  return r;
}

ordered_json config_json(const SessionConfig& c) {
  return {{"k_uncertain", c.k_uncertain}, {"k_anomalous", c.k_anomalous}, {"seed_labels", c.seed_labels},
          {"seed", c.seed},               {"strategy", std::string(to_string(c.strategy))},
          {"min_staged", c.min_staged}};
}

SessionConfig config_from(const json& j) {
  SessionConfig c;
  c.k_uncertain = j.value("k_uncertain", c.k_uncertain);
  c.k_anomalous = j.value("k_anomalous", c.k_anomalous);
  c.seed_labels = j.value("seed_labels", c.seed_labels);
  c.seed = j.value("seed", c.seed);
  c.min_staged = j.value("min_staged", c.min_staged);
  if (j.contains("strategy")) {
    auto s = parse_strategy(j.at("strategy").get<std::string>());
    if (!s || (*s != Strategy::Lolal && *s != Strategy::LolalLr)) {
      throw ServiceError(400, "strategy must be lolal or lolal-lr");
    }
    c.strategy = *s;
  }
  return c;
}

ordered_json queue_item_json(const QueueItem& q) {
  return {{"sample_id", q.sample_id},
          {"reason", std::string(to_string(q.reason))},
          {"predicted_class", q.predicted_class},
          {"posterior", q.posterior},
          {"uncertainty", q.uncertainty},
          {"anomaly", q.anomaly}};
}

QueueItem queue_item_from(const json& j) {
  QueueItem q;
  q.sample_id = j.at("sample_id").get<std::string>();
  auto reason = parse_reason(j.at("reason").get<std::string>());
  if (!reason) throw Error("unknown queue reason in session file");
  q.reason = *reason;
  q.predicted_class = j.at("predicted_class").get<int>();
  q.posterior = j.at("posterior").get<Vector>();
  q.uncertainty = j.at("uncertainty").get<double>();
  q.anomaly = j.at("anomaly").get<double>();
  return q;
}

LearnerConfig learner_config(const SessionConfig& c) {
  LearnerConfig lc;
  lc.strategy = c.strategy;
  lc.seed = c.seed;
  lc.max_uncertain = c.k_uncertain;
  lc.max_anomalous = c.k_anomalous;
  return lc;
}

const std::string kSessionFile = "session.json";
const std::string kJournalFile = "journal.jsonl";

}  // namespace

LabelingSession::LabelingSession(std::string id, SessionConfig config, std::string directory,
                                 std::unique_ptr<ActiveLearner> learner)
    : id_(std::move(id)), config_(config), directory_(std::move(directory)), learner_(std::move(learner)) {}

LabelingSession::LabelingSession(std::string id, std::shared_ptr<const FeaturePipeline> pipeline,
                                 std::vector<RawSample> pool, std::map<std::string, Label> initial_labels,
                                 SessionConfig config, std::string directory)
    : id_(std::move(id)), config_(config), directory_(std::move(directory)) {
  std::set<Label> classes;
  for (const auto& [sid, label] : initial_labels) classes.insert(label);
  if (classes.size() < 2) {
    throw ServiceError(400, "a session needs labels from at least 2 classes to start; got " +
                                std::to_string(classes.size()));
  }
  learner_ = std::make_unique<ActiveLearner>(std::move(pipeline), std::move(pool), learner_config(config_));
  learner_->add_labels(initial_labels);
  queue_ = build_queue(*learner_);
  fs::create_directories(directory_);
  persist();
  append_line((fs::path(directory_) / kJournalFile).string(),
              ordered_json{{"event", "created"}, {"at", now_utc()}, {"labeled", initial_labels.size()}}.dump());
}

std::vector<QueueItem> LabelingSession::build_queue(ActiveLearner& learner) const {
  std::vector<QueueItem> items = learner.rank().queue;
  // Uncertain group first, each group by its own score; ranking order breaks ties.
  std::stable_sort(items.begin(), items.end(), [](const QueueItem& a, const QueueItem& b) {
    if (a.reason != b.reason) return a.reason == Reason::Uncertain;
    if (a.reason == Reason::Uncertain) return a.uncertainty > b.uncertainty;
    return a.anomaly > b.anomaly;
  });
  return items;
}

void LabelingSession::persist() const {
  ordered_json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["id"] = id_;
  doc["config"] = config_json(config_);
  doc["learner"] = ordered_json::parse(learner_->state().to_json());
  ordered_json queue = ordered_json::array();
  for (const auto& q : queue_) queue.push_back(queue_item_json(q));
  doc["queue"] = std::move(queue);
  ordered_json staged = ordered_json::object();
  for (const auto& [sid, s] : staged_) {
    staged[sid] = {{"label", std::string(to_string(s.label))}, {"analyst_id", s.analyst_id}, {"at", s.submitted_at}};
  }
  doc["staged"] = std::move(staged);
  ordered_json accuracy = ordered_json::array();
  for (const auto& a : accuracy_) {
    accuracy.push_back(
        {{"iteration", a.iteration}, {"uncertain", reason_json(a.uncertain)}, {"anomalous", reason_json(a.anomalous)}});
  }
  doc["accuracy"] = std::move(accuracy);
  write_file_atomic((fs::path(directory_) / kSessionFile).string(), doc.dump());
}

std::unique_ptr<LabelingSession> LabelingSession::load(const std::string& directory,
                                                       std::shared_ptr<const FeaturePipeline> pipeline,
                                                       std::vector<RawSample> pool) {
  const json doc = json::parse(read_file((fs::path(directory) / kSessionFile).string()));
  if (doc.value("schema_version", 0) != kSchemaVersion) throw Error("unsupported session file version");
  const SessionConfig config = config_from(doc.at("config"));
  auto learner = std::make_unique<ActiveLearner>(std::move(pipeline), std::move(pool), learner_config(config));
  learner->restore(IterationState::from_json(doc.at("learner").dump()));
  std::unique_ptr<LabelingSession> session(
      new LabelingSession(doc.at("id").get<std::string>(), config, directory, std::move(learner)));
  for (const auto& q : doc.at("queue")) session->queue_.push_back(queue_item_from(q));
  for (const auto& [sid, s] : doc.at("staged").items()) {
    auto label = parse_label(s.at("label").get<std::string>());
    if (!label) throw Error("unknown staged label in session file");
    session->staged_.emplace(sid, StagedLabel{*label, s.at("analyst_id").get<std::string>(), s.at("at").get<std::string>()});
  }
  for (const auto& a : doc.at("accuracy")) {
    session->accuracy_.push_back(
        {a.at("iteration").get<std::size_t>(), reason_from(a.at("uncertain")), reason_from(a.at("anomalous"))});
  }
  return session;
}

std::vector<const QueueItem*> LabelingSession::open_items() const {
  std::vector<const QueueItem*> out;
  for (const auto& q : queue_) {
    if (!staged_.contains(q.sample_id)) out.push_back(&q);
  }
  return out;
}

std::size_t LabelingSession::iteration() const {
  std::lock_guard lock(mutex_);
  return learner_->state().iteration;
}

std::size_t LabelingSession::pending_count() const {
  std::lock_guard lock(mutex_);
  return open_items().size();
}

std::string LabelingSession::queue_json() const {
  std::lock_guard lock(mutex_);
  ordered_json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["session_id"] = id_;
  doc["iteration"] = learner_->state().iteration;
  doc["retraining"] = retraining_;
  ordered_json items = ordered_json::array();
  for (const QueueItem* q : open_items()) {
    const RawSample& s = learner_->pool()[*learner_->index_of(q->sample_id)];
    ordered_json posterior = ordered_json::object();
    for (std::size_t c = 0; c < q->posterior.size(); ++c) posterior[class_name(static_cast<int>(c))] = q->posterior[c];
    items.push_back({{"sample_id", q->sample_id},
                     {"reason", std::string(to_string(q->reason))},
                     {"parent", s.parent},
                     {"child", s.child},
                     {"lolbin", std::string(to_string(s.lolbin))},
                     {"predicted_class", class_name(q->predicted_class)},
                     {"posterior", posterior},
                     {"uncertainty", q->uncertainty},
                     {"anomaly", q->anomaly}});
  }
  doc["items"] = std::move(items);
  return doc.dump();
}

std::string LabelingSession::submit_label(const std::string& sample_id, const std::string& label,
                                          const std::string& analyst_id) {
  std::lock_guard lock(mutex_);
  if (retraining_) throw ServiceError(409, "retraining in progress");
  const auto parsed = parse_label(label);
  if (!parsed) throw ServiceError(400, "unknown label: " + label);
  if (!learner_->index_of(sample_id)) throw ServiceError(404, "unknown sample: " + sample_id);
  if (staged_.contains(sample_id) || learner_->state().labeled.contains(sample_id)) {
    throw ServiceError(409, "already labeled: " + sample_id);
  }
  const bool pending =
      std::any_of(queue_.begin(), queue_.end(), [&](const QueueItem& q) { return q.sample_id == sample_id; });
  if (!pending) throw ServiceError(409, "sample is not pending: " + sample_id);

  StagedLabel staged{*parsed, analyst_id, now_utc()};
  staged_.emplace(sample_id, staged);
  persist();
  append_line((fs::path(directory_) / kJournalFile).string(),
              ordered_json{{"event", "label"},
                           {"at", staged.submitted_at},
                           {"iteration", learner_->state().iteration},
                           {"sample_id", sample_id},
                           {"label", std::string(to_string(*parsed))},
                           {"analyst_id", analyst_id}}
                  .dump());
  ordered_json ack;
  ack["schema_version"] = kSchemaVersion;
  ack["accepted"] = true;
  ack["sample_id"] = sample_id;
  ack["label"] = std::string(to_string(*parsed));
  ack["remaining"] = open_items().size();
  return ack.dump();
}

std::string LabelingSession::advance() {
  std::unique_lock lock(mutex_);
  if (retraining_) throw ServiceError(409, "retraining in progress");
  if (staged_.empty()) throw ServiceError(400, "nothing to learn");
  if (staged_.size() < config_.min_staged) {
    throw ServiceError(400, "nothing to learn: " + std::to_string(staged_.size()) + " of " +
                                std::to_string(config_.min_staged) + " required labels staged");
  }

  IterationAccuracy row;
  row.iteration = learner_->state().iteration;
  for (const auto& q : queue_) {
    auto it = staged_.find(q.sample_id);
    if (it == staged_.end() || q.predicted_class == class_index(Label::Benign)) continue;
    ReasonAccuracy& r = q.reason == Reason::Anomalous ? row.anomalous : row.uncertain;
    ++r.predicted_malicious;
    if (is_malicious(it->second.label)) ++r.confirmed_malicious;
  }
  for (ReasonAccuracy* r : {&row.uncertain, &row.anomalous}) {
    if (r->predicted_malicious > 0) {
      r->accuracy = static_cast<double>(r->confirmed_malicious) / static_cast<double>(r->predicted_malicious);
    }
  }
  std::map<std::string, Label> labels;
  for (const auto& [sid, s] : staged_) labels.emplace(sid, s.label);

  // Retrain on a copy without holding the lock, so queue reads keep working
  // and submissions see the retraining flag.
  retraining_ = true;
  auto next = std::make_unique<ActiveLearner>(*learner_);
  lock.unlock();
  std::vector<QueueItem> next_queue;
  try {
    next->commit_iteration(labels);
    next_queue = build_queue(*next);
  } catch (...) {
    lock.lock();
    retraining_ = false;
    throw;
  }
  lock.lock();
  learner_ = std::move(next);
  queue_ = std::move(next_queue);
  staged_.clear();
  accuracy_.push_back(row);
  retraining_ = false;
  persist();
  append_line((fs::path(directory_) / kJournalFile).string(),
              ordered_json{{"event", "iterate"},
                           {"at", now_utc()},
                           {"iteration", learner_->state().iteration},
                           {"labels", labels.size()}}
                  .dump());

  ordered_json doc = ordered_json::parse(summary_locked());
  doc["accuracy"] = {{"iteration", row.iteration},
                     {"uncertain", reason_json(row.uncertain)},
                     {"anomalous", reason_json(row.anomalous)}};
  return doc.dump();
}

std::string LabelingSession::summary_locked() const {
  ordered_json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["session_id"] = id_;
  doc["iteration"] = learner_->state().iteration;
  doc["labeled"] = learner_->state().labeled.size();
  doc["staged"] = staged_.size();
  doc["queue_length"] = open_items().size();
  doc["config"] = config_json(config_);
  return doc.dump();
}

std::string LabelingSession::summary_json() const {
  std::lock_guard lock(mutex_);
  return summary_locked();
}

std::string LabelingSession::metrics_json() const {
  std::lock_guard lock(mutex_);
  ordered_json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["session_id"] = id_;
  doc["iteration"] = learner_->state().iteration;
  doc["labeled"] = learner_->state().labeled.size();
  doc["staged"] = staged_.size();
  doc["pending"] = open_items().size();
  ordered_json rows = ordered_json::array();
  for (const auto& a : accuracy_) {
    rows.push_back(
        {{"iteration", a.iteration}, {"uncertain", reason_json(a.uncertain)}, {"anomalous", reason_json(a.anomalous)}});
  }
  doc["accuracy"] = std::move(rows);
  return doc.dump();
}

std::string LabelingSession::sample_json(const std::string& sample_id) {
  std::lock_guard lock(mutex_);
  const auto index = learner_->index_of(sample_id);
  if (!index) throw ServiceError(404, "unknown sample: " + sample_id);
  const RawSample& s = learner_->pool()[*index];
  ordered_json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["session_id"] = id_;
  doc["sample_id"] = s.id;
  doc["parent"] = s.parent;
  doc["child"] = s.child;
  doc["lolbin"] = std::string(to_string(s.lolbin));

  const auto& labeled = learner_->state().labeled;
  auto queued = std::find_if(queue_.begin(), queue_.end(), [&](const QueueItem& q) { return q.sample_id == sample_id; });
  if (auto it = labeled.find(sample_id); it != labeled.end()) {
    doc["status"] = "labeled";
    doc["label"] = std::string(to_string(it->second));
  } else if (auto st = staged_.find(sample_id); st != staged_.end()) {
    doc["status"] = "staged";
    doc["label"] = std::string(to_string(st->second.label));
  } else if (queued != queue_.end()) {
    doc["status"] = "pending";
  } else {
    doc["status"] = "unselected";
  }
  if (queued != queue_.end()) doc["queue_item"] = queue_item_json(*queued);

  // Token scores come from the model of the current iteration, so retraining
  // in another request does not change what is shown here.
  const Ranking& ranking = learner_->rank();
  const TokenSequence raw = tokenize(s);
  const TokenSequence normalized = normalize(raw, learner_->pipeline().vocabulary());
  ordered_json tokens = ordered_json::array();
  for (std::size_t i = 0; i < raw.size(); ++i) {
    tokens.push_back({{"token", raw.tokens[i]},
                      {"normalized", normalized.tokens[i]},
                      {"score", ranking.scores.score(normalized.tokens[i], s.lolbin)}});
  }
  doc["tokens"] = std::move(tokens);
  const Prediction p = ranking.classifier->predict(ranking.features.row(*index));
  doc["predicted_class"] = class_name(p.label);
  doc["posterior"] = p.posterior;
  return doc.dump();
}

LabelingService::LabelingService(std::vector<RawSample> corpus, std::vector<RawSample> pool, std::string state_dir,
                                 PipelineConfig pipeline_config)
    : corpus_(std::move(corpus)), pool_(std::move(pool)), state_dir_(std::move(state_dir)) {
  fs::create_directories(state_dir_);
  std::vector<RawSample> all = corpus_;
  all.insert(all.end(), pool_.begin(), pool_.end());

  const fs::path pipeline_path = fs::path(state_dir_) / "pipeline.json";
  if (fs::exists(pipeline_path)) {
    pipeline_ = std::make_shared<const FeaturePipeline>(FeaturePipeline::load(pipeline_path.string()));
  } else {
    auto trained = FeaturePipeline::train(all, pipeline_config);
    trained.save(pipeline_path.string());
    pipeline_ = std::make_shared<const FeaturePipeline>(std::move(trained));
  }

  std::set<std::string> ids;
  for (const auto& s : all) {
    if (!ids.insert(s.id).second) throw Error("duplicate sample id across corpus and pool: " + s.id);
  }
  const fs::path index_path = fs::path(state_dir_) / "service.json";
  if (fs::exists(index_path)) {
    const json doc = json::parse(read_file(index_path.string()));
    next_session_ = doc.at("next_session").get<std::size_t>();
    if (doc.at("sample_count").get<std::size_t>() != all.size()) {
      throw Error("state directory was created for a different corpus");
    }
  }
  const fs::path sessions = fs::path(state_dir_) / "sessions";
  if (fs::exists(sessions)) {
    std::vector<fs::path> dirs;
    for (const auto& entry : fs::directory_iterator(sessions)) {
      if (entry.is_directory() && fs::exists(entry.path() / kSessionFile)) dirs.push_back(entry.path());
    }
    std::sort(dirs.begin(), dirs.end());
    for (const auto& dir : dirs) {
      auto session = LabelingSession::load(dir.string(), pipeline_, all);
      sessions_.emplace(session->id(), std::move(session));
    }
  }
  save_index();
}

void LabelingService::save_index() const {
  ordered_json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["next_session"] = next_session_;
  doc["sample_count"] = corpus_.size() + pool_.size();
  write_file_atomic((fs::path(state_dir_) / "service.json").string(), doc.dump());
}

std::string LabelingService::create_session(const std::string& body) {
  const json request = body.empty() ? json::object() : json::parse(body);
  if (!request.is_object()) throw ServiceError(400, "session request must be a JSON object");
  const SessionConfig config = config_from(request);

  std::lock_guard lock(mutex_);
  std::map<std::string, Label> initial;
  if (config.seed_labels == 0) {
    for (const auto& s : corpus_) {
      if (s.label) initial.emplace(s.id, *s.label);
    }
  } else {
    std::vector<RawSample> labeled;
    for (const auto& s : corpus_) {
      if (s.label) labeled.push_back(s);
    }
    try {
      initial = draw_seed_labels(labeled, config.seed_labels, config.seed);
    } catch (const Error& e) {
      throw ServiceError(400, e.what());
    }
  }
  std::vector<RawSample> all = corpus_;
  all.insert(all.end(), pool_.begin(), pool_.end());
  const std::string id = "s" + std::to_string(next_session_);
  auto session = std::make_unique<LabelingSession>(id, pipeline_, std::move(all), std::move(initial), config,
                                                   (fs::path(state_dir_) / "sessions" / id).string());
  ++next_session_;
  save_index();
  const std::string summary = session->summary_json();
  sessions_.emplace(id, std::move(session));
  return summary;
}

LabelingSession& LabelingService::session(const std::string& id) {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw ServiceError(404, "unknown session: " + id);
  return *it->second;
}

namespace {

void reply_error(httplib::Response& res, int status, const std::string& message) {
  res.status = status;
  res.set_content(ordered_json{{"schema_version", kSchemaVersion}, {"error", message}}.dump(), "application/json");
}

template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    res.set_content(fn(), "application/json");
    res.status = 200;
  } catch (const ServiceError& e) {
    reply_error(res, e.status(), e.what());
  } catch (const json::exception& e) {
    reply_error(res, 400, std::string("malformed JSON: ") + e.what());
  } catch (const Error& e) {
    reply_error(res, 400, e.what());
  } catch (const std::exception& e) {
    reply_error(res, 500, e.what());
  }
}

}  // namespace

void register_routes(httplib::Server& server, LabelingService& service) {
  server.Get("/health", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(ordered_json{{"schema_version", kSchemaVersion}, {"status", "ok"}}.dump(), "application/json");
  });
  server.Post("/sessions", [&service](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { return service.create_session(req.body); });
    if (res.status == 200) res.status = 201;
  });
  server.Get(R"(/sessions/([^/]+))", [&service](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { return service.session(req.matches[1]).summary_json(); });
  });
  server.Get(R"(/sessions/([^/]+)/queue)", [&service](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { return service.session(req.matches[1]).queue_json(); });
  });
  server.Post(R"(/sessions/([^/]+)/labels)", [&service](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const json body = json::parse(req.body);
      if (!body.is_object() || !body.contains("sample_id") || !body.contains("label")) {
        throw ServiceError(400, "label submissions need sample_id and label");
      }
      return service.session(req.matches[1])
          .submit_label(body.at("sample_id").get<std::string>(), body.at("label").get<std::string>(),
                        body.value("analyst_id", std::string()));
    });
  });
  server.Post(R"(/sessions/([^/]+)/iterate)", [&service](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { return service.session(req.matches[1]).advance(); });
  });
  server.Get(R"(/sessions/([^/]+)/metrics)", [&service](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { return service.session(req.matches[1]).metrics_json(); });
  });
  server.Get(R"(/sessions/([^/]+)/samples/([^/]+))", [&service](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { return service.session(req.matches[1]).sample_json(req.matches[2]); });
  });
}

}  // namespace lolal
