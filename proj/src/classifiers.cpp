#include "lolal/classifiers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "json.hpp"
#include "lolal/io.hpp"

namespace lolal {
namespace {

double sigmoid(double s) {
  if (s >= 0) return 1.0 / (1.0 + std::exp(-s));
  const double e = std::exp(s);
  return e / (1.0 + e);
}

double softplus(double s) { return std::max(s, 0.0) + std::log1p(std::exp(-std::abs(s))); }

void check_training_set(const Matrix& x, std::span<const int> y, std::size_t n_classes) {
  if (x.rows() == 0) throw Error("classifier needs at least one training row");
  if (y.size() != x.rows()) throw Error("label count does not match row count");
  for (int label : y) {
    if (label < 0 || static_cast<std::size_t>(label) >= n_classes) throw Error("label out of range");
  }
}

std::vector<int> distinct_classes(std::span<const int> y) {
  std::set<int> seen(y.begin(), y.end());
  return {seen.begin(), seen.end()};
}

void softmax_in_place(std::span<double> v) {
  const double hi = *std::max_element(v.begin(), v.end());
  double sum = 0.0;
  for (double& s : v) {
    s = std::exp(s - hi);
    sum += s;
  }
  for (double& s : v) s /= sum;
}

}  // namespace

Vector LogisticModel::standardize(std::span<const double> x) const {
  Vector z(x.begin(), x.end());
  if (feature_mean.empty()) return z;
  for (std::size_t j = 0; j < z.size(); ++j) z[j] = (z[j] - feature_mean[j]) / feature_scale[j];
  return z;
}

Vector LogisticModel::sigmoids(std::span<const double> x) const {
  const Vector z = standardize(x);
  Vector out(n_classes);
  for (std::size_t c = 0; c < n_classes; ++c) {
    auto w = weights.row(c);
    out[c] = sigmoid(std::inner_product(w.begin(), w.end(), z.begin(), 0.0) + bias[c]);
  }
  return out;
}

Vector LogisticModel::predict_proba(std::span<const double> x) const {
  Vector p = sigmoids(x);
  const double sum = std::accumulate(p.begin(), p.end(), 0.0);
  for (double& v : p) v = sum > 0 ? v / sum : 1.0 / static_cast<double>(p.size());
  return p;
}

double logistic_objective(const LogisticModel& model, const Matrix& z, std::span<const int> y, double l2) {
  const double n = static_cast<double>(z.rows());
  double total = 0.0;
  for (std::size_t c = 0; c < model.n_classes; ++c) {
    auto w = model.weights.row(c);
    double loss = 0.0;
    for (std::size_t i = 0; i < z.rows(); ++i) {
      auto row = z.row(i);
      const double s = std::inner_product(w.begin(), w.end(), row.begin(), 0.0) + model.bias[c];
      const double t = y[i] == static_cast<int>(c) ? 1.0 : 0.0;
      loss += softplus(s) - t * s;
    }
    total += loss / n + 0.5 * l2 * std::inner_product(w.begin(), w.end(), w.begin(), 0.0);
  }
  return total;
}

LogisticGradient logistic_gradient(const LogisticModel& model, const Matrix& z, std::span<const int> y, double l2) {
  const std::size_t d = model.n_features();
  const double n = static_cast<double>(z.rows());
  LogisticGradient grad{Matrix(model.n_classes, d), Vector(model.n_classes, 0.0)};
  for (std::size_t c = 0; c < model.n_classes; ++c) {
    auto w = model.weights.row(c);
    auto gw = grad.weights.row(c);
    for (std::size_t i = 0; i < z.rows(); ++i) {
      auto row = z.row(i);
      const double s = std::inner_product(w.begin(), w.end(), row.begin(), 0.0) + model.bias[c];
      const double t = y[i] == static_cast<int>(c) ? 1.0 : 0.0;
      const double r = (sigmoid(s) - t) / n;
      for (std::size_t j = 0; j < d; ++j) gw[j] += r * row[j];
      grad.bias[c] += r;
    }
    for (std::size_t j = 0; j < d; ++j) gw[j] += l2 * w[j];
  }
  return grad;
}

LogisticModel fit_logistic(const Matrix& x, std::span<const int> y, std::size_t n_classes,
                           const LogisticConfig& config) {
  check_training_set(x, y, n_classes);
  if (distinct_classes(y).size() < 2) throw Error("logistic regression needs at least two classes");

  const std::size_t d = x.cols();
  const double n = static_cast<double>(x.rows());
  LogisticModel model;
  model.n_classes = n_classes;
  model.weights = Matrix(n_classes, d);
  model.bias.assign(n_classes, 0.0);
  if (config.standardize) {
    model.feature_mean.assign(d, 0.0);
    model.feature_scale.assign(d, 0.0);
    for (std::size_t i = 0; i < x.rows(); ++i) {
      for (std::size_t j = 0; j < d; ++j) model.feature_mean[j] += x(i, j);
    }
    for (double& m : model.feature_mean) m /= n;
    for (std::size_t i = 0; i < x.rows(); ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = x(i, j) - model.feature_mean[j];
        model.feature_scale[j] += diff * diff;
      }
    }
    for (double& s : model.feature_scale) {
      s = std::sqrt(s / n);
      if (s < 1e-12) s = 1.0;
    }
  }

  Matrix z(0, d);
  for (std::size_t i = 0; i < x.rows(); ++i) z.append_row(model.standardize(x.row(i)));

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    LogisticGradient grad = logistic_gradient(model, z, y, config.l2);
    for (std::size_t k = 0; k < model.weights.data().size(); ++k) {
      model.weights.data()[k] -= config.learning_rate * grad.weights.data()[k];
    }
    for (std::size_t c = 0; c < n_classes; ++c) model.bias[c] -= config.learning_rate * grad.bias[c];
  }
  return model;
}

double RegressionTree::predict(std::span<const double> x) const {
  const RegressionNode* node = &nodes.front();
  while (node->feature >= 0) {
    node = &nodes[static_cast<std::size_t>(x[static_cast<std::size_t>(node->feature)] <= node->threshold ? node->left
                                                                                                        : node->right)];
  }
  return node->value;
}

Vector BoostedModel::raw_scores(std::span<const double> x) const {
  Vector scores = base_score;
  for (const auto& stage : stages) {
    for (std::size_t k = 0; k < stage.size(); ++k) scores[k] += stage[k].predict(x);
  }
  return scores;
}

Vector BoostedModel::predict_proba(std::span<const double> x) const {
  Vector p(n_classes, 0.0);
  if (degenerate) {
    p[static_cast<std::size_t>(trained_classes.front())] = 1.0;
    return p;
  }
  Vector scores = raw_scores(x);
  softmax_in_place(scores);
  for (std::size_t k = 0; k < trained_classes.size(); ++k) p[static_cast<std::size_t>(trained_classes[k])] = scores[k];
  return p;
}

namespace {

// Level-wise regression tree on presorted feature columns with second-order
// (Newton) leaf values and the matching split gain.
class RegressionTreeBuilder {
 public:
  RegressionTreeBuilder(const Matrix& x, const std::vector<std::vector<std::size_t>>& sorted,
                        const BoostedConfig& config)
      : x_(x), sorted_(sorted), config_(config) {}

  RegressionTree build(std::span<const double> g, std::span<const double> h) {
    const std::size_t n = x_.rows();
    RegressionTree tree;
    tree.nodes.emplace_back();
    std::vector<int> node_of(n, 0);
    std::vector<int> active{0};
    std::vector<double> grad_sum{0.0}, hess_sum{0.0};
    for (std::size_t i = 0; i < n; ++i) {
      grad_sum[0] += g[i];
      hess_sum[0] += h[i];
    }

    for (std::size_t depth = 0; depth < config_.max_depth && !active.empty(); ++depth) {
      // slot[node] = position in `active`, or -1.
      std::vector<int> slot(tree.nodes.size(), -1);
      for (std::size_t a = 0; a < active.size(); ++a) slot[static_cast<std::size_t>(active[a])] = static_cast<int>(a);
      const std::size_t m = active.size();
      std::vector<double> best_gain(m, 0.0), best_threshold(m, 0.0);
      std::vector<int> best_feature(m, -1);
      std::vector<double> gl(m), hl(m), last(m);
      std::vector<char> seen(m);
      for (std::size_t f = 0; f < x_.cols(); ++f) {
        std::fill(gl.begin(), gl.end(), 0.0);
        std::fill(hl.begin(), hl.end(), 0.0);
        std::fill(seen.begin(), seen.end(), 0);
        for (std::size_t r : sorted_[f]) {
          const int node = node_of[r];
          if (node < 0) continue;
          const int s = slot[static_cast<std::size_t>(node)];
          if (s < 0) continue;
          const auto a = static_cast<std::size_t>(s);
          const double v = x_(r, f);
          if (seen[a] && v > last[a]) {
            const double G = grad_sum[a], H = hess_sum[a];
            const double gr = G - gl[a], hr = H - hl[a];
            if (hl[a] >= config_.min_child_hessian && hr >= config_.min_child_hessian) {
              const double gain = gl[a] * gl[a] / (hl[a] + config_.lambda) + gr * gr / (hr + config_.lambda) -
                                  G * G / (H + config_.lambda);
              if (gain > best_gain[a] + 1e-12) {
                best_gain[a] = gain;
                best_feature[a] = static_cast<int>(f);
                double threshold = last[a] + (v - last[a]) / 2.0;
                if (!(threshold < v)) threshold = last[a];
                best_threshold[a] = threshold;
              }
            }
          }
          gl[a] += g[r];
          hl[a] += h[r];
          last[a] = v;
          seen[a] = 1;
        }
      }

      std::vector<int> next;
      std::vector<double> next_grad, next_hess;
      std::vector<int> child_slot(tree.nodes.size() + 2 * m, -1);
      for (std::size_t a = 0; a < m; ++a) {
        const auto id = static_cast<std::size_t>(active[a]);
        if (best_feature[a] < 0) {
          tree.nodes[id].value = leaf_value(grad_sum[a], hess_sum[a]);
          continue;
        }
        const int left = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes.emplace_back();
        RegressionNode& node = tree.nodes[id];
        node.feature = best_feature[a];
        node.threshold = best_threshold[a];
        node.left = left;
        node.right = left + 1;
        for (int child : {left, left + 1}) {
          child_slot[static_cast<std::size_t>(child)] = static_cast<int>(next.size());
          next.push_back(child);
          next_grad.push_back(0.0);
          next_hess.push_back(0.0);
        }
      }
      for (std::size_t r = 0; r < n; ++r) {
        const int node = node_of[r];
        if (node < 0) continue;
        const RegressionNode& parent = tree.nodes[static_cast<std::size_t>(node)];
        if (parent.feature < 0) {
          node_of[r] = -1;
          continue;
        }
        const int child = x_(r, static_cast<std::size_t>(parent.feature)) <= parent.threshold ? parent.left : parent.right;
        node_of[r] = child;
        const auto s = static_cast<std::size_t>(child_slot[static_cast<std::size_t>(child)]);
        next_grad[s] += g[r];
        next_hess[s] += h[r];
      }
      active = std::move(next);
      grad_sum = std::move(next_grad);
      hess_sum = std::move(next_hess);
    }
    for (std::size_t a = 0; a < active.size(); ++a) {
      tree.nodes[static_cast<std::size_t>(active[a])].value = leaf_value(grad_sum[a], hess_sum[a]);
    }
    return tree;
  }

 private:
  double leaf_value(double g, double h) const { return -config_.learning_rate * g / (h + config_.lambda); }

  const Matrix& x_;
  const std::vector<std::vector<std::size_t>>& sorted_;
  const BoostedConfig& config_;
};

double cross_entropy(const Matrix& scores, std::span<const std::size_t> target) {
  double loss = 0.0;
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    auto row = scores.row(i);
    const double hi = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double s : row) sum += std::exp(s - hi);
    loss += hi + std::log(sum) - row[target[i]];
  }
  return loss / static_cast<double>(scores.rows());
}

}  // namespace

BoostedModel fit_boosted(const Matrix& x, std::span<const int> y, std::size_t n_classes,
                         const BoostedConfig& config) {
  check_training_set(x, y, n_classes);
  if (config.max_depth == 0) throw Error("boosted trees need depth of at least 1");
  BoostedModel model;
  model.n_classes = n_classes;
  model.n_features = x.cols();
  model.learning_rate = config.learning_rate;
  model.trained_classes = distinct_classes(y);
  if (model.trained_classes.size() == 1) {
    model.degenerate = true;
    model.base_score = {0.0};
    return model;
  }

  const std::size_t n = x.rows();
  const std::size_t k_count = model.trained_classes.size();
  std::vector<std::size_t> target(n);
  for (std::size_t i = 0; i < n; ++i) {
    target[i] = static_cast<std::size_t>(
        std::lower_bound(model.trained_classes.begin(), model.trained_classes.end(), y[i]) -
        model.trained_classes.begin());
  }
  model.base_score.assign(k_count, 0.0);
  {
    Vector counts(k_count, 0.0);
    for (std::size_t t : target) counts[t] += 1.0;
    for (std::size_t k = 0; k < k_count; ++k) model.base_score[k] = std::log(counts[k] / static_cast<double>(n));
  }

  std::vector<std::vector<std::size_t>> sorted(x.cols(), std::vector<std::size_t>(n));
  for (std::size_t f = 0; f < x.cols(); ++f) {
    std::iota(sorted[f].begin(), sorted[f].end(), 0);
    std::stable_sort(sorted[f].begin(), sorted[f].end(), [&](std::size_t a, std::size_t b) { return x(a, f) < x(b, f); });
  }

  Matrix scores(n, k_count);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < k_count; ++k) scores(i, k) = model.base_score[k];
  }
  model.stage_losses.push_back(cross_entropy(scores, target));

  RegressionTreeBuilder builder(x, sorted, config);
  Matrix prob(n, k_count);
  Vector g(n), h(n);
  for (std::size_t stage = 0; stage < config.stages; ++stage) {
    for (std::size_t i = 0; i < n; ++i) {
      auto p = prob.row(i);
      auto s = scores.row(i);
      std::copy(s.begin(), s.end(), p.begin());
      softmax_in_place(p);
    }
    std::vector<RegressionTree> trees;
    trees.reserve(k_count);
    for (std::size_t k = 0; k < k_count; ++k) {
      for (std::size_t i = 0; i < n; ++i) {
        const double p = prob(i, k);
        g[i] = p - (target[i] == k ? 1.0 : 0.0);
        h[i] = std::max(p * (1.0 - p), 1e-16);
      }
      trees.push_back(builder.build(g, h));
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < k_count; ++k) scores(i, k) += trees[k].predict(x.row(i));
    }
    model.stages.push_back(std::move(trees));
    model.stage_losses.push_back(cross_entropy(scores, target));
  }
  return model;
}

std::string_view to_string(ClassifierKind kind) {
  switch (kind) {
    case ClassifierKind::Logistic: return "logistic";
    case ClassifierKind::Boosted: return "boosted";
    case ClassifierKind::Forest: return "forest";
  }
  return "?";
}

std::optional<ClassifierKind> parse_classifier_kind(std::string_view text) {
  if (text == "logistic" || text == "lr") return ClassifierKind::Logistic;
  if (text == "boosted" || text == "gbt") return ClassifierKind::Boosted;
  if (text == "forest" || text == "rf") return ClassifierKind::Forest;
  return std::nullopt;
}

Classifier::Classifier(LogisticModel model)
    : model_(std::move(model)),
      n_classes_(std::get<LogisticModel>(model_).n_classes),
      n_features_(std::get<LogisticModel>(model_).n_features()) {}

Classifier::Classifier(BoostedModel model)
    : model_(std::move(model)),
      n_classes_(std::get<BoostedModel>(model_).n_classes),
      n_features_(std::get<BoostedModel>(model_).n_features) {}

Classifier::Classifier(RandomForest forest, std::size_t n_classes)
    : model_(std::move(forest)), n_classes_(n_classes), n_features_(std::get<RandomForest>(model_).n_features()) {}

ClassifierKind Classifier::kind() const {
  switch (model_.index()) {
    case 0: return ClassifierKind::Logistic;
    case 1: return ClassifierKind::Boosted;
    default: return ClassifierKind::Forest;
  }
}

Vector Classifier::predict_proba(std::span<const double> x) const {
  if (x.size() != n_features_) {
    throw Error("feature length mismatch: expected " + std::to_string(n_features_) + ", got " +
                std::to_string(x.size()));
  }
  return std::visit([&](const auto& m) { return m.predict_proba(x); }, model_);
}

Prediction Classifier::predict(std::span<const double> x) const {
  Prediction out;
  out.posterior = predict_proba(x);
  out.label = static_cast<int>(argmax(out.posterior));
  return out;
}

std::vector<Prediction> Classifier::predict_all(const Matrix& x) const {
  std::vector<Prediction> out;
  out.reserve(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) out.push_back(predict(x.row(i)));
  return out;
}

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

ordered_json matrix_json(const Matrix& m) { return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.data()}}; }

Matrix matrix_from(const json& j) {
  Matrix m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
  auto data = j.at("data").get<std::vector<double>>();
  if (data.size() != m.data().size()) throw Error("corrupt matrix in model file");
  m.data() = std::move(data);
  return m;
}

ordered_json regression_tree_json(const RegressionTree& tree) {
  ordered_json nodes = ordered_json::array();
  for (const auto& n : tree.nodes) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value});
  return nodes;
}

RegressionTree regression_tree_from(const json& j) {
  RegressionTree tree;
  for (const auto& n : j) {
    tree.nodes.push_back({n.at(0).get<int>(), n.at(1).get<double>(), n.at(2).get<int>(), n.at(3).get<int>(),
                          n.at(4).get<double>()});
  }
  if (tree.nodes.empty()) throw Error("empty regression tree in model file");
  return tree;
}

ordered_json forest_json(const RandomForest& forest) {
  ordered_json trees = ordered_json::array();
  for (const auto& tree : forest.trees()) {
    ordered_json nodes = ordered_json::array();
    for (const auto& n : tree.nodes()) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.class_counts});
    trees.push_back(std::move(nodes));
  }
  ordered_json out = {{"n_classes", forest.n_classes()}, {"n_features", forest.n_features()}, {"trees", trees}};
  if (forest.oob_accuracy()) out["oob_accuracy"] = *forest.oob_accuracy();
  return out;
}

RandomForest forest_from(const json& j) {
  std::vector<DecisionTree> trees;
  for (const auto& t : j.at("trees")) {
    std::vector<TreeNode> nodes;
    for (const auto& n : t) {
      TreeNode node;
      node.feature = n.at(0).get<int>();
      node.threshold = n.at(1).get<double>();
      node.left = n.at(2).get<int>();
      node.right = n.at(3).get<int>();
      node.class_counts = n.at(4).get<std::vector<double>>();
      nodes.push_back(std::move(node));
    }
    trees.emplace_back(std::move(nodes));
  }
  RandomForest forest(std::move(trees), j.at("n_classes").get<std::size_t>(), j.at("n_features").get<std::size_t>());
  if (j.contains("oob_accuracy")) forest.set_oob_accuracy(j.at("oob_accuracy").get<double>());
  return forest;
}

}  // namespace

std::string Classifier::to_json() const {
  ordered_json doc;
  doc["version"] = kFormatVersion;
  doc["kind"] = std::string(to_string(kind()));
  doc["n_classes"] = n_classes_;
  doc["n_features"] = n_features_;
  if (const auto* m = std::get_if<LogisticModel>(&model_)) {
    doc["weights"] = matrix_json(m->weights);
    doc["bias"] = m->bias;
    doc["feature_mean"] = m->feature_mean;
    doc["feature_scale"] = m->feature_scale;
  } else if (const auto* b = std::get_if<BoostedModel>(&model_)) {
    doc["learning_rate"] = b->learning_rate;
    doc["trained_classes"] = b->trained_classes;
    doc["base_score"] = b->base_score;
    doc["degenerate"] = b->degenerate;
    doc["stage_losses"] = b->stage_losses;
    ordered_json stages = ordered_json::array();
    for (const auto& stage : b->stages) {
      ordered_json trees = ordered_json::array();
      for (const auto& tree : stage) trees.push_back(regression_tree_json(tree));
      stages.push_back(std::move(trees));
    }
    doc["stages"] = std::move(stages);
  } else {
    doc["forest"] = forest_json(std::get<RandomForest>(model_));
  }
  return doc.dump();
}

Classifier Classifier::from_json(std::string_view text) {
  const json doc = json::parse(text);
  if (doc.value("version", 0) != kFormatVersion) throw Error("unsupported classifier model version");
  const auto kind = parse_classifier_kind(doc.at("kind").get<std::string>());
  if (!kind) throw Error("unknown classifier kind in model file");
  const auto n_classes = doc.at("n_classes").get<std::size_t>();
  switch (*kind) {
    case ClassifierKind::Logistic: {
      LogisticModel m;
      m.n_classes = n_classes;
      m.weights = matrix_from(doc.at("weights"));
      m.bias = doc.at("bias").get<Vector>();
      m.feature_mean = doc.at("feature_mean").get<Vector>();
      m.feature_scale = doc.at("feature_scale").get<Vector>();
      if (m.weights.rows() != n_classes || m.bias.size() != n_classes) throw Error("corrupt logistic model");
      return Classifier(std::move(m));
    }
    case ClassifierKind::Boosted: {
      BoostedModel b;
      b.n_classes = n_classes;
      b.n_features = doc.at("n_features").get<std::size_t>();
      b.learning_rate = doc.at("learning_rate").get<double>();
      b.trained_classes = doc.at("trained_classes").get<std::vector<int>>();
      b.base_score = doc.at("base_score").get<Vector>();
      b.degenerate = doc.at("degenerate").get<bool>();
      b.stage_losses = doc.value("stage_losses", Vector{});
      for (const auto& stage : doc.at("stages")) {
        std::vector<RegressionTree> trees;
        for (const auto& t : stage) trees.push_back(regression_tree_from(t));
        if (trees.size() != b.trained_classes.size()) throw Error("corrupt boosted stage");
        b.stages.push_back(std::move(trees));
      }
      if (b.trained_classes.empty()) throw Error("corrupt boosted model");
      return Classifier(std::move(b));
    }
    case ClassifierKind::Forest:
      return Classifier(forest_from(doc.at("forest")), n_classes);
  }
  throw Error("unknown classifier kind in model file");
}

void Classifier::save(const std::string& path) const { write_file_atomic(path, to_json()); }

Classifier Classifier::load(const std::string& path) { return from_json(read_file(path)); }

Classifier fit_classifier(const Matrix& x, std::span<const int> y, std::size_t n_classes,
                          const ClassifierConfig& config) {
  switch (config.kind) {
    case ClassifierKind::Logistic: return Classifier(fit_logistic(x, y, n_classes, config.logistic));
    case ClassifierKind::Boosted: return Classifier(fit_boosted(x, y, n_classes, config.boosted));
    case ClassifierKind::Forest:
      check_training_set(x, y, n_classes);
      return Classifier(fit_random_forest(x, y, n_classes, config.forest), n_classes);
  }
  throw Error("unknown classifier kind");
}

}  // namespace lolal
