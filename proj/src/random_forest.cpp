#include "lolal/random_forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lolal/rng.hpp"

namespace lolal {

double TreeNode::total() const { return std::accumulate(class_counts.begin(), class_counts.end(), 0.0); }

DecisionTree::DecisionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {
  if (nodes_.empty()) throw Error("decision tree needs at least one node");
}

const TreeNode& DecisionTree::leaf(std::span<const double> x) const {
  const TreeNode* node = &nodes_.front();
  while (!node->is_leaf()) {
    node = &nodes_[static_cast<std::size_t>(x[static_cast<std::size_t>(node->feature)] <= node->threshold ? node->left
                                                                                                        : node->right)];
  }
  return *node;
}

Vector DecisionTree::leaf_distribution(std::span<const double> x) const {
  const TreeNode& node = leaf(x);
  Vector dist = node.class_counts;
  const double total = node.total();
  if (total > 0) {
    for (double& v : dist) v /= total;
  }
  return dist;
}

std::size_t DecisionTree::depth() const {
  std::size_t best = 0;
  std::vector<std::pair<int, std::size_t>> stack{{0, 0}};
  while (!stack.empty()) {
    auto [id, d] = stack.back();
    stack.pop_back();
    const TreeNode& node = nodes_[static_cast<std::size_t>(id)];
    best = std::max(best, d);
    if (!node.is_leaf()) {
      stack.emplace_back(node.left, d + 1);
      stack.emplace_back(node.right, d + 1);
    }
  }
  return best;
}

RandomForest::RandomForest(std::vector<DecisionTree> trees, std::size_t n_classes, std::size_t n_features)
    : trees_(std::move(trees)), n_classes_(n_classes), n_features_(n_features) {}

Vector RandomForest::predict_proba(std::span<const double> x) const {
  Vector out(n_classes_, 0.0);
  if (trees_.empty()) return out;
  for (const auto& tree : trees_) {
    Vector dist = tree.leaf_distribution(x);
    for (std::size_t c = 0; c < out.size() && c < dist.size(); ++c) out[c] += dist[c];
  }
  for (double& v : out) v /= static_cast<double>(trees_.size());
  return out;
}

double RandomForest::positive_score(std::span<const double> x) const {
  if (trees_.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& tree : trees_) {
    const TreeNode& node = tree.leaf(x);
    const double total = node.total();
    if (total > 0 && node.class_counts.size() > 1) sum += node.class_counts[1] / total;
  }
  return sum / static_cast<double>(trees_.size());
}

namespace {

double gini(std::span<const double> counts, double total) {
  if (total <= 0) return 0.0;
  double s = 1.0;
  for (double c : counts) {
    const double p = c / total;
    s -= p * p;
  }
  return s;
}

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& x, std::span<const int> y, std::size_t n_classes, const ForestConfig& config,
              std::vector<double> weights, Rng& rng)
      : x_(x), y_(y), n_classes_(n_classes), config_(config), weights_(std::move(weights)), rng_(rng) {
    mtry_ = config.features_per_split > 0
                ? std::min(config.features_per_split, x.cols())
                : std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(x.cols())))));
  }

  DecisionTree build() {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
      if (weights_[i] > 0) rows.push_back(i);
    }
    grow(rows, 0);
    return DecisionTree(std::move(nodes_));
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double score = -1.0;
  };

  std::vector<double> counts_of(const std::vector<std::size_t>& rows) const {
    std::vector<double> counts(n_classes_, 0.0);
    for (std::size_t r : rows) counts[static_cast<std::size_t>(y_[r])] += weights_[r];
    return counts;
  }

  int grow(const std::vector<std::size_t>& rows, std::size_t depth) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    std::vector<double> counts = counts_of(rows);
    const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
    const bool pure = std::count_if(counts.begin(), counts.end(), [](double c) { return c > 0; }) <= 1;
    const double min_leaf = static_cast<double>(config_.min_samples_leaf);
    if (pure || depth >= config_.max_depth || total < 2 * min_leaf) {
      nodes_[static_cast<std::size_t>(id)].class_counts = std::move(counts);
      return id;
    }
    Split split = best_split(rows, counts, total);
    if (split.feature < 0) {
      nodes_[static_cast<std::size_t>(id)].class_counts = std::move(counts);
      return id;
    }
    std::vector<std::size_t> left, right;
    for (std::size_t r : rows) {
      (x_(r, static_cast<std::size_t>(split.feature)) <= split.threshold ? left : right).push_back(r);
    }
    const int l = grow(left, depth + 1);
    const int rr = grow(right, depth + 1);
    TreeNode& node = nodes_[static_cast<std::size_t>(id)];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = l;
    node.right = rr;
    return id;
  }

  Split best_split(const std::vector<std::size_t>& rows, const std::vector<double>& counts, double total) {
    std::vector<std::size_t> features(x_.cols());
    std::iota(features.begin(), features.end(), 0);
    const double parent = gini(counts, total) * total;
    const double min_leaf = static_cast<double>(config_.min_samples_leaf);
    Split best;
    std::vector<std::size_t> order(rows);
    std::vector<double> left(n_classes_);
    for (std::size_t tried = 0; tried < features.size(); ++tried) {
      // Partial Fisher-Yates: draw the next candidate feature.
      std::size_t pick = tried + rng_.index(features.size() - tried);
      std::swap(features[tried], features[pick]);
      if (tried >= mtry_ && best.feature >= 0) break;
      const std::size_t f = features[tried];
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double va = x_(a, f), vb = x_(b, f);
        return va < vb || (va == vb && a < b);
      });
      std::fill(left.begin(), left.end(), 0.0);
      double left_total = 0.0;
      for (std::size_t i = 0; i + 1 < order.size(); ++i) {
        const std::size_t r = order[i];
        left[static_cast<std::size_t>(y_[r])] += weights_[r];
        left_total += weights_[r];
        const double v = x_(r, f);
        const double next = x_(order[i + 1], f);
        if (!(next > v)) continue;
        const double right_total = total - left_total;
        if (left_total < min_leaf || right_total < min_leaf) continue;
        double right_impurity = 1.0;
        for (std::size_t c = 0; c < n_classes_; ++c) {
          const double p = (counts[c] - left[c]) / right_total;
          right_impurity -= p * p;
        }
        const double score = parent - gini(left, left_total) * left_total - right_impurity * right_total;
        if (score > best.score) {
          best.feature = static_cast<int>(f);
          best.threshold = v + (next - v) / 2.0;
          if (!(best.threshold < next)) best.threshold = v;
          best.score = score;
        }
      }
    }
    return best;
  }

  const Matrix& x_;
  std::span<const int> y_;
  std::size_t n_classes_;
  const ForestConfig& config_;
  std::vector<double> weights_;
  Rng& rng_;
  std::size_t mtry_ = 1;
  std::vector<TreeNode> nodes_;
};

}  // namespace

RandomForest fit_random_forest(const Matrix& x, std::span<const int> y, std::size_t n_classes,
                               const ForestConfig& config, std::span<const double> multiplicity) {
  const std::size_t n = x.rows();
  if (n == 0) throw Error("random forest needs at least one training row");
  if (y.size() != n) throw Error("label count does not match row count");
  if (!multiplicity.empty() && multiplicity.size() != n) throw Error("multiplicity size does not match row count");
  if (config.n_trees == 0) throw Error("forest needs at least one tree");
  for (int label : y) {
    if (label < 0 || static_cast<std::size_t>(label) >= n_classes) throw Error("label out of range");
  }

  std::vector<double> base(n, 1.0);
  if (!multiplicity.empty()) base.assign(multiplicity.begin(), multiplicity.end());
  std::vector<double> cumulative(n);
  std::partial_sum(base.begin(), base.end(), cumulative.begin());
  const double total = cumulative.back();
  const auto draws = static_cast<std::size_t>(std::llround(total));

  Rng rng(config.seed);
  std::vector<DecisionTree> trees;
  trees.reserve(config.n_trees);
  std::vector<std::vector<double>> oob_sum(n, std::vector<double>(n_classes, 0.0));
  std::vector<std::size_t> oob_votes(n, 0);
  for (std::size_t t = 0; t < config.n_trees; ++t) {
    std::vector<double> weights(n, 0.0);
    if (config.bootstrap) {
      for (std::size_t k = 0; k < draws; ++k) {
        const double u = rng.uniform() * total;
        auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
        std::size_t idx = std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), n - 1);
        weights[idx] += 1.0;
      }
    } else {
      weights = base;
    }
    TreeBuilder builder(x, y, n_classes, config, weights, rng);
    trees.push_back(builder.build());
    for (std::size_t i = 0; i < n; ++i) {
      if (weights[i] > 0) continue;
      Vector dist = trees.back().leaf_distribution(x.row(i));
      for (std::size_t c = 0; c < n_classes; ++c) oob_sum[i][c] += dist[c];
      ++oob_votes[i];
    }
  }

  RandomForest forest(std::move(trees), n_classes, x.cols());
  std::size_t evaluated = 0, correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (oob_votes[i] == 0) continue;
    ++evaluated;
    if (static_cast<int>(argmax(oob_sum[i])) == y[i]) ++correct;
  }
  if (evaluated > 0) forest.set_oob_accuracy(static_cast<double>(correct) / static_cast<double>(evaluated));
  return forest;
}

}  // namespace lolal
