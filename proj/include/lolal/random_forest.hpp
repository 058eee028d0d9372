#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "lolal/types.hpp"

namespace lolal {

/// Internal nodes route x[feature] <= threshold to `left`. Leaves have
/// feature == -1 and carry the (in-bag) class counts that reached them.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::vector<double> class_counts;

  bool is_leaf() const { return feature < 0; }
  double total() const;
};

class DecisionTree {
 public:
  DecisionTree() = default;
  explicit DecisionTree(std::vector<TreeNode> nodes);

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  std::vector<TreeNode>& mutable_nodes() { return nodes_; }

  const TreeNode& leaf(std::span<const double> x) const;
  /// Class counts of the reached leaf divided by their total.
  Vector leaf_distribution(std::span<const double> x) const;
  std::size_t depth() const;

 private:
  std::vector<TreeNode> nodes_;
};

struct ForestConfig {
  std::size_t n_trees = 20;
  std::size_t max_depth = 12;
  std::size_t min_samples_leaf = 1;
  /// 0 selects floor(sqrt(feature count)).
  std::size_t features_per_split = 0;
  bool bootstrap = true;
  std::uint64_t seed = 1;
};

class RandomForest {
 public:
  RandomForest() = default;
  RandomForest(std::vector<DecisionTree> trees, std::size_t n_classes, std::size_t n_features);

  /// Mean over trees of the leaf class ratios.
  Vector predict_proba(std::span<const double> x) const;
  /// Mean over trees of positives / total in the reached leaf (class 1).
  double positive_score(std::span<const double> x) const;

  const std::vector<DecisionTree>& trees() const { return trees_; }
  std::vector<DecisionTree>& mutable_trees() { return trees_; }
  std::size_t n_classes() const { return n_classes_; }
  std::size_t n_features() const { return n_features_; }
  /// Out-of-bag accuracy computed at fit time, when any row was out of bag.
  std::optional<double> oob_accuracy() const { return oob_accuracy_; }
  void set_oob_accuracy(std::optional<double> value) { oob_accuracy_ = value; }

 private:
  std::vector<DecisionTree> trees_;
  std::size_t n_classes_ = 0;
  std::size_t n_features_ = 0;
  std::optional<double> oob_accuracy_;
};

/// Gini-split forest. `multiplicity`, when given, says how many identical
/// samples each row stands for; bootstrap draws are taken over the expanded
/// sample set so the result matches fitting the expanded matrix.
RandomForest fit_random_forest(const Matrix& x, std::span<const int> y, std::size_t n_classes,
                               const ForestConfig& config, std::span<const double> multiplicity = {});

}  // namespace lolal
