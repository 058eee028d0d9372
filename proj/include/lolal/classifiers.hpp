#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "lolal/random_forest.hpp"
#include "lolal/types.hpp"

namespace lolal {

struct LogisticConfig {
  double learning_rate = 0.5;
  double l2 = 1e-3;
  std::size_t epochs = 400;
  /// Fit on z-scored features; the stored weights apply to z-scores.
  bool standardize = true;
};

/// One-vs-rest logistic regression. Class scores are sigmoid(w_c . z + b_c)
/// over the standardized input z, normalized to sum to one.
struct LogisticModel {
  std::size_t n_classes = 0;
  Matrix weights;  // n_classes x d
  Vector bias;
  Vector feature_mean;
  Vector feature_scale;

  std::size_t n_features() const { return weights.cols(); }
  Vector standardize(std::span<const double> x) const;
  /// Per-class sigmoids before normalization.
  Vector sigmoids(std::span<const double> x) const;
  Vector predict_proba(std::span<const double> x) const;
};

/// Sum over classes of the mean binary cross-entropy over the rows of the
/// (already standardized) input plus l2/2 * |w_c|^2. The bias is not
/// penalized.
double logistic_objective(const LogisticModel& model, const Matrix& z, std::span<const int> y, double l2);
/// Gradient of `logistic_objective`, shaped like the model's weights and bias.
struct LogisticGradient {
  Matrix weights;
  Vector bias;
};
LogisticGradient logistic_gradient(const LogisticModel& model, const Matrix& z, std::span<const int> y, double l2);

/// Throws when fewer than two classes appear in `y`.
LogisticModel fit_logistic(const Matrix& x, std::span<const int> y, std::size_t n_classes,
                           const LogisticConfig& config = {});

struct BoostedConfig {
  std::size_t stages = 100;
  std::size_t max_depth = 4;
  double learning_rate = 0.1;
  /// L2 penalty on leaf values.
  double lambda = 1.0;
  double min_child_hessian = 1e-3;
};

struct RegressionNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
};

struct RegressionTree {
  std::vector<RegressionNode> nodes;
  double predict(std::span<const double> x) const;
};

/// Softmax gradient boosting. Classes that never appear in training keep a
/// posterior of zero. A single training class yields a degenerate model that
/// assigns that class probability one.
struct BoostedModel {
  std::size_t n_classes = 0;
  std::size_t n_features = 0;
  double learning_rate = 0.1;
  std::vector<int> trained_classes;
  Vector base_score;  // per trained class
  /// stages[s][k] is the tree of stage s for trained class k.
  std::vector<std::vector<RegressionTree>> stages;
  /// Mean training cross-entropy before any stage and after each stage.
  Vector stage_losses;
  bool degenerate = false;

  Vector raw_scores(std::span<const double> x) const;
  Vector predict_proba(std::span<const double> x) const;
};

BoostedModel fit_boosted(const Matrix& x, std::span<const int> y, std::size_t n_classes,
                         const BoostedConfig& config = {});

enum class ClassifierKind { Logistic, Boosted, Forest };
std::string_view to_string(ClassifierKind kind);
std::optional<ClassifierKind> parse_classifier_kind(std::string_view text);

struct ClassifierConfig {
  ClassifierKind kind = ClassifierKind::Boosted;
  LogisticConfig logistic;
  BoostedConfig boosted;
  ForestConfig forest;
};

struct Prediction {
  int label = 0;
  Vector posterior;
};

/// A fitted model of any kind behind one prediction interface.
class Classifier {
 public:
  static constexpr int kFormatVersion = 1;

  explicit Classifier(LogisticModel model);
  explicit Classifier(BoostedModel model);
  Classifier(RandomForest forest, std::size_t n_classes);

  ClassifierKind kind() const;
  std::size_t n_classes() const { return n_classes_; }
  std::size_t n_features() const { return n_features_; }

  /// Throws on feature length mismatch.
  Vector predict_proba(std::span<const double> x) const;
  Prediction predict(std::span<const double> x) const;
  std::vector<Prediction> predict_all(const Matrix& x) const;

  const std::variant<LogisticModel, BoostedModel, RandomForest>& model() const { return model_; }

  std::string to_json() const;
  static Classifier from_json(std::string_view text);
  void save(const std::string& path) const;
  static Classifier load(const std::string& path);

 private:
  std::variant<LogisticModel, BoostedModel, RandomForest> model_;
  std::size_t n_classes_ = 0;
  std::size_t n_features_ = 0;
};

Classifier fit_classifier(const Matrix& x, std::span<const int> y, std::size_t n_classes,
                          const ClassifierConfig& config = {});

}  // namespace lolal
