#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lolal/classifiers.hpp"
#include "lolal/types.hpp"

namespace lolal {

/// One-vs-rest counts and rates for one class. Rates are empty when the class
/// does not occur in the evaluated truth.
struct ClassMetrics {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  std::size_t support = 0;
  std::optional<double> precision, recall, f1, fpr;
};

struct Metrics {
  /// confusion[t][p]: truth t predicted as p.
  std::vector<std::vector<std::size_t>> confusion;
  std::vector<ClassMetrics> per_class;
  /// Means over the classes whose metrics are defined.
  std::optional<double> macro_precision, macro_recall, macro_f1, macro_fpr;
  double accuracy = 0.0;

  std::string to_json() const;
};

/// Precision of a class that occurs in the truth but is never predicted is 0.
Metrics metrics_from_confusion(std::vector<std::vector<std::size_t>> confusion);
Metrics compute_metrics(std::span<const int> truth, std::span<const int> predicted, std::size_t n_classes);

/// Fold index per sample; each class is shuffled and dealt round robin over
/// the folds.
std::vector<std::size_t> stratified_folds(std::span<const int> labels, std::size_t k, std::uint64_t seed);

struct CrossValidation {
  std::size_t folds = 0;
  /// Metrics over the pooled out-of-fold predictions.
  Metrics pooled;
  /// Per-fold macro F1.
  Vector fold_macro_f1;
};

/// Stratified k-fold cross-validation. k is reduced to the size of the
/// smallest class when that class has fewer than k samples.
CrossValidation cross_validate(const Matrix& x, std::span<const int> y, std::size_t n_classes,
                               const ClassifierConfig& config, std::size_t k, std::uint64_t seed);

}  // namespace lolal
