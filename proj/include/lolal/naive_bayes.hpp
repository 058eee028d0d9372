#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lolal/types.hpp"

namespace lolal {

inline constexpr double kVarianceFloor = 1e-6;

/// Independent Gaussian per feature for one class.
struct ClassDensity {
  std::size_t count = 0;
  Vector mean;
  /// Population variance, floored.
  Vector variance;
};

class NaiveBayesModel {
 public:
  NaiveBayesModel() = default;
  NaiveBayesModel(std::map<int, ClassDensity> classes, std::size_t n_features);

  std::size_t n_features() const { return n_features_; }
  bool contains(int label) const { return classes_.contains(label); }
  const ClassDensity& density(int label) const;
  const std::map<int, ClassDensity>& classes() const { return classes_; }

  /// -log N(x_j; mu_j, var_j) for each feature j.
  Vector feature_scores(std::span<const double> x, int label) const;
  /// Negative log-likelihood of x under the class density: the sum of
  /// `feature_scores`.
  double anomaly_score(std::span<const double> x, int label) const;

  std::string to_json() const;
  static NaiveBayesModel from_json(std::string_view text);

 private:
  std::map<int, ClassDensity> classes_;
  std::size_t n_features_ = 0;
};

/// Fits one density per class from the samples assigned to it. Sums run over
/// sorted values, so the result does not depend on sample order. Throws when
/// `assignments` is empty or a class has no samples.
NaiveBayesModel fit_nb(const std::map<int, std::vector<Vector>>& assignments, double variance_floor = kVarianceFloor);
/// Same, with row i of `x` assigned to class `assigned[i]`.
NaiveBayesModel fit_nb(const Matrix& x, std::span<const int> assigned, double variance_floor = kVarianceFloor);

double anomaly_score(const NaiveBayesModel& model, std::span<const double> x, int label);

}  // namespace lolal
