#include "lolal/naive_bayes.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "json.hpp"

namespace lolal {
namespace {

double sorted_sum(std::vector<double>& values) {
  std::sort(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum;
}

ClassDensity fit_density(const std::vector<std::span<const double>>& rows, std::size_t d, double floor) {
  ClassDensity density;
  density.count = rows.size();
  density.mean.assign(d, 0.0);
  density.variance.assign(d, floor);
  const double n = static_cast<double>(rows.size());
  std::vector<double> column(rows.size());
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t i = 0; i < rows.size(); ++i) column[i] = rows[i][j];
    const double mean = sorted_sum(column) / n;
    density.mean[j] = mean;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const double diff = rows[i][j] - mean;
      column[i] = diff * diff;
    }
    density.variance[j] = std::max(sorted_sum(column) / n, floor);
  }
  return density;
}

}  // namespace

NaiveBayesModel::NaiveBayesModel(std::map<int, ClassDensity> classes, std::size_t n_features)
    : classes_(std::move(classes)), n_features_(n_features) {
  for (const auto& [label, density] : classes_) {
    if (density.mean.size() != n_features_ || density.variance.size() != n_features_) {
      throw Error("class density has the wrong dimension");
    }
    for (double v : density.variance) {
      if (!(v > 0.0)) throw Error("class density variance must be positive");
    }
  }
}

const ClassDensity& NaiveBayesModel::density(int label) const {
  auto it = classes_.find(label);
  if (it == classes_.end()) throw Error("class " + std::to_string(label) + " has no fitted density");
  return it->second;
}

Vector NaiveBayesModel::feature_scores(std::span<const double> x, int label) const {
  if (x.size() != n_features_) throw Error("feature length mismatch in anomaly scoring");
  const ClassDensity& d = density(label);
  Vector out(n_features_);
  for (std::size_t j = 0; j < n_features_; ++j) {
    const double diff = x[j] - d.mean[j];
    out[j] = 0.5 * std::log(2.0 * std::numbers::pi * d.variance[j]) + diff * diff / (2.0 * d.variance[j]);
  }
  return out;
}

double NaiveBayesModel::anomaly_score(std::span<const double> x, int label) const {
  double sum = 0.0;
  for (double s : feature_scores(x, label)) sum += s;
  return sum;
}

std::string NaiveBayesModel::to_json() const {
  nlohmann::ordered_json doc;
  doc["n_features"] = n_features_;
  nlohmann::ordered_json classes = nlohmann::ordered_json::array();
  for (const auto& [label, d] : classes_) {
    classes.push_back({{"class", label}, {"count", d.count}, {"mean", d.mean}, {"variance", d.variance}});
  }
  doc["classes"] = std::move(classes);
  return doc.dump();
}

NaiveBayesModel NaiveBayesModel::from_json(std::string_view text) {
  const auto doc = nlohmann::json::parse(text);
  std::map<int, ClassDensity> classes;
  for (const auto& c : doc.at("classes")) {
    ClassDensity d;
    d.count = c.at("count").get<std::size_t>();
    d.mean = c.at("mean").get<Vector>();
    d.variance = c.at("variance").get<Vector>();
    classes.emplace(c.at("class").get<int>(), std::move(d));
  }
  return NaiveBayesModel(std::move(classes), doc.at("n_features").get<std::size_t>());
}

NaiveBayesModel fit_nb(const std::map<int, std::vector<Vector>>& assignments, double variance_floor) {
  if (assignments.empty()) throw Error("naive Bayes needs at least one class");
  if (!(variance_floor > 0.0)) throw Error("variance floor must be positive");
  std::size_t d = 0;
  bool first = true;
  std::map<int, ClassDensity> classes;
  for (const auto& [label, samples] : assignments) {
    if (samples.empty()) throw Error("class " + std::to_string(label) + " has no samples");
    std::vector<std::span<const double>> rows;
    for (const auto& s : samples) {
      if (first) {
        d = s.size();
        first = false;
      }
      if (s.size() != d) throw Error("samples have inconsistent feature lengths");
      rows.emplace_back(s);
    }
    classes.emplace(label, fit_density(rows, d, variance_floor));
  }
  return NaiveBayesModel(std::move(classes), d);
}

NaiveBayesModel fit_nb(const Matrix& x, std::span<const int> assigned, double variance_floor) {
  if (assigned.size() != x.rows()) throw Error("assignment count does not match row count");
  if (x.rows() == 0) throw Error("naive Bayes needs at least one class");
  if (!(variance_floor > 0.0)) throw Error("variance floor must be positive");
  std::map<int, std::vector<std::span<const double>>> groups;
  for (std::size_t i = 0; i < x.rows(); ++i) groups[assigned[i]].push_back(x.row(i));
  std::map<int, ClassDensity> classes;
  for (const auto& [label, rows] : groups) classes.emplace(label, fit_density(rows, x.cols(), variance_floor));
  return NaiveBayesModel(std::move(classes), x.cols());
}

double anomaly_score(const NaiveBayesModel& model, std::span<const double> x, int label) {
  return model.anomaly_score(x, label);
}

}  // namespace lolal
