#include "lolal/metrics.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "json.hpp"
#include "lolal/rng.hpp"

namespace lolal {
namespace {

std::optional<double> mean_of(const std::vector<ClassMetrics>& per_class, std::optional<double> ClassMetrics::*field) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& m : per_class) {
    if (!(m.*field)) continue;
    sum += *(m.*field);
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

Metrics metrics_from_confusion(std::vector<std::vector<std::size_t>> confusion) {
  const std::size_t c = confusion.size();
  for (const auto& row : confusion) {
    if (row.size() != c) throw Error("confusion matrix must be square");
  }
  Metrics m;
  std::size_t total = 0, correct = 0;
  for (std::size_t t = 0; t < c; ++t) {
    for (std::size_t p = 0; p < c; ++p) total += confusion[t][p];
    correct += confusion[t][t];
  }
  if (total == 0) throw Error("metrics need at least one evaluated sample");
  m.accuracy = ratio(correct, total);
  for (std::size_t k = 0; k < c; ++k) {
    ClassMetrics cm;
    cm.tp = confusion[k][k];
    for (std::size_t j = 0; j < c; ++j) {
      cm.support += confusion[k][j];
      if (j != k) cm.fp += confusion[j][k];
    }
    cm.fn = cm.support - cm.tp;
    cm.tn = total - cm.tp - cm.fp - cm.fn;
    if (cm.support > 0) {
      cm.precision = ratio(cm.tp, cm.tp + cm.fp);
      cm.recall = ratio(cm.tp, cm.support);
      const double sum = *cm.precision + *cm.recall;
      cm.f1 = sum > 0 ? 2.0 * *cm.precision * *cm.recall / sum : 0.0;
      cm.fpr = ratio(cm.fp, cm.fp + cm.tn);
    }
    m.per_class.push_back(cm);
  }
  m.macro_precision = mean_of(m.per_class, &ClassMetrics::precision);
  m.macro_recall = mean_of(m.per_class, &ClassMetrics::recall);
  m.macro_f1 = mean_of(m.per_class, &ClassMetrics::f1);
  m.macro_fpr = mean_of(m.per_class, &ClassMetrics::fpr);
  m.confusion = std::move(confusion);
  return m;
}

Metrics compute_metrics(std::span<const int> truth, std::span<const int> predicted, std::size_t n_classes) {
  if (truth.size() != predicted.size()) throw Error("truth and prediction lengths differ");
  if (truth.empty()) throw Error("metrics need at least one evaluated sample");
  std::vector<std::vector<std::size_t>> confusion(n_classes, std::vector<std::size_t>(n_classes, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || predicted[i] < 0 || static_cast<std::size_t>(truth[i]) >= n_classes ||
        static_cast<std::size_t>(predicted[i]) >= n_classes) {
      throw Error("class index out of range");
    }
    ++confusion[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predicted[i])];
  }
  return metrics_from_confusion(std::move(confusion));
}

std::string Metrics::to_json() const {
  nlohmann::ordered_json doc;
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(); };
  doc["accuracy"] = accuracy;
  doc["macro"] = {{"precision", opt(macro_precision)},
                  {"recall", opt(macro_recall)},
                  {"f1", opt(macro_f1)},
                  {"fpr", opt(macro_fpr)}};
  nlohmann::ordered_json classes = nlohmann::ordered_json::array();
  for (std::size_t k = 0; k < per_class.size(); ++k) {
    const auto& c = per_class[k];
    nlohmann::ordered_json row;
    row["class"] = k < kClassCount ? std::string(lolal::to_string(label_from_index(static_cast<int>(k))))
                                   : std::to_string(k);
    row["support"] = c.support;
    row["prec"] = opt(c.precision);
    row["rec"] = opt(c.recall);
    row["f1"] = opt(c.f1);
    row["fpr"] = opt(c.fpr);
    classes.push_back(std::move(row));
  }
  doc["classes"] = std::move(classes);
  doc["confusion"] = confusion;
  return doc.dump();
}

std::vector<std::size_t> stratified_folds(std::span<const int> labels, std::size_t k, std::uint64_t seed) {
  if (k == 0) throw Error("fold count must be positive");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  Rng rng(seed);
  std::vector<std::size_t> fold(labels.size(), 0);
  std::size_t offset = 0;
  for (auto& [label, members] : by_class) {
    rng.shuffle(members);
    for (std::size_t j = 0; j < members.size(); ++j) fold[members[j]] = (offset + j) % k;
    // Continue dealing where the previous class stopped so fold sizes stay even.
    offset = (offset + members.size()) % k;
  }
  return fold;
}

CrossValidation cross_validate(const Matrix& x, std::span<const int> y, std::size_t n_classes,
                               const ClassifierConfig& config, std::size_t k, std::uint64_t seed) {
  if (x.rows() != y.size()) throw Error("label count does not match row count");
  std::map<int, std::size_t> counts;
  for (int label : y) ++counts[label];
  if (counts.size() < 2) throw Error("cross-validation needs at least two classes");
  std::size_t smallest = x.rows();
  for (const auto& [label, n] : counts) smallest = std::min(smallest, n);
  k = std::min(k, smallest);
  if (k < 2) throw Error("cross-validation needs at least two samples per class");

  CrossValidation out;
  out.folds = k;
  const std::vector<std::size_t> fold = stratified_folds(y, k, seed);
  std::vector<int> predicted(y.size(), 0);
  for (std::size_t f = 0; f < k; ++f) {
    Matrix train(0, x.cols()), test(0, x.cols());
    std::vector<int> train_y, test_y;
    std::vector<std::size_t> test_index;
    for (std::size_t i = 0; i < x.rows(); ++i) {
      if (fold[i] == f) {
        test.append_row(x.row(i));
        test_y.push_back(y[i]);
        test_index.push_back(i);
      } else {
        train.append_row(x.row(i));
        train_y.push_back(y[i]);
      }
    }
    const Classifier model = fit_classifier(train, train_y, n_classes, config);
    std::vector<int> fold_pred;
    for (std::size_t i = 0; i < test.rows(); ++i) {
      const int p = model.predict(test.row(i)).label;
      fold_pred.push_back(p);
      predicted[test_index[i]] = p;
    }
    out.fold_macro_f1.push_back(compute_metrics(test_y, fold_pred, n_classes).macro_f1.value_or(0.0));
  }
  out.pooled = compute_metrics(y, predicted, n_classes);
  return out;
}

}  // namespace lolal
