#include <cmath>
#include <numeric>
#include <random>

#include "datasets.hpp"
#include "doctest.h"
#include "lolal/classifiers.hpp"
#include "lolal/metrics.hpp"
#include "oracles.hpp"

using namespace lolal;

namespace {

double accuracy(const Classifier& model, const Matrix& x, const std::vector<int>& y) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < x.rows(); ++i) correct += model.predict(x.row(i)).label == y[i];
  return static_cast<double>(correct) / static_cast<double>(x.rows());
}

}  // namespace

TEST_CASE("zero logistic model gives one half per class") {
  LogisticModel m;
  m.n_classes = 3;
  m.weights = Matrix(3, 4);
  m.bias = Vector(3, 0.0);
  m.feature_mean = Vector(4, 0.0);
  m.feature_scale = Vector(4, 1.0);
  const Vector x = {1.0, -2.0, 3.0, 0.5};
  CHECK(m.sigmoids(x) == Vector(3, 0.5));
  const Vector p = m.predict_proba(x);
  for (double v : p) CHECK(v == doctest::Approx(1.0 / 3));
}

TEST_CASE("logistic gradient matches finite differences") {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> n(0, 1);
  LogisticModel m;
  m.n_classes = 3;
  m.weights = Matrix(3, 4);
  for (double& v : m.weights.data()) v = n(gen);
  m.bias = {n(gen), n(gen), n(gen)};
  m.feature_mean = Vector(4, 0.0);
  m.feature_scale = Vector(4, 1.0);
  Matrix z(30, 4);
  for (double& v : z.data()) v = n(gen);
  std::vector<int> y(30);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = static_cast<int>(i % 3);
  const double l2 = 0.01, h = 1e-6;
  const LogisticGradient g = logistic_gradient(m, z, y, l2);

  double diff2 = 0, scale2 = 0;
  auto check = [&](double& param, double analytic) {
    const double saved = param;
    param = saved + h;
    const double up = logistic_objective(m, z, y, l2);
    param = saved - h;
    const double down = logistic_objective(m, z, y, l2);
    param = saved;
    const double numeric = (up - down) / (2 * h);
    diff2 += (numeric - analytic) * (numeric - analytic);
    scale2 += analytic * analytic;
  };
  for (std::size_t i = 0; i < m.weights.data().size(); ++i) check(m.weights.data()[i], g.weights.data()[i]);
  for (std::size_t c = 0; c < 3; ++c) check(m.bias[c], g.bias[c]);
  CHECK(std::sqrt(diff2 / scale2) < 1e-5);
}

TEST_CASE("logistic regression separates blobs and rejects one class") {
  Matrix x;
  std::vector<int> y;
  oracle::blobs(30, 2, 3, 0.4, 5, x, y);
  ClassifierConfig config;
  config.kind = ClassifierKind::Logistic;
  CHECK(accuracy(fit_classifier(x, y, 2, config), x, y) == 1.0);
  const std::vector<int> one(y.size(), 1);
  CHECK_THROWS_AS(fit_logistic(x, one, 2), Error);
}

TEST_CASE("boosting fits XOR where logistic regression cannot") {
  Matrix x;
  std::vector<int> y;
  oracle::xor_dataset(25, 7, x, y);
  ClassifierConfig boosted;
  ClassifierConfig linear;
  linear.kind = ClassifierKind::Logistic;
  CHECK(accuracy(fit_classifier(x, y, 2, boosted), x, y) == 1.0);
  CHECK(accuracy(fit_classifier(x, y, 2, linear), x, y) <= 0.75);
}

TEST_CASE("boosted posteriors are normalized and degenerate input is flagged") {
  Matrix x;
  std::vector<int> y;
  oracle::blobs(20, 3, 4, 1.0, 9, x, y);
  const BoostedModel m = fit_boosted(x, y, 3);
  CHECK_FALSE(m.degenerate);
  std::mt19937_64 gen(1);
  std::normal_distribution<double> n(0, 3);
  for (int i = 0; i < 50; ++i) {
    const Vector q = {n(gen), n(gen), n(gen), n(gen)};
    const Vector p = m.predict_proba(q);
    CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
  }
  const std::vector<int> single(x.rows(), 2);
  const BoostedModel d = fit_boosted(x, single, 3);
  CHECK(d.degenerate);
  const Vector p = d.predict_proba(x.row(0));
  CHECK(p[2] == doctest::Approx(1.0));
}

TEST_CASE("boosting memorizes a small clean set") {
  Matrix x;
  std::vector<int> y;
  oracle::blobs(15, 4, 6, 0.8, 12, x, y);
  CHECK(accuracy(fit_classifier(x, y, 4), x, y) >= 0.95);
}

TEST_CASE("prediction takes the argmax with ties to the lower class") {
  LogisticModel m;
  m.n_classes = 2;
  m.weights = Matrix(2, 1);
  m.bias = Vector(2, 0.0);
  m.feature_mean = Vector(1, 0.0);
  m.feature_scale = Vector(1, 1.0);
  const Classifier c(m);
  CHECK(c.predict(std::vector<double>{4.0}).label == 0);
  CHECK(argmax(std::vector<double>{0.7, 0.2, 0.1}) == 0);
  CHECK(argmax(std::vector<double>{0.5, 0.5}) == 0);
  CHECK_THROWS_WITH_AS(c.predict(std::vector<double>{1.0, 2.0}), doctest::Contains("feature length mismatch"), Error);
}

TEST_CASE("classifiers round-trip through JSON") {
  Matrix x;
  std::vector<int> y;
  oracle::blobs(10, 3, 3, 1.0, 4, x, y);
  for (auto kind : {ClassifierKind::Logistic, ClassifierKind::Boosted, ClassifierKind::Forest}) {
    ClassifierConfig config;
    config.kind = kind;
    config.boosted.stages = 10;
    const Classifier a = fit_classifier(x, y, 3, config);
    const Classifier b = Classifier::from_json(a.to_json());
    CHECK(b.kind() == kind);
    for (std::size_t i = 0; i < x.rows(); ++i) CHECK(a.predict_proba(x.row(i)) == b.predict_proba(x.row(i)));
  }
}

TEST_CASE("metrics of perfect and constant predictors") {
  const std::vector<int> truth = {0, 0, 1, 1, 2, 2};
  const Metrics perfect = compute_metrics(truth, truth, 3);
  for (const auto& c : perfect.per_class) {
    CHECK(*c.precision == 1.0);
    CHECK(*c.recall == 1.0);
    CHECK(*c.f1 == 1.0);
    CHECK(*c.fpr == 0.0);
  }
  const std::vector<int> t2 = {0, 0, 1, 1};
  const std::vector<int> ones = {1, 1, 1, 1};
  const Metrics constant = compute_metrics(t2, ones, 2);
  CHECK(*constant.per_class[1].recall == 1.0);
  CHECK(*constant.per_class[1].precision == 0.5);
  CHECK(*constant.per_class[0].precision == 0.0);
}

TEST_CASE("metrics match hand computation on a 3x3 confusion matrix") {
  const std::vector<std::vector<std::size_t>> m = {{5, 2, 1}, {0, 7, 3}, {2, 0, 6}};
  const Metrics got = metrics_from_confusion(m);
  double macro_f1 = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    const auto want = oracle::rates(m, k);
    CHECK(*got.per_class[k].precision == doctest::Approx(want.precision));
    CHECK(*got.per_class[k].recall == doctest::Approx(want.recall));
    CHECK(*got.per_class[k].f1 == doctest::Approx(want.f1));
    CHECK(*got.per_class[k].fpr == doctest::Approx(want.fpr));
    macro_f1 += want.f1 / 3;
  }
  CHECK(*got.macro_f1 == doctest::Approx(macro_f1));
  CHECK(got.accuracy == doctest::Approx(18.0 / 26.0));
}

TEST_CASE("absent classes are excluded from macro averages") {
  const std::vector<int> truth = {0, 0, 1, 1};
  const std::vector<int> pred = {0, 1, 1, 1};
  const Metrics m = compute_metrics(truth, pred, 3);
  CHECK_FALSE(m.per_class[2].f1.has_value());
  const double f0 = 2 * 1.0 * 0.5 / 1.5, f1 = 2 * (2.0 / 3) * 1.0 / (2.0 / 3 + 1.0);
  CHECK(*m.macro_f1 == doctest::Approx((f0 + f1) / 2));
}

TEST_CASE("stratified folds balance every class") {
  std::vector<int> y;
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < 10 + 7 * c; ++i) y.push_back(c);
  }
  const auto folds = stratified_folds(y, 5, 3);
  for (int c = 0; c < 3; ++c) {
    std::vector<int> count(5, 0);
    for (std::size_t i = 0; i < y.size(); ++i) count[folds[i]] += y[i] == c;
    CHECK(*std::max_element(count.begin(), count.end()) - *std::min_element(count.begin(), count.end()) <= 1);
  }
}

TEST_CASE("cross-validation reduces folds to the smallest class") {
  Matrix x;
  std::vector<int> y;
  oracle::blobs(4, 2, 2, 0.3, 2, x, y);
  ClassifierConfig config;
  config.kind = ClassifierKind::Forest;
  const CrossValidation cv = cross_validate(x, y, 2, config, 10, 1);
  CHECK(cv.folds == 4);
  CHECK(cv.fold_macro_f1.size() == 4);
}
