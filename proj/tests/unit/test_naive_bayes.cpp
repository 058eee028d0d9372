#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "lolal/naive_bayes.hpp"
#include "oracles.hpp"

using namespace lolal;

TEST_CASE("class density uses the population variance") {
  const NaiveBayesModel m = fit_nb(std::map<int, std::vector<Vector>>{{0, {{0, 0}, {2, 2}}}});
  CHECK(m.density(0).mean == Vector{1, 1});
  CHECK(m.density(0).variance == Vector{1, 1});
}

TEST_CASE("a single sample gets the variance floor") {
  const NaiveBayesModel m = fit_nb(std::map<int, std::vector<Vector>>{{3, {{0.5, -1, 2}}}});
  CHECK(m.density(3).variance == Vector(3, kVarianceFloor));
}

TEST_CASE("empty classes are rejected") {
  CHECK_THROWS_AS(fit_nb(std::map<int, std::vector<Vector>>{{0, {}}}), Error);
}

TEST_CASE("fitting does not depend on sample order") {
  std::mt19937_64 gen(2);
  std::normal_distribution<double> n(0, 10);
  std::vector<Vector> xs(40, Vector(5));
  for (auto& x : xs) {
    for (double& v : x) v = n(gen);
  }
  const NaiveBayesModel a = fit_nb(std::map<int, std::vector<Vector>>{{1, xs}});
  std::shuffle(xs.begin(), xs.end(), gen);
  const NaiveBayesModel b = fit_nb(std::map<int, std::vector<Vector>>{{1, xs}});
  CHECK(a.density(1).mean == b.density(1).mean);
  CHECK(a.density(1).variance == b.density(1).variance);
}

TEST_CASE("anomaly score is the Gaussian negative log-likelihood") {
  const std::size_t d = 7;
  ClassDensity unit{10, Vector(d, 0.0), Vector(d, 1.0)};
  const NaiveBayesModel m({{0, unit}}, d);
  const double pi = std::acos(-1.0);
  CHECK(std::abs(m.anomaly_score(Vector(d, 0.0), 0) - 0.5 * d * std::log(2 * pi)) <= 1e-9);
  Vector x(d, 0.0);
  x[2] = 3.0;
  CHECK(m.anomaly_score(x, 0) - m.anomaly_score(Vector(d, 0.0), 0) == doctest::Approx(4.5).epsilon(1e-12));

  std::mt19937_64 gen(4);
  std::normal_distribution<double> n(0, 1);
  std::uniform_real_distribution<double> u(0.2, 3);
  Vector mean(d), var(d);
  for (std::size_t j = 0; j < d; ++j) {
    mean[j] = n(gen);
    var[j] = u(gen);
  }
  const NaiveBayesModel g({{2, ClassDensity{5, mean, var}}}, d);
  for (int i = 0; i < 20; ++i) {
    Vector q(d);
    for (double& v : q) v = n(gen) * 2;
    CHECK(g.anomaly_score(q, 2) == doctest::Approx(oracle::gaussian_nll(q, mean, var)).epsilon(1e-12));
    CHECK(g.anomaly_score(mean, 2) <= g.anomaly_score(q, 2));
  }
}

TEST_CASE("model round-trips through JSON") {
  const NaiveBayesModel m = fit_nb(std::map<int, std::vector<Vector>>{{0, {{0, 1}, {2, 5}}}, {4, {{1, 1}}}});
  const NaiveBayesModel r = NaiveBayesModel::from_json(m.to_json());
  CHECK(r.anomaly_score(Vector{0.3, 0.2}, 4) == m.anomaly_score(Vector{0.3, 0.2}, 4));
  CHECK(r.contains(0));
  CHECK_FALSE(r.contains(1));
}
