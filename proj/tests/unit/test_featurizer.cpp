#include <algorithm>
#include <random>

#include "doctest.h"
#include "lolal/featurizer.hpp"
#include "lolal/synth_corpus.hpp"

using namespace lolal;

namespace {

std::vector<TokenView> views(const std::vector<Vector>& vecs, const std::vector<double>& scores) {
  std::vector<TokenView> out;
  for (std::size_t i = 0; i < vecs.size(); ++i) out.push_back({vecs[i], scores[i]});
  return out;
}

Vector slice(const Vector& v, std::size_t from, std::size_t n) { return Vector(v.begin() + from, v.begin() + from + n); }

}  // namespace

TEST_CASE("feature widths follow the layouts") {
  CHECK(feature_width(FeatureSet::ScoresVectorsWeighted, 16, 5) == 58);
  CHECK(feature_width(FeatureSet::ScoresVectors, 16, 5) == 58);
  CHECK(feature_width(FeatureSet::Vectors, 16, 5) == 55);
  CHECK(feature_width(FeatureSet::Scores, 16, 5) == 25);
  for (auto set : {FeatureSet::Scores, FeatureSet::Vectors, FeatureSet::ScoresVectors, FeatureSet::ScoresVectorsWeighted}) {
    CHECK(feature_names(set, 8, 3).size() == feature_width(set, 8, 3));
    CHECK(parse_feature_set(to_string(set)) == set);
  }
}

TEST_CASE("two tokens with hand-computed pools") {
  const std::vector<Vector> vecs = {{1, 0}, {0, 1}};
  const auto f = assemble_features(views(vecs, {0.8, 0.2}), 0, 2, 0, 5, FeatureSet::ScoresVectorsWeighted).values;
  CHECK(slice(f, 0, 2) == Vector{0, 0});
  CHECK(slice(f, 2, 2) == Vector{1, 1});
  CHECK(f[4] == doctest::Approx(0.8));
  CHECK(f[5] == doctest::Approx(0.2));
  CHECK(slice(f, 6, 2) == Vector{2, 0});
  CHECK(slice(f, 8, 3) == Vector{0.8, 0.2, 0});
  CHECK(slice(f, 11, 5) == Vector{1, 0, 0, 0, 0});
}

TEST_CASE("a single token is its own min, max and mean") {
  const std::vector<Vector> vecs = {{0.3, -1.5, 2.0}};
  const auto f = assemble_features(views(vecs, {0.6}), 1, 3, 2, 5, FeatureSet::ScoresVectorsWeighted).values;
  CHECK(slice(f, 0, 3) == vecs[0]);
  CHECK(slice(f, 3, 3) == vecs[0]);
  CHECK(slice(f, 6, 3) == vecs[0]);
  CHECK(f[10] == 1.0);
}

TEST_CASE("score-only layout pads to twenty slots") {
  const std::vector<Vector> vecs(4, Vector{1.0, 1.0});
  const auto f = assemble_features(views(vecs, {0.1, 0.9, 0.5, 0.3}), 0, 2, 1, 5, FeatureSet::Scores).values;
  REQUIRE(f.size() == 25);
  CHECK(slice(f, 0, 4) == Vector{0.9, 0.5, 0.3, 0.1});
  CHECK(slice(f, 4, 16) == Vector(16, 0.0));
}

TEST_CASE("V and S+V(W) differ only in the mean and the scores") {
  const std::vector<Vector> vecs = {{1, 2}, {3, -1}, {0, 0}};
  const auto tv = views(vecs, {0.9, 0.1, 0.4});
  const auto v = assemble_features(tv, 0, 2, 3, 5, FeatureSet::Vectors).values;
  const auto w = assemble_features(tv, 0, 2, 3, 5, FeatureSet::ScoresVectorsWeighted).values;
  CHECK(slice(v, 0, 4) == slice(w, 0, 4));
  CHECK(slice(v, 4, 2) != slice(w, 4, 2));
  CHECK(slice(v, 6, 2) == slice(w, 6, 2));
  CHECK(slice(v, 8, 5) == slice(w, 11, 5));
}

TEST_CASE("empty commands and zero scores") {
  CHECK_THROWS_WITH_AS(assemble_features({}, 0, 2, 0, 5, FeatureSet::Vectors), "empty command", Error);
  const std::vector<Vector> vecs = {{1, 0}, {0, 1}};
  const auto f = assemble_features(views(vecs, {0.0, 0.0}), 0, 2, 0, 5, FeatureSet::ScoresVectorsWeighted);
  CHECK(f.weighted_fallback);
  CHECK(slice(f.values, 4, 2) == Vector{0.5, 0.5});
}

TEST_CASE("pooling ignores token order") {
  std::mt19937_64 gen(8);
  std::normal_distribution<double> n(0, 1);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Vector> vecs(1 + trial % 12, Vector(4));
    std::vector<double> scores;
    for (auto& v : vecs) {
      for (double& x : v) x = n(gen);
      scores.push_back(u(gen));
    }
    const auto a = assemble_features(views(vecs, scores), 0, 4, 1, 2, FeatureSet::ScoresVectorsWeighted).values;
    std::vector<std::size_t> perm(vecs.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), gen);
    std::vector<Vector> pv;
    std::vector<double> ps;
    for (std::size_t i : perm) {
      pv.push_back(vecs[i]);
      ps.push_back(scores[i]);
    }
    CHECK(assemble_features(views(pv, ps), 0, 4, 1, 2, FeatureSet::ScoresVectorsWeighted).values == a);
    for (std::size_t j = 0; j < 4; ++j) CHECK(a[j] <= a[4 + j]);
  }
}

TEST_CASE("pipeline featurizes corpus samples and survives a JSON round trip") {
  CorpusSpec spec;
  spec.scale = 0.1;
  spec.unlabeled_size = 50;
  const Corpus corpus = generate_corpus(spec);
  PipelineConfig config;
  config.embedding.epochs = 3;
  const FeaturePipeline pipeline = FeaturePipeline::train(corpus.labeled, config);
  CHECK(pipeline.width() == 58);
  const TokenScoreTable scores = pipeline.score_table(corpus.labeled);
  CHECK(scores.size() > 0);
  const Matrix x = pipeline.featurize(corpus.unlabeled, scores);
  CHECK(x.rows() == corpus.unlabeled.size());
  CHECK(x.cols() == 58);

  const FeaturePipeline copy = FeaturePipeline::from_json(pipeline.to_json());
  CHECK(copy.featurize(corpus.unlabeled, scores).data() == x.data());

  const std::vector<RawSample> unlabeled_only(corpus.unlabeled.begin(), corpus.unlabeled.begin() + 5);
  std::vector<RawSample> stripped = unlabeled_only;
  for (auto& s : stripped) s.label.reset();
  CHECK(pipeline.score_table(stripped).size() == 0);
}

TEST_CASE("fasttext embeds rare tokens from their n-grams") {
  std::vector<RawSample> corpus;
  for (int i = 0; i < 10; ++i) corpus.push_back({std::to_string(i), "cmd.exe", "certutil -decode payload.b64 out.exe", Lolbin::Certutil, Label::CertutilLolbin});
  PipelineConfig config;
  config.embedding.epochs = 2;
  const FeaturePipeline pipeline = FeaturePipeline::train(corpus, config);
  const TokenScoreTable scores;
  const RawSample a{"a", "cmd.exe", "certutil -decode payloadx", Lolbin::Certutil, {}};
  const RawSample b{"b", "cmd.exe", "certutil -decode zzzzzzzzz", Lolbin::Certutil, {}};
  const auto fa = pipeline.featurize(a, scores).values;
  const auto fb = pipeline.featurize(b, scores).values;
  CHECK(fa[3 * 16 + 1] == 1.0);
  CHECK(fb[3 * 16 + 1] == 1.0);
  CHECK(fa != fb);

  config.embedding.mode = EmbeddingMode::Word2Vec;
  const FeaturePipeline w2v = FeaturePipeline::train(corpus, config);
  CHECK(w2v.featurize(a, scores).values == w2v.featurize(b, scores).values);
}
