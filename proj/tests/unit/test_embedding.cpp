#include <cmath>
#include <map>
#include <random>

#include "doctest.h"
#include "lolal/embedding.hpp"
#include "lolal/tokenizer.hpp"
#include "sgns_check.hpp"

using namespace lolal;

namespace {

TokenSequence words(std::initializer_list<const char*> ws) {
  TokenSequence s;
  for (const char* w : ws) s.tokens.emplace_back(w);
  return s;
}

std::vector<TokenSequence> two_topics(std::size_t n, const std::string& a, const std::string& b, const std::string& c,
                                      const std::string& d) {
  std::vector<TokenSequence> corpus;
  for (std::size_t i = 0; i < n; ++i) {
    TokenSequence s1, s2;
    for (int k = 0; k < 10; ++k) {
      s1.tokens.push_back(k % 2 ? b : a);
      s2.tokens.push_back(k % 2 ? d : c);
    }
    corpus.push_back(s1);
    corpus.push_back(s2);
  }
  return corpus;
}

/// Pointwise mutual information of two words co-occurring within a window.
double pmi(const std::vector<TokenSequence>& corpus, const std::string& x, const std::string& y, std::size_t window) {
  std::map<std::string, double> unigram;
  double pairs = 0, xy = 0, total = 0;
  for (const auto& s : corpus) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      unigram[s.tokens[i]] += 1;
      total += 1;
      for (std::size_t j = (i >= window ? i - window : 0); j < std::min(s.size(), i + window + 1); ++j) {
        if (j == i) continue;
        pairs += 1;
        if (s.tokens[i] == x && s.tokens[j] == y) xy += 1;
      }
    }
  }
  if (xy == 0) return -std::numeric_limits<double>::infinity();
  return std::log((xy / pairs) / ((unigram[x] / total) * (unigram[y] / total)));
}

}  // namespace

TEST_CASE("char n-grams use boundary markers and skip the whole token") {
  const auto grams = char_ngrams("exe", 3, 6);
  CHECK(grams == std::vector<std::string>{"<ex", "exe", "xe>", "<exe", "exe>"});
}

TEST_CASE("SGNS gradient matches central finite differences") {
  for (EmbeddingMode mode : {EmbeddingMode::Word2Vec, EmbeddingMode::FastText}) {
    auto model = oracle::random_embedding_model(mode, 3);
    std::mt19937_64 gen(17);
    for (int i = 0; i < 20; ++i) {
      const auto ex = oracle::random_example(model, gen);
      CHECK(oracle::sgns_gradient_error(model, ex) < 1e-4);
    }
  }
}

TEST_CASE("co-occurring words end up closer than words from another topic") {
  for (EmbeddingMode mode : {EmbeddingMode::Word2Vec, EmbeddingMode::FastText}) {
    const auto corpus = two_topics(40, "alpha", "bravo", "charlie", "delta");
    REQUIRE(pmi(corpus, "alpha", "bravo", 5) > pmi(corpus, "alpha", "charlie", 5));
    EmbeddingConfig config;
    config.mode = mode;
    config.min_count = 1;
    const auto model = train_embeddings(corpus, config);
    CHECK(cosine_similarity(model.lookup("alpha"), model.lookup("bravo")) >
          cosine_similarity(model.lookup("alpha"), model.lookup("charlie")));
    CHECK(model.dim() == 16);
    CHECK(model.lookup("alpha").size() == 16);
  }
}

TEST_CASE("training without any context pair fails") {
  std::vector<TokenSequence> corpus = {words({"alpha"}), words({"bravo"})};
  EmbeddingConfig config;
  config.min_count = 1;
  CHECK_THROWS_WITH_AS(train_embeddings(corpus, config), "no context pairs", Error);
}

TEST_CASE("word2vec falls back to the rare vector") {
  EmbeddingConfig config;
  config.mode = EmbeddingMode::Word2Vec;
  const EmbeddingModel model(config, {"plugin", "install"});
  CHECK(model.lookup("neverseen") == model.lookup(kRareToken));
  const auto stored = model.parameters(ParamBlock::WordInput, *model.word_index("plugin"));
  CHECK(model.lookup("plugin") == Vector(stored.begin(), stored.end()));
}

TEST_CASE("fasttext builds unknown tokens from known n-grams") {
  EmbeddingConfig config;
  config.mode = EmbeddingMode::FastText;
  const EmbeddingModel model(config, {"plugins", "xplugin"});
  REQUIRE_FALSE(model.word_index("plugin"));
  const auto grams = char_ngrams("plugin", 3, 6);
  Vector mean(model.dim(), 0.0);
  for (const auto& g : grams) {
    const auto idx = model.ngram_index(g);
    REQUIRE(idx);
    const auto row = model.parameters(ParamBlock::NgramInput, *idx);
    for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += row[j];
  }
  for (double& v : mean) v /= static_cast<double>(grams.size());
  const Vector got = model.lookup("plugin");
  for (std::size_t j = 0; j < mean.size(); ++j) CHECK(got[j] == doctest::Approx(mean[j]).epsilon(1e-12));
}

TEST_CASE("fasttext lookup of a dictionary word is its training representation") {
  EmbeddingConfig config;
  const EmbeddingModel model(config, {"plugin"});
  CHECK(model.lookup("plugin") == model.input_representation(*model.word_index("plugin")));
}

TEST_CASE("training is deterministic and the model round-trips through JSON") {
  const auto corpus = two_topics(10, "alpha", "bravo", "charlie", "delta");
  EmbeddingConfig config;
  config.min_count = 1;
  config.epochs = 3;
  const auto a = train_embeddings(corpus, config);
  const auto b = train_embeddings(corpus, config);
  CHECK(a.to_json() == b.to_json());
  const auto c = EmbeddingModel::from_json(a.to_json());
  CHECK(c.lookup("alpha") == a.lookup("alpha"));
  CHECK(c.lookup("zzzz") == a.lookup("zzzz"));
}
