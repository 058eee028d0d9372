#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lolal/embedding.hpp"
#include "lolal/random_forest.hpp"
#include "lolal/token_scorer.hpp"
#include "lolal/tokenizer.hpp"
#include "lolal/types.hpp"

namespace lolal {

/// Feature layouts, E = embedding dim, L = binary count:
///   Scores                 top-20 scores | one-hot                       (20 + L)
///   Vectors                min | max | mean | counts | one-hot           (3E + 2 + L)
///   ScoresVectors          min | max | mean | counts | top-3 | one-hot   (3E + 5 + L)
///   ScoresVectorsWeighted  as above with score-weighted mean             (3E + 5 + L)
enum class FeatureSet { Scores, Vectors, ScoresVectors, ScoresVectorsWeighted };

std::string_view to_string(FeatureSet set);
/// Accepts "S", "V", "S+V", "S+V(W)" and lowercase spellings.
std::optional<FeatureSet> parse_feature_set(std::string_view text);

inline constexpr std::size_t kTopScores = 3;
inline constexpr std::size_t kScoreOnlyTop = 20;

struct FeatureVector {
  Vector values;
  /// Set when every token score was zero and the weighted mean fell back to
  /// the plain mean.
  bool weighted_fallback = false;
};

/// One pooled token: its embedding and its score.
struct TokenView {
  std::span<const double> vector;
  double score = 0.0;
};

std::size_t feature_width(FeatureSet set, std::size_t dim, std::size_t lolbin_count);
std::vector<std::string> feature_names(FeatureSet set, std::size_t dim, std::size_t lolbin_count);

/// Pools token views into one fixed-length vector. Throws "empty command"
/// when `tokens` is empty.
FeatureVector assemble_features(std::span<const TokenView> tokens, std::size_t rare_count, std::size_t dim,
                                std::size_t lolbin_index, std::size_t lolbin_count, FeatureSet set);

/// Tokenizes, normalizes, embeds and scores one sample. In FastText mode,
/// rare tokens are embedded from their own character n-grams while still
/// being scored and counted as rare.
FeatureVector featurize(const RawSample& sample, const EmbeddingModel& embeddings, const TokenScoreTable& scores,
                        const Vocabulary& vocab, FeatureSet set = FeatureSet::ScoresVectorsWeighted,
                        std::size_t lolbin_count = kLolbinCount,
                        const DelimiterSet& delimiters = DelimiterSet::standard());

struct PipelineConfig {
  EmbeddingConfig embedding;
  FeatureSet feature_set = FeatureSet::ScoresVectorsWeighted;
  ForestConfig token_forest;
};

/// The unsupervised part of the pipeline (dictionary + embeddings) together
/// with the settings needed to score tokens and featurize samples.
class FeaturePipeline {
 public:
  FeaturePipeline(Vocabulary vocab, EmbeddingModel embeddings, PipelineConfig config);

  /// Builds the dictionary and trains embeddings on the command lines of
  /// `corpus`; labels are ignored.
  static FeaturePipeline train(std::span<const RawSample> corpus, const PipelineConfig& config);

  const Vocabulary& vocabulary() const { return vocab_; }
  const EmbeddingModel& embeddings() const { return embeddings_; }
  const PipelineConfig& config() const { return config_; }
  std::size_t width() const;
  std::vector<std::string> names() const;

  /// Token scores from labeled samples; all-default when the samples do not
  /// contain both benign and malicious labels.
  TokenScoreTable score_table(std::span<const RawSample> labeled) const;

  FeatureVector featurize(const RawSample& sample, const TokenScoreTable& scores) const;
  Matrix featurize(std::span<const RawSample> samples, const TokenScoreTable& scores) const;

  std::string to_json() const;
  static FeaturePipeline from_json(std::string_view text);
  void save(const std::string& path) const;
  static FeaturePipeline load(const std::string& path);

 private:
  Vocabulary vocab_;
  EmbeddingModel embeddings_;
  PipelineConfig config_;
};

/// Header row plus one row per sample.
std::string feature_matrix_csv(std::span<const RawSample> samples, const Matrix& features,
                               const std::vector<std::string>& names);

}  // namespace lolal
