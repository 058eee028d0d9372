#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>

#include "lolal/embedding.hpp"
#include "lolal/random_forest.hpp"
#include "lolal/tokenizer.hpp"
#include "lolal/types.hpp"

namespace lolal {

/// Maliciousness score per (token, binary) pair. Unknown pairs get the
/// default score.
class TokenScoreTable {
 public:
  static constexpr double kDefaultScore = 0.5;

  explicit TokenScoreTable(double default_score = kDefaultScore);

  double score(std::string_view token, Lolbin lolbin) const;
  void set(std::string token, Lolbin lolbin, double score);
  bool contains(std::string_view token, Lolbin lolbin) const;

  double default_score() const { return default_score_; }
  std::size_t size() const { return scores_.size(); }
  const std::map<std::pair<std::string, Lolbin>, double>& entries() const { return scores_; }

  /// `token,lolbin,score` with a header row; tokens are CSV-quoted as needed.
  std::string to_csv() const;

  friend bool operator==(const TokenScoreTable&, const TokenScoreTable&) = default;

 private:
  double default_score_;
  std::map<std::pair<std::string, Lolbin>, double> scores_;
};

/// embedding(token) followed by the one-hot encoding of the binary.
Vector token_features(std::string_view token, std::size_t lolbin_index, std::size_t lolbin_count,
                      const EmbeddingModel& embeddings);

/// Binary forest over token feature rows. Throws "degenerate token training
/// set" unless both labels are present.
RandomForest fit_token_forest(const Matrix& features, std::span<const int> labels, std::size_t n_trees,
                              std::uint64_t seed, std::span<const double> multiplicity = {});
RandomForest fit_token_forest(const Matrix& features, std::span<const int> labels, const ForestConfig& config,
                              std::span<const double> multiplicity = {});

/// Mean over trees of the positive ratio in the reached leaf.
double score_token(const RandomForest& forest, std::span<const double> features);

/// Labels every token of every labeled sample with the sample's binary label,
/// fits the token forest, and scores each observed (token, binary) pair.
/// Tokens are keyed by their normalized form.
TokenScoreTable build_score_table(std::span<const RawSample> labeled, const EmbeddingModel& embeddings,
                                  const Vocabulary& vocab, const ForestConfig& config = {},
                                  const DelimiterSet& delimiters = DelimiterSet::standard());

/// True when the labeled samples contain both benign and malicious labels.
bool has_both_binary_labels(std::span<const RawSample> labeled);

}  // namespace lolal
