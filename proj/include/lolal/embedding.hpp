#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lolal/tokenizer.hpp"
#include "lolal/types.hpp"

namespace lolal {

enum class EmbeddingMode { Word2Vec, FastText };

std::string_view to_string(EmbeddingMode mode);
std::optional<EmbeddingMode> parse_embedding_mode(std::string_view text);

struct EmbeddingConfig {
  std::size_t dim = 16;
  std::size_t window = 5;
  std::size_t epochs = 20;
  std::size_t min_count = 5;
  std::size_t negative_samples = 5;
  double learning_rate = 0.025;
  double min_learning_rate = 1e-4;
  EmbeddingMode mode = EmbeddingMode::FastText;
  std::size_t ngram_min = 3;
  std::size_t ngram_max = 6;
  std::uint64_t seed = 1;
  /// Size of the fixed (center, context, negatives) batch whose mean loss is
  /// recorded after every epoch.
  std::size_t probe_pairs = 1000;

  void validate() const;
};

/// One skip-gram-with-negative-sampling example, by word index.
struct SgnsExample {
  std::size_t center = 0;
  std::size_t context = 0;
  std::vector<std::size_t> negatives;
};

enum class ParamBlock { WordInput, NgramInput, Output };

struct ParamGradient {
  ParamBlock block;
  std::size_t index;
  Vector grad;
};

/// Character n-grams of "<token>" with lengths in [min_n, max_n], excluding
/// the bracketed token itself. Deduplicated, in first-occurrence order.
std::vector<std::string> char_ngrams(std::string_view token, std::size_t min_n, std::size_t max_n);

/// Token vectors (and n-gram vectors in FastText mode) plus the output
/// (context) vectors used by the negative-sampling objective.
class EmbeddingModel {
 public:
  static constexpr int kFormatVersion = 1;

  /// Randomly initialised model over `words`; kRareToken and kNumberToken
  /// are added if missing.
  EmbeddingModel(EmbeddingConfig config, std::vector<std::string> words);

  const EmbeddingConfig& config() const { return config_; }
  std::size_t dim() const { return config_.dim; }
  EmbeddingMode mode() const { return config_.mode; }

  const std::vector<std::string>& words() const { return words_; }
  std::size_t word_count() const { return words_.size(); }
  std::optional<std::size_t> word_index(std::string_view token) const;
  const std::vector<std::string>& ngrams() const { return ngrams_; }
  std::optional<std::size_t> ngram_index(std::string_view ngram) const;
  std::span<const std::size_t> word_ngrams(std::size_t word) const { return word_ngrams_[word]; }

  /// Word2Vec: stored vector, or the rare-token vector for unknown tokens.
  /// FastText: mean of the whole-token vector (when known) and the token's
  /// known n-gram vectors; zero vector when nothing is known.
  Vector lookup(std::string_view token) const;

  /// Hidden representation of a dictionary word as composed during training.
  Vector input_representation(std::size_t word) const;

  std::span<double> parameters(ParamBlock block, std::size_t index);
  std::span<const double> parameters(ParamBlock block, std::size_t index) const;

  double loss(const SgnsExample& example) const;
  /// Analytic gradient of loss(example); one entry per distinct parameter row.
  std::vector<ParamGradient> gradient(const SgnsExample& example) const;

  /// Mean probe-batch loss after each training epoch.
  const std::vector<double>& epoch_loss() const { return epoch_loss_; }

  std::string to_json() const;
  static EmbeddingModel from_json(std::string_view text);
  void save(const std::string& path) const;
  static EmbeddingModel load(const std::string& path);

  friend EmbeddingModel train_embeddings(std::span<const TokenSequence>, const EmbeddingConfig&);

 private:
  EmbeddingConfig config_;
  std::vector<std::string> words_;
  std::map<std::string, std::size_t, std::less<>> word_index_;
  std::vector<std::string> ngrams_;
  std::map<std::string, std::size_t, std::less<>> ngram_index_;
  std::vector<std::vector<std::size_t>> word_ngrams_;
  Matrix word_input_;
  Matrix ngram_input_;
  Matrix output_;
  std::vector<double> epoch_loss_;
};

/// Trains on normalized token sequences with a single deterministic worker.
/// Throws when no sequence contains two or more tokens.
EmbeddingModel train_embeddings(std::span<const TokenSequence> corpus, const EmbeddingConfig& config);

double cosine_similarity(std::span<const double> a, std::span<const double> b);

}  // namespace lolal
