#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lolal/types.hpp"

namespace lolal {

inline constexpr std::string_view kRareToken = "<rare>";
inline constexpr std::string_view kNumberToken = "<number>";
/// Boundary between the parent and the child command line.
inline constexpr std::string_view kSepToken = "<sep>";

/// Characters that split a command line. Whitespace always splits and is
/// never emitted; every other delimiter becomes a token of its own.
class DelimiterSet {
 public:
  explicit DelimiterSet(std::string_view chars);

  /// space , . / - : ; \ = " ' ( ) [ ] { } & | < > @ ? ! % +
  static const DelimiterSet& standard();

  bool contains(char c) const { return table_[static_cast<unsigned char>(c)]; }
  const std::string& chars() const { return chars_; }

 private:
  std::array<bool, 256> table_{};
  std::string chars_;
};

struct TokenSequence {
  std::vector<std::string> tokens;
  std::size_t rare_count = 0;
  std::size_t numeric_count = 0;

  bool empty() const { return tokens.empty(); }
  std::size_t size() const { return tokens.size(); }
  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

/// Splits one command line into lowercase word and delimiter tokens.
TokenSequence tokenize_line(std::string_view line,
                            const DelimiterSet& delimiters = DelimiterSet::standard());

/// Parent tokens, then kSepToken, then child tokens. The separator is only
/// emitted when both command lines produce tokens.
TokenSequence tokenize(const RawSample& sample,
                       const DelimiterSet& delimiters = DelimiterSet::standard());

bool is_numeric_token(std::string_view token);
bool is_delimiter_token(std::string_view token, const DelimiterSet& delimiters = DelimiterSet::standard());
bool is_special_token(std::string_view token);

/// Token dictionary with corpus frequencies. Ids are assigned in sorted token
/// order after the two special tokens, so they do not depend on corpus order.
class Vocabulary {
 public:
  static constexpr int kFormatVersion = 1;

  explicit Vocabulary(std::size_t min_count = 5);

  std::size_t min_count() const { return min_count_; }
  std::size_t size() const { return tokens_.size(); }
  bool contains(std::string_view token) const;
  /// -1 when absent.
  int id(std::string_view token) const;
  std::size_t frequency(std::string_view token) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  /// Builds a dictionary from final frequencies. The special tokens are
  /// always added; every other entry must reach min_count.
  static Vocabulary from_counts(std::size_t min_count,
                                std::map<std::string, std::size_t, std::less<>> counts);

  std::string to_json() const;
  static Vocabulary from_json(std::string_view text);
  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

 private:
  std::size_t min_count_;
  std::vector<std::string> tokens_;
  std::map<std::string, std::size_t, std::less<>> frequency_;
  std::map<std::string, int, std::less<>> ids_;
};

Vocabulary build_vocabulary(std::span<const RawSample> corpus, std::size_t min_count,
                            const DelimiterSet& delimiters = DelimiterSet::standard());
Vocabulary build_vocabulary(std::span<const TokenSequence> sequences, std::size_t min_count,
                            const DelimiterSet& delimiters = DelimiterSet::standard());

/// Replaces all-digit tokens with kNumberToken and out-of-dictionary words
/// with kRareToken. Delimiters and the separator pass through unchanged.
TokenSequence normalize(const TokenSequence& sequence, const Vocabulary& vocab,
                        const DelimiterSet& delimiters = DelimiterSet::standard());

}  // namespace lolal
