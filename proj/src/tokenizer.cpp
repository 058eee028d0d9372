#include "lolal/tokenizer.hpp"

#include <algorithm>
#include <cctype>

#include "json.hpp"
#include "lolal/io.hpp"

namespace lolal {
namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

char lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }

void append_line_tokens(std::string_view line, const DelimiterSet& delimiters,
                        std::vector<std::string>& out) {
  std::string word;
  auto flush = [&] {
    if (!word.empty()) {
      out.push_back(std::move(word));
      word.clear();
    }
  };
  for (char c : line) {
    if (is_space(c)) {
      flush();
    } else if (delimiters.contains(c)) {
      flush();
      out.emplace_back(1, c);
    } else {
      word.push_back(lower(c));
    }
  }
  flush();
}

}  // namespace

DelimiterSet::DelimiterSet(std::string_view chars) {
  for (char c : chars) {
    if (!table_[static_cast<unsigned char>(c)]) {
      table_[static_cast<unsigned char>(c)] = true;
      chars_.push_back(c);
    }
  }
  if (!table_[static_cast<unsigned char>(' ')]) {
    table_[static_cast<unsigned char>(' ')] = true;
    chars_.push_back(' ');
  }
}

const DelimiterSet& DelimiterSet::standard() {
  static const DelimiterSet set(" ,./-:;\\=\"'()[]{}&|<>@?!%+");
  return set;
}

TokenSequence tokenize_line(std::string_view line, const DelimiterSet& delimiters) {
  TokenSequence seq;
  append_line_tokens(line, delimiters, seq.tokens);
  return seq;
}

TokenSequence tokenize(const RawSample& sample, const DelimiterSet& delimiters) {
  TokenSequence seq;
  append_line_tokens(sample.parent, delimiters, seq.tokens);
  const std::size_t parent_count = seq.tokens.size();
  std::vector<std::string> child;
  append_line_tokens(sample.child, delimiters, child);
  if (parent_count > 0 && !child.empty()) seq.tokens.emplace_back(kSepToken);
  std::move(child.begin(), child.end(), std::back_inserter(seq.tokens));
  return seq;
}

bool is_numeric_token(std::string_view token) {
  return !token.empty() && std::all_of(token.begin(), token.end(), [](char c) { return c >= '0' && c <= '9'; });
}

bool is_delimiter_token(std::string_view token, const DelimiterSet& delimiters) {
  return token.size() == 1 && delimiters.contains(token[0]);
}

bool is_special_token(std::string_view token) {
  return token == kRareToken || token == kNumberToken || token == kSepToken;
}

Vocabulary::Vocabulary(std::size_t min_count) : min_count_(min_count) {
  if (min_count_ < 1) throw Error("min_count must be at least 1");
  frequency_.emplace(std::string(kRareToken), 0);
  frequency_.emplace(std::string(kNumberToken), 0);
  tokens_ = {std::string(kRareToken), std::string(kNumberToken)};
  ids_.emplace(std::string(kRareToken), 0);
  ids_.emplace(std::string(kNumberToken), 1);
}

Vocabulary Vocabulary::from_counts(std::size_t min_count,
                                   std::map<std::string, std::size_t, std::less<>> counts) {
  Vocabulary vocab(min_count);
  for (auto& [token, count] : counts) {
    const bool special = token == kRareToken || token == kNumberToken;
    if (!special && count < min_count) {
      throw Error("token '" + token + "' is below min_count");
    }
    vocab.frequency_[token] = count;
  }
  vocab.tokens_.clear();
  vocab.ids_.clear();
  vocab.tokens_ = {std::string(kRareToken), std::string(kNumberToken)};
  for (const auto& entry : vocab.frequency_) {
    if (entry.first != kRareToken && entry.first != kNumberToken) vocab.tokens_.push_back(entry.first);
  }
  for (std::size_t i = 0; i < vocab.tokens_.size(); ++i) {
    vocab.ids_.emplace(vocab.tokens_[i], static_cast<int>(i));
  }
  return vocab;
}

bool Vocabulary::contains(std::string_view token) const { return ids_.find(token) != ids_.end(); }

int Vocabulary::id(std::string_view token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? -1 : it->second;
}

std::size_t Vocabulary::frequency(std::string_view token) const {
  auto it = frequency_.find(token);
  return it == frequency_.end() ? 0 : it->second;
}

std::string Vocabulary::to_json() const {
  nlohmann::ordered_json doc;
  doc["version"] = kFormatVersion;
  doc["min_count"] = min_count_;
  nlohmann::ordered_json tokens = nlohmann::ordered_json::object();
  for (const auto& token : tokens_) tokens[token] = frequency(token);
  doc["tokens"] = std::move(tokens);
  return doc.dump();
}

Vocabulary Vocabulary::from_json(std::string_view text) {
  auto doc = nlohmann::json::parse(text);
  if (doc.value("version", 0) != kFormatVersion) throw Error("unsupported vocabulary version");
  std::map<std::string, std::size_t, std::less<>> counts;
  for (const auto& [token, count] : doc.at("tokens").items()) counts[token] = count.get<std::size_t>();
  return from_counts(doc.at("min_count").get<std::size_t>(), std::move(counts));
}

void Vocabulary::save(const std::string& path) const { write_file_atomic(path, to_json()); }

Vocabulary Vocabulary::load(const std::string& path) { return from_json(read_file(path)); }

Vocabulary build_vocabulary(std::span<const TokenSequence> sequences, std::size_t min_count,
                            const DelimiterSet& delimiters) {
  if (min_count < 1) throw Error("min_count must be at least 1");
  std::map<std::string, std::size_t, std::less<>> raw;
  std::size_t numbers = 0;
  for (const auto& seq : sequences) {
    for (const auto& token : seq.tokens) {
      if (is_numeric_token(token)) {
        ++numbers;
      } else {
        ++raw[token];
      }
    }
  }
  std::map<std::string, std::size_t, std::less<>> kept;
  std::size_t rare = 0;
  for (auto& [token, count] : raw) {
    if (count >= min_count) {
      kept.emplace(token, count);
    } else if (!is_delimiter_token(token, delimiters) && token != kSepToken) {
      rare += count;
    }
  }
  kept[std::string(kRareToken)] += rare;
  kept[std::string(kNumberToken)] += numbers;
  return Vocabulary::from_counts(min_count, std::move(kept));
}

Vocabulary build_vocabulary(std::span<const RawSample> corpus, std::size_t min_count,
                            const DelimiterSet& delimiters) {
  std::vector<TokenSequence> sequences;
  sequences.reserve(corpus.size());
  for (const auto& sample : corpus) sequences.push_back(tokenize(sample, delimiters));
  return build_vocabulary(std::span<const TokenSequence>(sequences), min_count, delimiters);
}

TokenSequence normalize(const TokenSequence& sequence, const Vocabulary& vocab,
                        const DelimiterSet& delimiters) {
  TokenSequence out;
  out.tokens.reserve(sequence.tokens.size());
  for (const auto& token : sequence.tokens) {
    if (token == kNumberToken || is_numeric_token(token)) {
      out.tokens.emplace_back(kNumberToken);
      ++out.numeric_count;
    } else if (token == kSepToken || is_delimiter_token(token, delimiters) || vocab.contains(token)) {
      out.tokens.push_back(token);
      if (token == kRareToken) ++out.rare_count;
    } else {
      out.tokens.emplace_back(kRareToken);
      ++out.rare_count;
    }
  }
  return out;
}

}  // namespace lolal
