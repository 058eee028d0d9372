#include "lolal/token_scorer.hpp"

#include <algorithm>
#include <sstream>
#include <tuple>

namespace lolal {
namespace {

std::string csv_field(std::string_view text) {
  if (text.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(text);
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

TokenScoreTable::TokenScoreTable(double default_score) : default_score_(default_score) {
  if (default_score < 0.0 || default_score > 1.0) throw Error("default score must be in [0, 1]");
}

double TokenScoreTable::score(std::string_view token, Lolbin lolbin) const {
  auto it = scores_.find(std::make_pair(std::string(token), lolbin));
  return it == scores_.end() ? default_score_ : it->second;
}

bool TokenScoreTable::contains(std::string_view token, Lolbin lolbin) const {
  return scores_.contains(std::make_pair(std::string(token), lolbin));
}

void TokenScoreTable::set(std::string token, Lolbin lolbin, double score) {
  if (!(score >= 0.0 && score <= 1.0)) throw Error("token score must be in [0, 1]");
  scores_[std::make_pair(std::move(token), lolbin)] = score;
}

std::string TokenScoreTable::to_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "token,lolbin,score\n";
  for (const auto& [key, score] : scores_) {
    out << csv_field(key.first) << ',' << to_string(key.second) << ',' << score << '\n';
  }
  return out.str();
}

Vector token_features(std::string_view token, std::size_t lolbin_index, std::size_t lolbin_count,
                      const EmbeddingModel& embeddings) {
  if (lolbin_index >= lolbin_count) throw Error("lolbin index out of range");
  Vector features = embeddings.lookup(token);
  features.resize(features.size() + lolbin_count, 0.0);
  features[embeddings.dim() + lolbin_index] = 1.0;
  return features;
}

RandomForest fit_token_forest(const Matrix& features, std::span<const int> labels, const ForestConfig& config,
                              std::span<const double> multiplicity) {
  bool positive = false, negative = false;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!multiplicity.empty() && multiplicity[i] <= 0) continue;
    (labels[i] == 1 ? positive : negative) = true;
  }
  if (!positive || !negative) throw Error("degenerate token training set");
  return fit_random_forest(features, labels, 2, config, multiplicity);
}

RandomForest fit_token_forest(const Matrix& features, std::span<const int> labels, std::size_t n_trees,
                              std::uint64_t seed, std::span<const double> multiplicity) {
  ForestConfig config;
  config.n_trees = n_trees;
  config.seed = seed;
  return fit_token_forest(features, labels, config, multiplicity);
}

double score_token(const RandomForest& forest, std::span<const double> features) {
  return forest.positive_score(features);
}

bool has_both_binary_labels(std::span<const RawSample> labeled) {
  bool benign = false, malicious = false;
  for (const auto& s : labeled) {
    if (!s.label) continue;
    (is_malicious(*s.label) ? malicious : benign) = true;
  }
  return benign && malicious;
}

TokenScoreTable build_score_table(std::span<const RawSample> labeled, const EmbeddingModel& embeddings,
                                  const Vocabulary& vocab, const ForestConfig& config,
                                  const DelimiterSet& delimiters) {
  if (labeled.empty()) throw Error("token scoring needs labeled samples");
  // (token, lolbin, label) -> occurrences. Ordered, so the rows do not depend
  // on sample order.
  std::map<std::tuple<std::string, Lolbin, int>, double> occurrences;
  for (const auto& sample : labeled) {
    if (!sample.label) throw Error("unlabeled sample passed to token scoring: " + sample.id);
    const int y = is_malicious(*sample.label) ? 1 : 0;
    for (auto& token : normalize(tokenize(sample, delimiters), vocab, delimiters).tokens) {
      occurrences[std::make_tuple(std::move(token), sample.lolbin, y)] += 1.0;
    }
  }

  Matrix features;
  std::vector<int> labels;
  std::vector<double> multiplicity;
  std::vector<std::pair<std::string, Lolbin>> pairs;
  std::map<std::pair<std::string, Lolbin>, std::size_t> pair_row;
  for (const auto& [key, count] : occurrences) {
    const auto& [token, lolbin, y] = key;
    auto pair = std::make_pair(token, lolbin);
    auto found = pair_row.find(pair);
    Vector row;
    if (found == pair_row.end()) {
      row = token_features(token, static_cast<std::size_t>(lolbin), kLolbinCount, embeddings);
      pair_row.emplace(pair, features.rows());
      pairs.push_back(pair);
    } else {
      auto existing = features.row(found->second);
      row.assign(existing.begin(), existing.end());
    }
    features.append_row(row);
    labels.push_back(y);
    multiplicity.push_back(count);
  }

  RandomForest forest = fit_token_forest(features, labels, config, multiplicity);
  TokenScoreTable table;
  for (const auto& pair : pairs) {
    table.set(pair.first, pair.second, score_token(forest, features.row(pair_row.at(pair))));
  }
  return table;
}

}  // namespace lolal
