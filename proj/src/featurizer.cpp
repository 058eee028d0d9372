#include "lolal/featurizer.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "lolal/io.hpp"

namespace lolal {

std::string_view to_string(FeatureSet set) {
  switch (set) {
    case FeatureSet::Scores: return "S";
    case FeatureSet::Vectors: return "V";
    case FeatureSet::ScoresVectors: return "S+V";
    case FeatureSet::ScoresVectorsWeighted: return "S+V(W)";
  }
  return "?";
}

std::optional<FeatureSet> parse_feature_set(std::string_view text) {
  if (text == "S" || text == "s" || text == "scores") return FeatureSet::Scores;
  if (text == "V" || text == "v" || text == "vectors") return FeatureSet::Vectors;
  if (text == "S+V" || text == "s+v" || text == "sv") return FeatureSet::ScoresVectors;
  if (text == "S+V(W)" || text == "s+v(w)" || text == "svw") return FeatureSet::ScoresVectorsWeighted;
  return std::nullopt;
}

std::size_t feature_width(FeatureSet set, std::size_t dim, std::size_t lolbin_count) {
  switch (set) {
    case FeatureSet::Scores: return kScoreOnlyTop + lolbin_count;
    case FeatureSet::Vectors: return 3 * dim + 2 + lolbin_count;
    case FeatureSet::ScoresVectors:
    case FeatureSet::ScoresVectorsWeighted: return 3 * dim + 5 + lolbin_count;
  }
  return 0;
}

std::vector<std::string> feature_names(FeatureSet set, std::size_t dim, std::size_t lolbin_count) {
  std::vector<std::string> names;
  auto block = [&](const std::string& prefix, std::size_t n) {
    for (std::size_t j = 0; j < n; ++j) names.push_back(prefix + std::to_string(j));
  };
  if (set == FeatureSet::Scores) {
    block("score_top", kScoreOnlyTop);
  } else {
    block("min_", dim);
    block("max_", dim);
    block(set == FeatureSet::ScoresVectorsWeighted ? "wavg_" : "avg_", dim);
    names.emplace_back("token_count");
    names.emplace_back("rare_count");
    if (set != FeatureSet::Vectors) block("score_top", kTopScores);
  }
  for (std::size_t l = 0; l < lolbin_count; ++l) {
    names.push_back(l < kLolbinCount ? "lolbin_" + std::string(to_string(static_cast<Lolbin>(l)))
                                     : "lolbin_" + std::to_string(l));
  }
  return names;
}

FeatureVector assemble_features(std::span<const TokenView> tokens, std::size_t rare_count, std::size_t dim,
                                std::size_t lolbin_index, std::size_t lolbin_count, FeatureSet set) {
  if (tokens.empty()) throw Error("empty command");
  if (lolbin_index >= lolbin_count) throw Error("lolbin index out of range");
  for (const auto& t : tokens) {
    if (t.vector.size() != dim) throw Error("token vector has the wrong dimension");
  }

  FeatureVector out;
  out.values.reserve(feature_width(set, dim, lolbin_count));

  std::vector<double> scores;
  scores.reserve(tokens.size());
  for (const auto& t : tokens) scores.push_back(t.score);
  std::sort(scores.begin(), scores.end(), std::greater<>());
  auto top = [&](std::size_t k) {
    for (std::size_t i = 0; i < k; ++i) out.values.push_back(i < scores.size() ? scores[i] : 0.0);
  };

  if (set != FeatureSet::Scores) {
    Vector lo(dim, std::numeric_limits<double>::infinity());
    Vector hi(dim, -std::numeric_limits<double>::infinity());
    Vector mean(dim, 0.0);
    Vector weighted(dim, 0.0);
    double weight_sum = 0.0;
    // Accumulate in a canonical order so the sums do not depend on token order.
    std::vector<const TokenView*> order;
    order.reserve(tokens.size());
    for (const auto& t : tokens) order.push_back(&t);
    std::sort(order.begin(), order.end(), [](const TokenView* a, const TokenView* b) {
      if (a->score != b->score) return a->score < b->score;
      return std::lexicographical_compare(a->vector.begin(), a->vector.end(), b->vector.begin(), b->vector.end());
    });
    for (const TokenView* tp : order) {
      const TokenView& t = *tp;
      for (std::size_t j = 0; j < dim; ++j) {
        const double v = t.vector[j];
        lo[j] = std::min(lo[j], v);
        hi[j] = std::max(hi[j], v);
        mean[j] += v;
        weighted[j] += t.score * v;
      }
      weight_sum += t.score;
    }
    const double n = static_cast<double>(tokens.size());
    for (double& v : mean) v /= n;
    Vector avg = mean;
    if (set == FeatureSet::ScoresVectorsWeighted) {
      if (weight_sum > 0.0) {
        for (std::size_t j = 0; j < dim; ++j) avg[j] = weighted[j] / weight_sum;
      } else {
        out.weighted_fallback = true;
      }
    }
    out.values.insert(out.values.end(), lo.begin(), lo.end());
    out.values.insert(out.values.end(), hi.begin(), hi.end());
    out.values.insert(out.values.end(), avg.begin(), avg.end());
    out.values.push_back(n);
    out.values.push_back(static_cast<double>(rare_count));
    if (set != FeatureSet::Vectors) top(kTopScores);
  } else {
    top(kScoreOnlyTop);
  }
  for (std::size_t l = 0; l < lolbin_count; ++l) out.values.push_back(l == lolbin_index ? 1.0 : 0.0);
  return out;
}

FeatureVector featurize(const RawSample& sample, const EmbeddingModel& embeddings, const TokenScoreTable& scores,
                        const Vocabulary& vocab, FeatureSet set, std::size_t lolbin_count,
                        const DelimiterSet& delimiters) {
  const TokenSequence raw = tokenize(sample, delimiters);
  const TokenSequence normalized = normalize(raw, vocab, delimiters);
  const bool subword = embeddings.mode() == EmbeddingMode::FastText;

  std::vector<Vector> vectors;
  vectors.reserve(raw.size());
  std::vector<TokenView> views;
  views.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const std::string& key = normalized.tokens[i];
    const bool embed_raw = subword && key == kRareToken;
    vectors.push_back(embeddings.lookup(embed_raw ? raw.tokens[i] : key));
  }
  for (std::size_t i = 0; i < raw.size(); ++i) {
    views.push_back({vectors[i], scores.score(normalized.tokens[i], sample.lolbin)});
  }
  return assemble_features(views, normalized.rare_count, embeddings.dim(), static_cast<std::size_t>(sample.lolbin),
                           lolbin_count, set);
}

FeaturePipeline::FeaturePipeline(Vocabulary vocab, EmbeddingModel embeddings, PipelineConfig config)
    : vocab_(std::move(vocab)), embeddings_(std::move(embeddings)), config_(std::move(config)) {}

FeaturePipeline FeaturePipeline::train(std::span<const RawSample> corpus, const PipelineConfig& config) {
  Vocabulary vocab = build_vocabulary(corpus, config.embedding.min_count);
  std::vector<TokenSequence> sequences;
  sequences.reserve(corpus.size());
  for (const auto& sample : corpus) sequences.push_back(normalize(tokenize(sample), vocab));
  EmbeddingModel embeddings = train_embeddings(sequences, config.embedding);
  return FeaturePipeline(std::move(vocab), std::move(embeddings), config);
}

std::size_t FeaturePipeline::width() const {
  return feature_width(config_.feature_set, embeddings_.dim(), kLolbinCount);
}

std::vector<std::string> FeaturePipeline::names() const {
  return feature_names(config_.feature_set, embeddings_.dim(), kLolbinCount);
}

TokenScoreTable FeaturePipeline::score_table(std::span<const RawSample> labeled) const {
  if (!has_both_binary_labels(labeled)) return TokenScoreTable();
  return build_score_table(labeled, embeddings_, vocab_, config_.token_forest);
}

FeatureVector FeaturePipeline::featurize(const RawSample& sample, const TokenScoreTable& scores) const {
  return lolal::featurize(sample, embeddings_, scores, vocab_, config_.feature_set);
}

Matrix FeaturePipeline::featurize(std::span<const RawSample> samples, const TokenScoreTable& scores) const {
  Matrix out(0, width());
  for (const auto& sample : samples) out.append_row(featurize(sample, scores).values);
  return out;
}

std::string FeaturePipeline::to_json() const {
  nlohmann::ordered_json doc;
  doc["version"] = 1;
  doc["feature_set"] = std::string(to_string(config_.feature_set));
  const ForestConfig& f = config_.token_forest;
  doc["token_forest"] = {{"n_trees", f.n_trees},
                         {"max_depth", f.max_depth},
                         {"min_samples_leaf", f.min_samples_leaf},
                         {"features_per_split", f.features_per_split},
                         {"bootstrap", f.bootstrap},
                         {"seed", f.seed}};
  doc["vocabulary"] = nlohmann::ordered_json::parse(vocab_.to_json());
  doc["embeddings"] = nlohmann::ordered_json::parse(embeddings_.to_json());
  return doc.dump();
}

FeaturePipeline FeaturePipeline::from_json(std::string_view text) {
  const auto doc = nlohmann::json::parse(text);
  if (doc.value("version", 0) != 1) throw Error("unsupported pipeline version");
  PipelineConfig config;
  auto set = parse_feature_set(doc.at("feature_set").get<std::string>());
  if (!set) throw Error("unknown feature set in pipeline file");
  config.feature_set = *set;
  const auto& f = doc.at("token_forest");
  config.token_forest.n_trees = f.at("n_trees");
  config.token_forest.max_depth = f.at("max_depth");
  config.token_forest.min_samples_leaf = f.at("min_samples_leaf");
  config.token_forest.features_per_split = f.at("features_per_split");
  config.token_forest.bootstrap = f.at("bootstrap");
  config.token_forest.seed = f.at("seed");
  EmbeddingModel embeddings = EmbeddingModel::from_json(doc.at("embeddings").dump());
  config.embedding = embeddings.config();
  return FeaturePipeline(Vocabulary::from_json(doc.at("vocabulary").dump()), std::move(embeddings), config);
}

void FeaturePipeline::save(const std::string& path) const { write_file_atomic(path, to_json()); }

FeaturePipeline FeaturePipeline::load(const std::string& path) { return from_json(read_file(path)); }

std::string feature_matrix_csv(std::span<const RawSample> samples, const Matrix& features,
                               const std::vector<std::string>& names) {
  if (samples.size() != features.rows()) throw Error("sample count does not match feature rows");
  std::ostringstream out;
  out.precision(17);
  out << "id";
  for (const auto& n : names) out << ',' << n;
  out << '\n';
  for (std::size_t i = 0; i < samples.size(); ++i) {
    out << samples[i].id;
    for (double v : features.row(i)) out << ',' << v;
    out << '\n';
  }
  return out.str();
}

}  // namespace lolal
