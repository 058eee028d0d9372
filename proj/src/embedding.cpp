#include "lolal/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "json.hpp"
#include "lolal/io.hpp"
#include "lolal/rng.hpp"

namespace lolal {
namespace {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(sigmoid(x)) without overflow.
double log_sigmoid(double x) {
  if (x >= 0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

bool has_subwords(std::string_view token) {
  return !is_special_token(token) && token.size() > 1;
}

// Cumulative unigram^0.75 distribution for negative sampling.
class NegativeSampler {
 public:
  explicit NegativeSampler(const std::vector<double>& counts) {
    cumulative_.reserve(counts.size());
    double total = 0.0;
    for (double c : counts) {
      total += std::pow(c, 0.75);
      cumulative_.push_back(total);
    }
    if (total <= 0.0) {
      for (std::size_t i = 0; i < cumulative_.size(); ++i) cumulative_[i] = static_cast<double>(i + 1);
    }
  }

  std::size_t draw(Rng& rng) const {
    const double u = rng.uniform() * cumulative_.back();
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cumulative_.begin()), cumulative_.size() - 1);
  }

 private:
  std::vector<double> cumulative_;
};

}  // namespace

std::string_view to_string(EmbeddingMode mode) {
  return mode == EmbeddingMode::Word2Vec ? "word2vec" : "fasttext";
}

std::optional<EmbeddingMode> parse_embedding_mode(std::string_view text) {
  if (text == "word2vec" || text == "w2v") return EmbeddingMode::Word2Vec;
  if (text == "fasttext" || text == "ft") return EmbeddingMode::FastText;
  return std::nullopt;
}

void EmbeddingConfig::validate() const {
  if (dim < 1) throw Error("embedding dim must be at least 1");
  if (window < 1) throw Error("window must be at least 1");
  if (min_count < 1) throw Error("min_count must be at least 1");
  if (mode == EmbeddingMode::FastText && (ngram_min < 1 || ngram_min > ngram_max)) {
    throw Error("ngram_min must be in [1, ngram_max]");
  }
  if (!(learning_rate > 0.0) || min_learning_rate < 0.0) throw Error("invalid learning rate");
}

std::vector<std::string> char_ngrams(std::string_view token, std::size_t min_n, std::size_t max_n) {
  std::string bracketed;
  bracketed.reserve(token.size() + 2);
  bracketed.push_back('<');
  bracketed.append(token);
  bracketed.push_back('>');
  std::vector<std::string> out;
  std::set<std::string, std::less<>> seen;
  for (std::size_t n = min_n; n <= max_n; ++n) {
    if (n >= bracketed.size()) break;
    for (std::size_t i = 0; i + n <= bracketed.size(); ++i) {
      std::string gram = bracketed.substr(i, n);
      if (seen.insert(gram).second) out.push_back(std::move(gram));
    }
  }
  return out;
}

EmbeddingModel::EmbeddingModel(EmbeddingConfig config, std::vector<std::string> words)
    : config_(config) {
  config_.validate();
  words.emplace_back(kRareToken);
  words.emplace_back(kNumberToken);
  std::sort(words.begin(), words.end());
  words.erase(std::unique(words.begin(), words.end()), words.end());
  words_ = std::move(words);
  for (std::size_t i = 0; i < words_.size(); ++i) word_index_.emplace(words_[i], i);

  word_ngrams_.resize(words_.size());
  if (config_.mode == EmbeddingMode::FastText) {
    std::set<std::string, std::less<>> all;
    std::vector<std::vector<std::string>> per_word(words_.size());
    for (std::size_t w = 0; w < words_.size(); ++w) {
      if (!has_subwords(words_[w])) continue;
      per_word[w] = char_ngrams(words_[w], config_.ngram_min, config_.ngram_max);
      all.insert(per_word[w].begin(), per_word[w].end());
    }
    ngrams_.assign(all.begin(), all.end());
    for (std::size_t i = 0; i < ngrams_.size(); ++i) ngram_index_.emplace(ngrams_[i], i);
    for (std::size_t w = 0; w < words_.size(); ++w) {
      for (const auto& g : per_word[w]) word_ngrams_[w].push_back(ngram_index_.find(g)->second);
    }
  }

  const std::size_t d = config_.dim;
  word_input_ = Matrix(words_.size(), d);
  ngram_input_ = Matrix(ngrams_.size(), d);
  output_ = Matrix(words_.size(), d);
  Rng rng(config_.seed);
  const double scale = 0.5 / static_cast<double>(d);
  for (double& v : word_input_.data()) v = rng.uniform(-scale, scale);
  for (double& v : ngram_input_.data()) v = rng.uniform(-scale, scale);
}

std::optional<std::size_t> EmbeddingModel::word_index(std::string_view token) const {
  auto it = word_index_.find(token);
  if (it == word_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> EmbeddingModel::ngram_index(std::string_view ngram) const {
  auto it = ngram_index_.find(ngram);
  if (it == ngram_index_.end()) return std::nullopt;
  return it->second;
}

Vector EmbeddingModel::input_representation(std::size_t word) const {
  Vector h(word_input_.row(word).begin(), word_input_.row(word).end());
  const auto& grams = word_ngrams_[word];
  if (grams.empty()) return h;
  for (std::size_t g : grams) {
    auto row = ngram_input_.row(g);
    for (std::size_t j = 0; j < h.size(); ++j) h[j] += row[j];
  }
  const double inv = 1.0 / static_cast<double>(grams.size() + 1);
  for (double& v : h) v *= inv;
  return h;
}

Vector EmbeddingModel::lookup(std::string_view token) const {
  auto word = word_index(token);
  if (word) return input_representation(*word);
  if (config_.mode == EmbeddingMode::Word2Vec) {
    return input_representation(*word_index(kRareToken));
  }
  Vector h(config_.dim, 0.0);
  if (!has_subwords(token)) return h;
  std::size_t known = 0;
  for (const auto& gram : char_ngrams(token, config_.ngram_min, config_.ngram_max)) {
    auto g = ngram_index(gram);
    if (!g) continue;
    auto row = ngram_input_.row(*g);
    for (std::size_t j = 0; j < h.size(); ++j) h[j] += row[j];
    ++known;
  }
  if (known > 0) {
    for (double& v : h) v /= static_cast<double>(known);
  }
  return h;
}

std::span<double> EmbeddingModel::parameters(ParamBlock block, std::size_t index) {
  switch (block) {
    case ParamBlock::WordInput: return word_input_.row(index);
    case ParamBlock::NgramInput: return ngram_input_.row(index);
    case ParamBlock::Output: return output_.row(index);
  }
  throw Error("unknown parameter block");
}

std::span<const double> EmbeddingModel::parameters(ParamBlock block, std::size_t index) const {
  return const_cast<EmbeddingModel*>(this)->parameters(block, index);
}

double EmbeddingModel::loss(const SgnsExample& example) const {
  const Vector h = input_representation(example.center);
  double l = -log_sigmoid(dot(output_.row(example.context), h));
  for (std::size_t k : example.negatives) l -= log_sigmoid(-dot(output_.row(k), h));
  return l;
}

std::vector<ParamGradient> EmbeddingModel::gradient(const SgnsExample& example) const {
  const std::size_t d = config_.dim;
  const Vector h = input_representation(example.center);
  Vector dh(d, 0.0);
  std::map<std::size_t, Vector> out_grads;

  auto accumulate = [&](std::size_t word, double coeff) {
    auto row = output_.row(word);
    auto& g = out_grads.try_emplace(word, Vector(d, 0.0)).first->second;
    for (std::size_t j = 0; j < d; ++j) {
      g[j] += coeff * h[j];
      dh[j] += coeff * row[j];
    }
  };
  accumulate(example.context, sigmoid(dot(output_.row(example.context), h)) - 1.0);
  for (std::size_t k : example.negatives) accumulate(k, sigmoid(dot(output_.row(k), h)));

  const auto& grams = word_ngrams_[example.center];
  const double share = 1.0 / static_cast<double>(grams.size() + 1);
  Vector input_grad(d);
  for (std::size_t j = 0; j < d; ++j) input_grad[j] = dh[j] * share;

  std::vector<ParamGradient> grads;
  grads.push_back({ParamBlock::WordInput, example.center, input_grad});
  for (std::size_t g : grams) grads.push_back({ParamBlock::NgramInput, g, input_grad});
  for (auto& [word, g] : out_grads) grads.push_back({ParamBlock::Output, word, std::move(g)});
  return grads;
}

EmbeddingModel train_embeddings(std::span<const TokenSequence> corpus, const EmbeddingConfig& config) {
  config.validate();
  std::map<std::string, double, std::less<>> counts;
  std::size_t positions = 0;
  bool has_pairs = false;
  for (const auto& seq : corpus) {
    for (const auto& t : seq.tokens) counts[t] += 1.0;
    positions += seq.tokens.size();
    if (seq.tokens.size() >= 2) has_pairs = true;
  }
  if (!has_pairs) throw Error("no context pairs");

  std::vector<std::string> words;
  words.reserve(counts.size());
  for (const auto& entry : counts) words.push_back(entry.first);
  EmbeddingModel model(config, std::move(words));

  std::vector<double> word_counts(model.word_count(), 0.0);
  std::vector<std::vector<std::size_t>> encoded;
  encoded.reserve(corpus.size());
  for (const auto& seq : corpus) {
    std::vector<std::size_t> ids;
    ids.reserve(seq.tokens.size());
    for (const auto& t : seq.tokens) {
      std::size_t id = *model.word_index(t);
      ids.push_back(id);
      word_counts[id] += 1.0;
    }
    encoded.push_back(std::move(ids));
  }
  NegativeSampler sampler(word_counts);
  Rng rng(derive_seed(config.seed, 1));
  const std::size_t d = config.dim;
  const std::size_t window = config.window;

  // Fixed probe batch drawn before training.
  std::vector<SgnsExample> probe;
  {
    Rng probe_rng(derive_seed(config.seed, 2));
    std::vector<std::size_t> usable;
    for (std::size_t s = 0; s < encoded.size(); ++s) {
      if (encoded[s].size() >= 2) usable.push_back(s);
    }
    for (std::size_t i = 0; i < config.probe_pairs; ++i) {
      const auto& ids = encoded[probe_rng.pick(usable)];
      std::size_t c = probe_rng.index(ids.size());
      std::size_t o = probe_rng.index(ids.size() - 1);
      if (o >= c) ++o;
      SgnsExample ex{ids[c], ids[o], {}};
      for (std::size_t k = 0; k < config.negative_samples; ++k) ex.negatives.push_back(sampler.draw(probe_rng));
      probe.push_back(std::move(ex));
    }
  }

  const double total_steps = static_cast<double>(positions * config.epochs);
  std::size_t step = 0;
  Vector h(d), dh(d);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (const auto& ids : encoded) {
      const std::size_t n = ids.size();
      for (std::size_t i = 0; i < n; ++i, ++step) {
        const double progress = total_steps > 0 ? static_cast<double>(step) / total_steps : 0.0;
        const double lr = std::max(config.min_learning_rate,
                                   config.learning_rate - (config.learning_rate - config.min_learning_rate) * progress);
        const std::size_t center = ids[i];
        h = model.input_representation(center);
        std::fill(dh.begin(), dh.end(), 0.0);
        const std::size_t lo = i >= window ? i - window : 0;
        const std::size_t hi = std::min(n - 1, i + window);
        for (std::size_t j = lo; j <= hi; ++j) {
          if (j == i) continue;
          const std::size_t context = ids[j];
          auto update = [&](std::size_t word, double label) {
            auto row = model.output_.row(word);
            const double g = lr * (label - sigmoid(dot(row, h)));
            for (std::size_t q = 0; q < d; ++q) {
              dh[q] += g * row[q];
              row[q] += g * h[q];
            }
          };
          update(context, 1.0);
          for (std::size_t k = 0; k < config.negative_samples; ++k) {
            const std::size_t neg = sampler.draw(rng);
            if (neg == context) continue;
            update(neg, 0.0);
          }
        }
        const auto& grams = model.word_ngrams_[center];
        const double share = 1.0 / static_cast<double>(grams.size() + 1);
        auto in = model.word_input_.row(center);
        for (std::size_t q = 0; q < d; ++q) in[q] += dh[q] * share;
        for (std::size_t g : grams) {
          auto row = model.ngram_input_.row(g);
          for (std::size_t q = 0; q < d; ++q) row[q] += dh[q] * share;
        }
      }
    }
    double probe_loss = 0.0;
    for (const auto& ex : probe) probe_loss += model.loss(ex);
    model.epoch_loss_.push_back(probe.empty() ? 0.0 : probe_loss / static_cast<double>(probe.size()));
  }
  return model;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  const double na = std::sqrt(dot(a, a));
  const double nb = std::sqrt(dot(b, b));
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

std::string EmbeddingModel::to_json() const {
  nlohmann::ordered_json doc;
  doc["version"] = kFormatVersion;
  doc["config"] = {{"dim", config_.dim},
                   {"window", config_.window},
                   {"epochs", config_.epochs},
                   {"min_count", config_.min_count},
                   {"negative_samples", config_.negative_samples},
                   {"learning_rate", config_.learning_rate},
                   {"min_learning_rate", config_.min_learning_rate},
                   {"mode", std::string(to_string(config_.mode))},
                   {"ngram_min", config_.ngram_min},
                   {"ngram_max", config_.ngram_max},
                   {"seed", config_.seed},
                   {"probe_pairs", config_.probe_pairs}};
  doc["words"] = words_;
  doc["word_input"] = word_input_.data();
  doc["output"] = output_.data();
  doc["ngrams"] = ngrams_;
  doc["ngram_input"] = ngram_input_.data();
  doc["epoch_loss"] = epoch_loss_;
  return doc.dump();
}

EmbeddingModel EmbeddingModel::from_json(std::string_view text) {
  auto doc = nlohmann::json::parse(text);
  if (doc.value("version", 0) != kFormatVersion) throw Error("unsupported embedding model version");
  const auto& c = doc.at("config");
  EmbeddingConfig config;
  config.dim = c.at("dim");
  config.window = c.at("window");
  config.epochs = c.at("epochs");
  config.min_count = c.at("min_count");
  config.negative_samples = c.at("negative_samples");
  config.learning_rate = c.at("learning_rate");
  config.min_learning_rate = c.at("min_learning_rate");
  auto mode = parse_embedding_mode(c.at("mode").get<std::string>());
  if (!mode) throw Error("unknown embedding mode");
  config.mode = *mode;
  config.ngram_min = c.at("ngram_min");
  config.ngram_max = c.at("ngram_max");
  config.seed = c.at("seed");
  config.probe_pairs = c.value("probe_pairs", std::size_t{1000});

  EmbeddingModel model(config, doc.at("words").get<std::vector<std::string>>());
  auto copy = [](const nlohmann::json& src, Matrix& dst, const char* what) {
    auto values = src.get<std::vector<double>>();
    if (values.size() != dst.data().size()) throw Error(std::string("corrupt embedding block: ") + what);
    dst.data() = std::move(values);
  };
  if (doc.at("ngrams").get<std::vector<std::string>>() != model.ngrams_) {
    throw Error("embedding n-gram table does not match its dictionary");
  }
  copy(doc.at("word_input"), model.word_input_, "word_input");
  copy(doc.at("output"), model.output_, "output");
  copy(doc.at("ngram_input"), model.ngram_input_, "ngram_input");
  model.epoch_loss_ = doc.value("epoch_loss", std::vector<double>{});
  return model;
}

void EmbeddingModel::save(const std::string& path) const { write_file_atomic(path, to_json()); }

EmbeddingModel EmbeddingModel::load(const std::string& path) { return from_json(read_file(path)); }

}  // namespace lolal
