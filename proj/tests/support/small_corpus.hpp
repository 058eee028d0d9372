#pragma once

#include <memory>

#include "lolal/experiment.hpp"
#include "lolal/featurizer.hpp"
#include "lolal/synth_corpus.hpp"

namespace oracle {

/// A scaled-down generated corpus with a quickly trained pipeline.
struct SmallWorld {
  lolal::Corpus corpus;
  std::shared_ptr<const lolal::FeaturePipeline> pipeline;
};

inline SmallWorld small_world(double scale = 0.1, std::size_t unlabeled = 60, std::uint64_t seed = 7) {
  lolal::CorpusSpec spec;
  spec.scale = scale;
  spec.unlabeled_size = unlabeled;
  spec.seed = seed;
  SmallWorld w;
  w.corpus = lolal::generate_corpus(spec);
  std::vector<lolal::RawSample> text = w.corpus.labeled;
  text.insert(text.end(), w.corpus.unlabeled.begin(), w.corpus.unlabeled.end());
  lolal::PipelineConfig config;
  config.embedding.epochs = 5;
  w.pipeline = std::make_shared<const lolal::FeaturePipeline>(lolal::FeaturePipeline::train(text, config));
  return w;
}

}  // namespace oracle
