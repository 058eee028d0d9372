#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "lolal/types.hpp"

namespace lolal {

/// Settings for the synthetic LOLBIN corpus.
struct CorpusSpec {
  /// Labeled samples per class before scaling.
  std::map<Label, std::size_t> counts = {
      {Label::Benign, 454},        {Label::BitsadminLolbin, 159}, {Label::CertutilLolbin, 1043},
      {Label::MsbuildLolbin, 33},  {Label::MsiexecLolbin, 92},    {Label::Regsvr32Lolbin, 206},
  };
  /// Multiplies every class count; each enabled class keeps at least one sample.
  double scale = 1.0;
  /// Size of the extra pool used only for unsupervised embedding training.
  std::size_t unlabeled_size = 1000;
  /// Chance of appending a random one-off token (job names, hashes) to a
  /// command, which the dictionary later maps to the rare token.
  double rare_token_rate = 0.15;
  /// Share of benign samples drawn from families that imitate malicious
  /// shapes (remote downloads, script registration, xml builds).
  double lookalike_rate = 0.25;
  std::uint64_t seed = 7;

  std::string to_json() const;
  /// Missing fields keep their defaults; counts are keyed by label name.
  static CorpusSpec from_json(std::string_view text);
};

struct Corpus {
  std::vector<RawSample> labeled;
  /// Ground truth is attached here as well; learners drop it.
  std::vector<RawSample> unlabeled;
};

/// Deterministic for a given spec. Labeled ids are "L00001"..., unlabeled ids
/// "U00001"...; both sets are shuffled before ids are assigned.
Corpus generate_corpus(const CorpusSpec& spec);

/// One entry per template family: "<label>/<family>".
std::vector<std::string> template_families();

/// Class counts after scaling.
std::map<Label, std::size_t> scaled_counts(const CorpusSpec& spec);

}  // namespace lolal
