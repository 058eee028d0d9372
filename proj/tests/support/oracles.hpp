#pragma once

// Reference implementations used only by tests. They are written from the
// documented behaviour with plain loops and share no code with the library.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <limits>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "lolal/active_learner.hpp"
#include "lolal/random_forest.hpp"

namespace oracle {

inline constexpr std::string_view kDelimiters = ",./-:;\\=\"'()[]{}&|<>@?!%+";

inline bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; }
inline bool is_delim(char c) { return kDelimiters.find(c) != std::string_view::npos; }

/// Whitespace splits silently; every other delimiter is a token by itself.
inline std::vector<std::string> tokenize(std::string_view line) {
  std::vector<std::string> out;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) out.push_back(word);
    word.clear();
  };
  for (char c : line) {
    if (is_space(c)) {
      flush();
    } else if (is_delim(c)) {
      flush();
      out.push_back(std::string(1, c));
    } else {
      word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  flush();
  return out;
}

inline std::vector<std::string> word_tokens(const std::vector<std::string>& tokens) {
  std::vector<std::string> out;
  for (const auto& t : tokens) {
    if (!(t.size() == 1 && is_delim(t[0]))) out.push_back(t);
  }
  return out;
}

inline std::string strip_space_lower(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (!is_space(c)) out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

/// Walks every tree by hand and averages the positive share of the leaves.
inline double forest_score(const lolal::RandomForest& forest, const std::vector<double>& x) {
  double sum = 0.0;
  for (const auto& tree : forest.trees()) {
    const auto& nodes = tree.nodes();
    std::size_t i = 0;
    while (nodes[i].feature >= 0) {
      i = x[static_cast<std::size_t>(nodes[i].feature)] <= nodes[i].threshold ? static_cast<std::size_t>(nodes[i].left)
                                                                              : static_cast<std::size_t>(nodes[i].right);
    }
    const auto& counts = nodes[i].class_counts;
    double total = 0.0;
    for (double c : counts) total += c;
    if (total > 0 && counts.size() > 1) sum += counts[1] / total;
  }
  return sum / static_cast<double>(forest.trees().size());
}

struct Ranked {
  std::size_t index;
  std::string reason;
  friend bool operator==(const Ranked&, const Ranked&) = default;
};

/// Round-robin ranking by exhaustive search: each slot scans all remaining
/// candidates of its class for the best score, lowest index on ties.
inline std::vector<Ranked> round_robin(const std::vector<lolal::Candidate>& cands, int n_classes) {
  std::vector<bool> taken(cands.size(), false);
  std::vector<Ranked> out;
  while (true) {
    bool emitted = false;
    for (int pass = 0; pass < 2; ++pass) {
      for (int c = 0; c < n_classes; ++c) {
        long best = -1;
        for (std::size_t i = 0; i < cands.size(); ++i) {
          if (taken[i] || cands[i].predicted_class != c) continue;
          const double s = pass == 0 ? cands[i].uncertainty : cands[i].anomaly;
          const double b = best < 0 ? 0.0 : (pass == 0 ? cands[best].uncertainty : cands[best].anomaly);
          if (best < 0 || s > b) best = static_cast<long>(i);
        }
        if (best >= 0) {
          taken[best] = true;
          out.push_back({static_cast<std::size_t>(best), pass == 0 ? "uncertain" : "anomalous"});
          emitted = true;
        }
      }
    }
    if (!emitted) break;
  }
  return out;
}

/// Negative log density of independent Gaussians.
inline double gaussian_nll(const std::vector<double>& x, const std::vector<double>& mean,
                           const std::vector<double>& var) {
  const double pi = std::acos(-1.0);
  double a = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double z = x[j] - mean[j];
    a += 0.5 * std::log(2.0 * pi * var[j]) + z * z / (2.0 * var[j]);
  }
  return a;
}

struct ClassRates {
  double precision, recall, f1, fpr;
};

/// One-vs-rest rates from a confusion matrix indexed [truth][predicted].
inline ClassRates rates(const std::vector<std::vector<std::size_t>>& m, std::size_t k) {
  double tp = m[k][k], fp = 0, fn = 0, total = 0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (std::size_t j = 0; j < m.size(); ++j) {
      total += m[i][j];
      if (i != k && j == k) fp += m[i][j];
      if (i == k && j != k) fn += m[i][j];
    }
  }
  const double tn = total - tp - fp - fn;
  const double p = tp + fp > 0 ? tp / (tp + fp) : 0.0;
  const double r = tp / (tp + fn);
  const double f = p + r > 0 ? 2 * p * r / (p + r) : 0.0;
  return {p, r, f, fp / (fp + tn)};
}

}  // namespace oracle
