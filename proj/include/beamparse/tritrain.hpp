#pragma once

// Tri-training data selection: keep auto-parsed sentences on which two
// parsers agree, then cut to a token budget, optionally matching the length
// distribution of a reference treebank.

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "beamparse/errors.hpp"
#include "beamparse/treebank.hpp"

namespace beamparse {

enum class AgreementMode { kLabeled, kUnlabeled };

struct AgreementStats {
  std::size_t sentences = 0;
  std::size_t kept_sentences = 0;
  std::size_t kept_tokens = 0;

  double agreement_rate() const {
    return sentences == 0 ? 0.0 : static_cast<double>(kept_sentences) / static_cast<double>(sentences);
  }
  double mean_length() const {
    return kept_sentences == 0 ? 0.0 : static_cast<double>(kept_tokens) / static_cast<double>(kept_sentences);
  }
};

inline void write_stats(std::ostream& out, const AgreementStats& s) {
  out << "agreement_rate=" << s.agreement_rate() << '\n'
      << "kept_sentences=" << s.kept_sentences << '\n'
      << "kept_tokens=" << s.kept_tokens << '\n'
      << "mean_length=" << s.mean_length() << '\n';
}

struct AgreementResult {
  std::vector<DepTree> kept;
  AgreementStats stats;
};

inline bool trees_agree(const DepTree& a, const DepTree& b, AgreementMode mode) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.tokens[i].head != b.tokens[i].head) return false;
    if (mode == AgreementMode::kLabeled && a.tokens[i].label != b.tokens[i].label) return false;
  }
  return true;
}

// Kept trees are copies of parser A's output.
inline AgreementResult agreement_filter(const std::vector<DepTree>& parses_a, const std::vector<DepTree>& parses_b,
                                        AgreementMode mode = AgreementMode::kLabeled) {
  if (parses_a.size() != parses_b.size()) {
    throw AlignmentError(std::min(parses_a.size(), parses_b.size()),
                         "inputs have " + std::to_string(parses_a.size()) + " and " +
                             std::to_string(parses_b.size()) + " sentences");
  }
  AgreementResult out;
  for (std::size_t s = 0; s < parses_a.size(); ++s) {
    const auto& a = parses_a[s];
    const auto& b = parses_b[s];
    if (a.size() != b.size()) throw AlignmentError(s, "sentence lengths differ");
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a.tokens[i].form != b.tokens[i].form) {
        throw AlignmentError(s, "form mismatch at token " + std::to_string(i + 1) + ": '" + a.tokens[i].form +
                                    "' vs '" + b.tokens[i].form + "'");
      }
    }
    ++out.stats.sentences;
    if (trees_agree(a, b, mode)) {
      ++out.stats.kept_sentences;
      out.stats.kept_tokens += a.size();
      out.kept.push_back(a);
    }
  }
  return out;
}

// Longest prefix whose token count does not exceed `budget`.
inline std::vector<DepTree> take_token_budget(const std::vector<DepTree>& kept, std::size_t budget) {
  std::vector<DepTree> out;
  std::size_t used = 0;
  for (const auto& t : kept) {
    if (used + t.size() > budget) break;
    used += t.size();
    out.push_back(t);
  }
  return out;
}

inline constexpr std::size_t kLengthBinWidth = 5;

inline std::size_t length_bin(std::size_t length) { return length == 0 ? 0 : (length - 1) / kLengthBinWidth; }

// Draws sentences so that the length histogram (bins of width 5) tracks the
// reference treebank's, until the next draw would exceed `budget` tokens.
// When the wanted bin is exhausted the nearest non-empty bin is used. The
// result keeps the input order. Falls back to take_token_budget when the
// reference is empty.
inline std::vector<DepTree> length_matched_sample(const std::vector<DepTree>& kept,
                                                  const std::vector<DepTree>& reference, std::size_t budget,
                                                  std::uint64_t seed, std::ostream* log = nullptr) {
  if (reference.empty()) {
    if (log) *log << "length_match=off reason=empty_reference\n";
    return take_token_budget(kept, budget);
  }
  std::map<std::size_t, double> target;
  for (const auto& t : reference) target[length_bin(t.size())] += 1.0;
  for (auto& [bin, w] : target) w /= static_cast<double>(reference.size());

  std::map<std::size_t, std::vector<std::size_t>> pools;
  for (std::size_t i = 0; i < kept.size(); ++i) pools[length_bin(kept[i].size())].push_back(i);
  std::mt19937_64 rng(seed);
  for (auto& [bin, pool] : pools) std::shuffle(pool.begin(), pool.end(), rng);
  std::map<std::size_t, std::size_t> next;  // cursor into each pool
  std::map<std::size_t, std::size_t> counts;

  std::vector<std::size_t> chosen;
  std::size_t used = 0;
  while (chosen.size() < kept.size()) {
    // Bin furthest below its target share after one more draw.
    std::size_t want = target.begin()->first;
    double best_deficit = -1e300;
    const auto total = static_cast<double>(chosen.size() + 1);
    for (const auto& [bin, share] : target) {
      const double deficit = share * total - static_cast<double>(counts[bin]);
      if (deficit > best_deficit) {
        best_deficit = deficit;
        want = bin;
      }
    }
    // Nearest bin with sentences left, preferring the shorter on ties.
    std::size_t pick = 0;
    std::size_t best_dist = SIZE_MAX;
    for (const auto& [bin, pool] : pools) {
      if (next[bin] >= pool.size()) continue;
      const std::size_t dist = bin > want ? bin - want : want - bin;
      if (dist < best_dist) {
        best_dist = dist;
        pick = bin;
      }
    }
    if (best_dist == SIZE_MAX) break;
    const std::size_t idx = pools[pick][next[pick]];
    if (used + kept[idx].size() > budget) break;
    ++next[pick];
    ++counts[pick];
    used += kept[idx].size();
    chosen.push_back(idx);
  }
  std::sort(chosen.begin(), chosen.end());
  std::vector<DepTree> out;
  out.reserve(chosen.size());
  for (auto i : chosen) out.push_back(kept[i]);
  return out;
}

enum class Provenance { kGold, kAuto };

struct TrainingSentence {
  DepTree tree;
  Provenance source = Provenance::kGold;
};

inline std::vector<TrainingSentence> merge_training_sets(const std::vector<DepTree>& gold,
                                                         const std::vector<DepTree>& automatic, std::uint64_t seed) {
  std::vector<TrainingSentence> out;
  out.reserve(gold.size() + automatic.size());
  for (const auto& t : gold) out.push_back({t, Provenance::kGold});
  for (const auto& t : automatic) out.push_back({t, Provenance::kAuto});
  std::mt19937_64 rng(seed);
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

inline std::vector<DepTree> trees_of(const std::vector<TrainingSentence>& merged) {
  std::vector<DepTree> out;
  out.reserve(merged.size());
  for (const auto& s : merged) out.push_back(s.tree);
  return out;
}

}  // namespace beamparse
