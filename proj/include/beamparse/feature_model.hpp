#pragma once

// Vocabularies and the fixed 20/20/12 feature template.
//
// Template order (normative). With s1..s4 the top four stack items, b1..b4 the
// first four buffer items, lc1/lc2 the outermost and second outermost left
// children and rc1/rc2 likewise on the right:
//
//   word, tag (20 each):
//     0-3    s1 s2 s3 s4
//     4-7    b1 b2 b3 b4
//     8-13   lc1(s1) lc2(s1) rc1(s1) rc2(s1) lc1(lc1(s1)) rc1(rc1(s1))
//     14-19  the same six child positions of s2
//   label (12): the arc labels of the twelve child positions above.

#include <algorithm>
#include <array>
#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "beamparse/transition_system.hpp"
#include "beamparse/treebank.hpp"

namespace beamparse {

inline constexpr int kWordFeatures = 20;
inline constexpr int kTagFeatures = 20;
inline constexpr int kLabelFeatures = 12;

enum class FeatureGroup { kWord, kTag, kLabel };

class Vocabulary {
 public:
  static constexpr int kRoot = 0;
  static constexpr int kNull = 1;
  static constexpr int kUnk = 2;
  static constexpr int kNumSpecial = 3;

  Vocabulary() = default;
  // `entries` are the non-special strings in id order, starting at kNumSpecial.
  explicit Vocabulary(std::vector<std::string> entries) : entries_(std::move(entries)) {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (!index_.emplace(entries_[i], static_cast<int>(i) + kNumSpecial).second) {
        throw std::invalid_argument("duplicate vocabulary entry '" + entries_[i] + "'");
      }
    }
  }

  int size() const { return static_cast<int>(entries_.size()) + kNumSpecial; }
  const std::vector<std::string>& entries() const { return entries_; }

  int id(const std::string& s) const {
    auto it = index_.find(s);
    return it == index_.end() ? kUnk : it->second;
  }

  bool contains(const std::string& s) const { return index_.count(s) > 0; }

  std::string name(int id) const {
    switch (id) {
      case kRoot: return "<ROOT>";
      case kNull: return "<NULL>";
      case kUnk: return "<UNK>";
      default: return entries_.at(static_cast<std::size_t>(id - kNumSpecial));
    }
  }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.entries_ == b.entries_; }

 private:
  std::vector<std::string> entries_;
  std::unordered_map<std::string, int> index_;
};

struct Vocabularies {
  Vocabulary word;
  Vocabulary tag;
  Vocabulary label;

  // The transition system's label set is the label vocabulary minus specials,
  // so label index l has vocabulary id l + kNumSpecial.
  TransitionSystem transition_system() const { return TransitionSystem(label.entries()); }

  friend bool operator==(const Vocabularies&, const Vocabularies&) = default;
};

namespace detail {

inline std::vector<std::string> rank_by_frequency(const std::map<std::string, std::size_t>& counts,
                                                  std::size_t min_count) {
  std::vector<std::pair<std::string, std::size_t>> items;
  for (const auto& [s, c] : counts)
    if (c >= min_count) items.emplace_back(s, c);
  std::stable_sort(items.begin(), items.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> out;
  out.reserve(items.size());
  for (auto& [s, c] : items) out.push_back(std::move(s));
  return out;
}

}  // namespace detail

// Ids are assigned by descending frequency, ties broken lexicographically.
// Only words are cut by min_count.
inline Vocabularies build_vocabularies(const std::vector<DepTree>& treebank, std::size_t min_count = 2) {
  if (treebank.empty()) throw std::invalid_argument("cannot build vocabularies from an empty treebank");
  std::map<std::string, std::size_t> words, tags, labels;
  for (const auto& tree : treebank) {
    for (const auto& t : tree.tokens) {
      ++words[t.form];
      ++tags[t.pos];
      ++labels[t.label];
    }
  }
  return {Vocabulary(detail::rank_by_frequency(words, min_count)),
          Vocabulary(detail::rank_by_frequency(tags, 1)), Vocabulary(detail::rank_by_frequency(labels, 1))};
}

struct FeatureIds {
  std::array<int, kWordFeatures> words{};
  std::array<int, kTagFeatures> tags{};
  std::array<int, kLabelFeatures> labels{};

  friend bool operator==(const FeatureIds&, const FeatureIds&) = default;
};

// Word and tag ids per token, with position 0 holding ROOT.
struct SentenceIds {
  std::vector<int> words;
  std::vector<int> tags;

  int size() const { return static_cast<int>(words.size()) - 1; }
};

inline SentenceIds map_sentence(const DepTree& sentence, const Vocabularies& vocabs) {
  SentenceIds ids;
  ids.words.reserve(sentence.size() + 1);
  ids.tags.reserve(sentence.size() + 1);
  ids.words.push_back(Vocabulary::kRoot);
  ids.tags.push_back(Vocabulary::kRoot);
  for (const auto& t : sentence.tokens) {
    ids.words.push_back(vocabs.word.id(t.form));
    ids.tags.push_back(vocabs.tag.id(t.pos));
  }
  return ids;
}

inline FeatureIds extract_features(const Configuration& c, const SentenceIds& sentence) {
  // Token positions of the 20 template slots, -1 where absent.
  std::array<int, kWordFeatures> pos{};
  for (int i = 0; i < 4; ++i) {
    pos[static_cast<std::size_t>(i)] = c.stack_at(i);
    pos[static_cast<std::size_t>(4 + i)] = c.buffer_at(i);
  }
  for (int k = 0; k < 2; ++k) {
    const int s = c.stack_at(k);
    const auto base = static_cast<std::size_t>(8 + 6 * k);
    if (s < 0) {
      std::fill_n(pos.begin() + static_cast<std::ptrdiff_t>(base), 6, -1);
      continue;
    }
    const auto& n = c.node(s);
    pos[base + 0] = n.lc1;
    pos[base + 1] = n.lc2;
    pos[base + 2] = n.rc1;
    pos[base + 3] = n.rc2;
    pos[base + 4] = n.lc1 >= 0 ? c.node(n.lc1).lc1 : -1;
    pos[base + 5] = n.rc1 >= 0 ? c.node(n.rc1).rc1 : -1;
  }

  FeatureIds f;
  for (std::size_t i = 0; i < pos.size(); ++i) {
    const int p = pos[i];
    f.words[i] = p < 0 ? Vocabulary::kNull : sentence.words[static_cast<std::size_t>(p)];
    f.tags[i] = p < 0 ? Vocabulary::kNull : sentence.tags[static_cast<std::size_t>(p)];
  }
  for (std::size_t i = 0; i < f.labels.size(); ++i) {
    const int p = pos[8 + i];
    f.labels[i] = p < 0 ? Vocabulary::kNull : c.label(p) + Vocabulary::kNumSpecial;
  }
  return f;
}

inline FeatureIds extract_features(const Configuration& c, const DepTree& sentence, const Vocabularies& vocabs) {
  return extract_features(c, map_sentence(sentence, vocabs));
}

}  // namespace beamparse
