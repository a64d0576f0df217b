#pragma once

// CoNLL-X treebank I/O, dependency tree utilities and attachment scoring.

#include <algorithm>
#include <array>
#include <charconv>
#include <cstddef>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "beamparse/errors.hpp"

namespace beamparse {

struct Token {
  std::string form;
  std::string pos;
  int head = 0;  // 0 is the artificial root, tokens are 1-based
  std::string label;

  friend bool operator==(const Token&, const Token&) = default;
};

struct DepTree {
  std::vector<Token> tokens;

  std::size_t size() const { return tokens.size(); }
  bool empty() const { return tokens.empty(); }

  // 1-based access, matching head indices.
  const Token& at(int index) const { return tokens.at(static_cast<std::size_t>(index - 1)); }
  Token& at(int index) { return tokens.at(static_cast<std::size_t>(index - 1)); }

  std::vector<int> heads() const {
    std::vector<int> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(t.head);
    return out;
  }

  std::vector<std::string> labels() const {
    std::vector<std::string> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(t.label);
    return out;
  }

  friend bool operator==(const DepTree&, const DepTree&) = default;
};

struct EvalReport {
  double uas = 1.0;
  double las = 1.0;
  std::size_t scored_tokens = 0;
  std::size_t total_tokens = 0;
  std::size_t correct_heads = 0;
  std::size_t correct_labeled = 0;
};

namespace detail {

inline std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> cols;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    if (pos == std::string_view::npos) {
      cols.push_back(line.substr(start));
      break;
    }
    cols.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return cols;
}

inline std::optional<int> parse_int(std::string_view s) {
  int value = 0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, value);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return value;
}

}  // namespace detail

struct ConllReadOptions {
  // When false, a "_" head column is read as 0. Used for raw parser input
  // whose heads are placeholders.
  bool require_heads = true;
};

// Single-pass reader over a CoNLL-X (or CoNLL-U) stream, one sentence per call.
class ConllReader {
 public:
  explicit ConllReader(std::istream& in, ConllReadOptions options = {})
      : in_(in), options_(options) {}

  std::optional<DepTree> next() {
    DepTree tree;
    std::size_t first_line = 0;
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) {
        if (tree.empty()) continue;
        validate(tree, first_line);
        return tree;
      }
      if (line.front() == '#') continue;
      const auto cols = detail::split_tabs(line);
      if (cols.size() != 10) {
        throw ConllParseError(line_no_, "expected 10 tab-separated columns, got " +
                                            std::to_string(cols.size()));
      }
      // Multiword token ranges and empty nodes (CoNLL-U).
      if (cols[0].find_first_of("-.") != std::string_view::npos) continue;
      const auto index = detail::parse_int(cols[0]);
      if (!index) throw ConllParseError(line_no_, "non-integer token index '" + std::string(cols[0]) + "'");
      if (*index != static_cast<int>(tree.size()) + 1) {
        throw ConllParseError(line_no_, "token index " + std::to_string(*index) + " out of sequence");
      }
      if (tree.empty()) first_line = line_no_;

      Token tok;
      tok.form = std::string(cols[1]);
      if (tok.form.empty()) throw ConllParseError(line_no_, "empty form");
      tok.pos = std::string(cols[4] == "_" ? cols[3] : cols[4]);
      if (cols[6] == "_" && !options_.require_heads) {
        tok.head = 0;
      } else {
        const auto head = detail::parse_int(cols[6]);
        if (!head) throw ConllParseError(line_no_, "non-integer head '" + std::string(cols[6]) + "'");
        tok.head = *head;
      }
      tok.label = std::string(cols[7]);
      tree.tokens.push_back(std::move(tok));
    }
    if (tree.empty()) return std::nullopt;
    validate(tree, first_line);
    return tree;
  }

 private:
  void validate(const DepTree& tree, std::size_t first_line) const {
    const int n = static_cast<int>(tree.size());
    for (int i = 1; i <= n; ++i) {
      const int h = tree.at(i).head;
      if (h < 0 || h > n || h == i) {
        throw ConllParseError(first_line + static_cast<std::size_t>(i - 1),
                              "head " + std::to_string(h) + " invalid for token " + std::to_string(i) +
                                  " of a " + std::to_string(n) + "-token sentence");
      }
    }
  }

  std::istream& in_;
  ConllReadOptions options_;
  std::size_t line_no_ = 0;
};

inline std::vector<DepTree> read_conll(std::istream& in, ConllReadOptions options = {}) {
  std::vector<DepTree> out;
  ConllReader reader(in, options);
  while (auto tree = reader.next()) out.push_back(std::move(*tree));
  return out;
}

inline void write_conll(const DepTree& tree, std::ostream& out) {
  int index = 1;
  for (const auto& t : tree.tokens) {
    out << index++ << '\t' << t.form << "\t_\t" << t.pos << '\t' << t.pos << "\t_\t" << t.head << '\t'
        << (t.label.empty() ? std::string("_") : t.label) << "\t_\t_\n";
  }
  out << '\n';
}

inline void write_conll(const std::vector<DepTree>& trees, std::ostream& out) {
  for (const auto& tree : trees) write_conll(tree, out);
  if (!out) throw DataError("failed writing CoNLL output");
}

// Non-crossing check over all arcs, including arcs from the artificial root.
inline bool is_projective(const DepTree& tree) {
  const int n = static_cast<int>(tree.size());
  std::vector<std::array<int, 2>> spans;
  spans.reserve(tree.size());
  for (int d = 1; d <= n; ++d) {
    const int h = tree.at(d).head;
    spans.push_back({std::min(h, d), std::max(h, d)});
  }
  for (std::size_t a = 0; a < spans.size(); ++a) {
    for (std::size_t b = a + 1; b < spans.size(); ++b) {
      const auto [l1, r1] = spans[a];
      const auto [l2, r2] = spans[b];
      if ((l1 < l2 && l2 < r1 && r1 < r2) || (l2 < l1 && l1 < r2 && r2 < r1)) return false;
    }
  }
  return true;
}

// Heads in range, exactly one root attachment, and no cycles.
inline bool is_well_formed(const DepTree& tree) {
  const int n = static_cast<int>(tree.size());
  if (n == 0) return false;
  int roots = 0;
  for (int d = 1; d <= n; ++d) {
    const int h = tree.at(d).head;
    if (h < 0 || h > n || h == d) return false;
    if (h == 0) ++roots;
  }
  if (roots != 1) return false;
  for (int d = 1; d <= n; ++d) {
    int cur = d;
    for (int steps = 0; cur != 0; ++steps) {
      if (steps > n) return false;
      cur = tree.at(cur).head;
    }
  }
  return true;
}

// Gold POS tags treated as punctuation when scoring.
inline bool is_punctuation_tag(std::string_view pos) {
  static constexpr std::array<std::string_view, 5> kPunct = {"``", "''", ":", ",", "."};
  return std::find(kPunct.begin(), kPunct.end(), pos) != kPunct.end();
}

// Zero scored tokens yields uas = las = 1.
inline EvalReport evaluate(const std::vector<DepTree>& gold, const std::vector<DepTree>& predicted,
                           bool exclude_punct = true) {
  if (gold.size() != predicted.size()) {
    throw AlignmentError(std::min(gold.size(), predicted.size()),
                         "gold has " + std::to_string(gold.size()) + " sentences, predicted has " +
                             std::to_string(predicted.size()));
  }
  EvalReport report;
  for (std::size_t s = 0; s < gold.size(); ++s) {
    const auto& g = gold[s];
    const auto& p = predicted[s];
    if (g.size() != p.size()) {
      throw AlignmentError(s, "length mismatch: gold " + std::to_string(g.size()) + " vs predicted " +
                                  std::to_string(p.size()));
    }
    for (std::size_t i = 0; i < g.size(); ++i) {
      ++report.total_tokens;
      if (exclude_punct && is_punctuation_tag(g.tokens[i].pos)) continue;
      ++report.scored_tokens;
      if (g.tokens[i].head == p.tokens[i].head) {
        ++report.correct_heads;
        if (g.tokens[i].label == p.tokens[i].label) ++report.correct_labeled;
      }
    }
  }
  if (report.scored_tokens > 0) {
    const auto denom = static_cast<double>(report.scored_tokens);
    report.uas = static_cast<double>(report.correct_heads) / denom;
    report.las = static_cast<double>(report.correct_labeled) / denom;
  }
  return report;
}

inline std::size_t token_count(const std::vector<DepTree>& trees) {
  std::size_t n = 0;
  for (const auto& t : trees) n += t.size();
  return n;
}

}  // namespace beamparse
