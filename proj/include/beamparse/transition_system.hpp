#pragma once

// Arc-standard transition system and its static oracle.
//
// Decisions are encoded densely for a label set of size L:
//   0            SHIFT
//   1 .. L       LEFT_ARC(label)
//   L+1 .. 2L    RIGHT_ARC(label)

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "beamparse/errors.hpp"
#include "beamparse/treebank.hpp"

namespace beamparse {

enum class DecisionKind : std::uint8_t { kShift, kLeftArc, kRightArc };

struct Decision {
  DecisionKind kind = DecisionKind::kShift;
  int label = -1;  // index into the label set; -1 for SHIFT

  static Decision shift() { return {}; }
  static Decision left_arc(int l) { return {DecisionKind::kLeftArc, l}; }
  static Decision right_arc(int l) { return {DecisionKind::kRightArc, l}; }

  friend bool operator==(const Decision&, const Decision&) = default;
};

struct Arc {
  int head;
  int label;
  int dependent;

  friend bool operator==(const Arc&, const Arc&) = default;
};

class TransitionSystem {
 public:
  TransitionSystem() = default;
  explicit TransitionSystem(std::vector<std::string> labels) : labels_(std::move(labels)) {
    for (std::size_t i = 0; i < labels_.size(); ++i) index_.emplace(labels_[i], static_cast<int>(i));
    if (index_.size() != labels_.size()) throw std::invalid_argument("duplicate arc label");
  }

  int num_labels() const { return static_cast<int>(labels_.size()); }
  int num_decisions() const { return 2 * num_labels() + 1; }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::string& label_name(int l) const { return labels_.at(static_cast<std::size_t>(l)); }

  std::optional<int> label_index(const std::string& label) const {
    auto it = index_.find(label);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  int id(Decision d) const {
    switch (d.kind) {
      case DecisionKind::kShift: return 0;
      case DecisionKind::kLeftArc: return 1 + d.label;
      case DecisionKind::kRightArc: return 1 + num_labels() + d.label;
    }
    return 0;
  }

  Decision decision(int id) const {
    if (id == 0) return Decision::shift();
    if (id <= num_labels()) return Decision::left_arc(id - 1);
    return Decision::right_arc(id - 1 - num_labels());
  }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, int> index_;
};

// Which decision kinds are legal; legality never depends on the label.
struct LegalMask {
  bool shift = false;
  bool left = false;
  bool right = false;

  bool any() const { return shift || left || right; }

  bool allows(Decision d) const {
    switch (d.kind) {
      case DecisionKind::kShift: return shift;
      case DecisionKind::kLeftArc: return left;
      case DecisionKind::kRightArc: return right;
    }
    return false;
  }

  bool allows(int id, int num_labels) const {
    if (id == 0) return shift;
    return id <= num_labels ? left : right;
  }
};

// Parser state: stack of token indices (0 = ROOT at the bottom), buffer front,
// and the arcs built so far with the two outermost children on each side.
class Configuration {
 public:
  struct Node {
    int head = -1;
    int label = -1;
    int lc1 = -1;  // leftmost child
    int lc2 = -1;  // second leftmost
    int rc1 = -1;  // rightmost child
    int rc2 = -1;  // second rightmost
  };

  static Configuration initial(int sentence_length) {
    if (sentence_length < 1) throw std::invalid_argument("sentence must have at least one token");
    Configuration c;
    c.n_ = sentence_length;
    c.stack_.reserve(static_cast<std::size_t>(sentence_length) + 1);
    c.stack_.push_back(0);
    c.buffer_front_ = 1;
    c.nodes_.resize(static_cast<std::size_t>(sentence_length) + 1);
    return c;
  }

  int sentence_length() const { return n_; }
  const std::vector<int>& stack() const { return stack_; }
  int stack_size() const { return static_cast<int>(stack_.size()); }
  int buffer_front() const { return buffer_front_; }
  int buffer_size() const { return n_ + 1 - buffer_front_; }
  bool buffer_empty() const { return buffer_front_ > n_; }
  int attached_count() const { return attached_; }

  // i = 0 is the top of the stack; -1 when absent.
  int stack_at(int i) const {
    return i < stack_size() ? stack_[stack_.size() - 1 - static_cast<std::size_t>(i)] : -1;
  }

  // i = 0 is the front of the buffer; -1 when absent.
  int buffer_at(int i) const { return buffer_front_ + i <= n_ ? buffer_front_ + i : -1; }

  const Node& node(int token) const { return nodes_[static_cast<std::size_t>(token)]; }
  int head(int token) const { return node(token).head; }
  int label(int token) const { return node(token).label; }

  std::vector<Arc> arcs() const {
    std::vector<Arc> out;
    for (int d = 1; d <= n_; ++d) {
      if (node(d).head >= 0) out.push_back({node(d).head, node(d).label, d});
    }
    return out;
  }

  bool is_terminal() const { return buffer_empty() && stack_.size() == 1; }

  LegalMask legal() const {
    LegalMask m;
    m.shift = !buffer_empty();
    if (stack_.size() >= 2) {
      const int s1 = stack_at(1);
      m.left = s1 != 0;
      // Single-root constraint: the root attachment is the last decision.
      m.right = s1 != 0 || buffer_empty();
    }
    return m;
  }

  void apply_in_place(Decision d) {
    if (!legal().allows(d)) throw std::invalid_argument("illegal decision for configuration");
    switch (d.kind) {
      case DecisionKind::kShift:
        stack_.push_back(buffer_front_++);
        break;
      case DecisionKind::kLeftArc: {
        const int s0 = stack_.back();
        const int s1 = stack_[stack_.size() - 2];
        attach(s0, d.label, s1);
        stack_.erase(stack_.end() - 2);
        break;
      }
      case DecisionKind::kRightArc: {
        const int s0 = stack_.back();
        const int s1 = stack_[stack_.size() - 2];
        attach(s1, d.label, s0);
        stack_.pop_back();
        break;
      }
    }
  }

  friend bool operator==(const Configuration& a, const Configuration& b) {
    return a.n_ == b.n_ && a.stack_ == b.stack_ && a.buffer_front_ == b.buffer_front_ &&
           a.arcs() == b.arcs();
  }

 private:
  void attach(int h, int label, int d) {
    auto& dep = nodes_[static_cast<std::size_t>(d)];
    dep.head = h;
    dep.label = label;
    auto& hn = nodes_[static_cast<std::size_t>(h)];
    if (d < h) {
      if (hn.lc1 < 0 || d < hn.lc1) {
        hn.lc2 = hn.lc1;
        hn.lc1 = d;
      } else if (hn.lc2 < 0 || d < hn.lc2) {
        hn.lc2 = d;
      }
    } else {
      if (hn.rc1 < 0 || d > hn.rc1) {
        hn.rc2 = hn.rc1;
        hn.rc1 = d;
      } else if (hn.rc2 < 0 || d > hn.rc2) {
        hn.rc2 = d;
      }
    }
    ++attached_;
  }

  int n_ = 0;
  std::vector<int> stack_;
  int buffer_front_ = 1;
  int attached_ = 0;
  std::vector<Node> nodes_;
};

inline Configuration initial_configuration(int sentence_length) {
  return Configuration::initial(sentence_length);
}

inline std::vector<Decision> legal_decisions(const Configuration& c, const TransitionSystem& system) {
  std::vector<Decision> out;
  const LegalMask m = c.legal();
  if (m.shift) out.push_back(Decision::shift());
  if (m.left)
    for (int l = 0; l < system.num_labels(); ++l) out.push_back(Decision::left_arc(l));
  if (m.right)
    for (int l = 0; l < system.num_labels(); ++l) out.push_back(Decision::right_arc(l));
  return out;
}

inline Configuration apply(Configuration c, Decision d) {
  c.apply_in_place(d);
  return c;
}

inline bool is_terminal(const Configuration& c) { return c.is_terminal(); }

// Static oracle. Throws OracleError for multi-root, cyclic, non-projective
// trees or labels outside the system's label set.
inline std::vector<Decision> derive_oracle_sequence(const DepTree& tree, const TransitionSystem& system) {
  if (!is_well_formed(tree)) throw OracleError("tree is not a single-rooted acyclic tree");
  const int n = static_cast<int>(tree.size());
  std::vector<int> gold_labels(static_cast<std::size_t>(n) + 1, -1);
  std::vector<int> pending(static_cast<std::size_t>(n) + 1, 0);
  for (int d = 1; d <= n; ++d) {
    const auto l = system.label_index(tree.at(d).label);
    if (!l) throw OracleError("unknown arc label '" + tree.at(d).label + "'");
    gold_labels[static_cast<std::size_t>(d)] = *l;
    ++pending[static_cast<std::size_t>(tree.at(d).head)];
  }

  std::vector<Decision> out;
  out.reserve(static_cast<std::size_t>(2 * n));
  auto c = Configuration::initial(n);
  while (!c.is_terminal()) {
    Decision next;
    bool found = false;
    if (c.stack_size() >= 2) {
      const int s0 = c.stack_at(0);
      const int s1 = c.stack_at(1);
      if (s1 != 0 && tree.at(s1).head == s0) {
        next = Decision::left_arc(gold_labels[static_cast<std::size_t>(s1)]);
        found = true;
      } else if (tree.at(s0).head == s1 && pending[static_cast<std::size_t>(s0)] == 0) {
        next = Decision::right_arc(gold_labels[static_cast<std::size_t>(s0)]);
        found = true;
      }
    }
    if (!found) {
      if (c.buffer_empty()) throw OracleError("tree is not projective");
      next = Decision::shift();
    }
    if (!c.legal().allows(next)) throw OracleError("tree is not derivable under the single-root constraint");
    if (next.kind != DecisionKind::kShift) {
      const int dep = next.kind == DecisionKind::kLeftArc ? c.stack_at(1) : c.stack_at(0);
      --pending[static_cast<std::size_t>(tree.at(dep).head)];
    }
    c.apply_in_place(next);
    out.push_back(next);
  }
  return out;
}

// Copies forms and tags from `sentence`, heads and labels from the arcs of `c`.
// Unattached tokens (non-terminal c) get head 0.
inline DepTree tree_from_configuration(const Configuration& c, const DepTree& sentence,
                                       const TransitionSystem& system) {
  DepTree out = sentence;
  for (int d = 1; d <= c.sentence_length(); ++d) {
    auto& t = out.at(d);
    t.head = std::max(0, c.head(d));
    t.label = c.label(d) >= 0 ? system.label_name(c.label(d)) : std::string("_");
  }
  return out;
}

inline Configuration replay(const std::vector<Decision>& decisions, int sentence_length) {
  auto c = Configuration::initial(sentence_length);
  for (const auto& d : decisions) c.apply_in_place(d);
  return c;
}

}  // namespace beamparse
