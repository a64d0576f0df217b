#pragma once

// Beam-search decoding under softmax or perceptron scoring, and structured
// perceptron training with early updates over the frozen network's
// activations.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "beamparse/errors.hpp"
#include "beamparse/feature_model.hpp"
#include "beamparse/network.hpp"
#include "beamparse/transition_system.hpp"
#include "beamparse/treebank.hpp"

namespace beamparse {

// Which activation blocks make up phi, always concatenated as h1, h2, P(y).
class PhiComposition {
 public:
  static constexpr unsigned kH1 = 1;
  static constexpr unsigned kH2 = 2;
  static constexpr unsigned kProbs = 4;

  constexpr PhiComposition() = default;
  constexpr explicit PhiComposition(unsigned blocks) : blocks_(blocks) {}

  static PhiComposition all() { return PhiComposition(kH1 | kH2 | kProbs); }

  // Comma-separated subset of {h1, h2, py}.
  static PhiComposition parse(const std::string& text) {
    unsigned blocks = 0;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ',')) {
      if (part == "h1") blocks |= kH1;
      else if (part == "h2") blocks |= kH2;
      else if (part == "py" || part == "p" || part == "P(y)") blocks |= kProbs;
      else throw std::invalid_argument("unknown phi block '" + part + "' (expected h1, h2 or py)");
    }
    if (blocks == 0) throw std::invalid_argument("empty phi composition");
    return PhiComposition(blocks);
  }

  std::string to_string() const {
    std::string out;
    auto add = [&](const char* s) {
      if (!out.empty()) out += ',';
      out += s;
    };
    if (has(kH1)) add("h1");
    if (has(kH2)) add("h2");
    if (has(kProbs)) add("py");
    return out;
  }

  bool has(unsigned block) const { return (blocks_ & block) != 0; }
  unsigned blocks() const { return blocks_; }

  int dimension(const NetworkDims& d) const {
    return (has(kH1) ? d.hidden1 : 0) + (has(kH2) ? d.hidden2 : 0) + (has(kProbs) ? d.num_decisions : 0);
  }

  friend bool operator==(const PhiComposition&, const PhiComposition&) = default;

 private:
  unsigned blocks_ = kH1 | kH2 | kProbs;
};

inline Vector compute_phi(const ForwardTrace& trace, PhiComposition composition) {
  if (composition.has(PhiComposition::kH2) && trace.h2.size() == 0) {
    throw std::invalid_argument("phi composition uses h2 but the network has one hidden layer");
  }
  const auto n1 = composition.has(PhiComposition::kH1) ? trace.h1.size() : 0;
  const auto n2 = composition.has(PhiComposition::kH2) ? trace.h2.size() : 0;
  const auto np = composition.has(PhiComposition::kProbs) ? trace.probs.size() : 0;
  Vector phi(n1 + n2 + np);
  if (n1) phi.head(n1) = trace.h1;
  if (n2) phi.segment(n1, n2) = trace.h2;
  if (np) phi.tail(np) = trace.probs;
  return phi;
}

struct PerceptronModel {
  PhiComposition composition;
  Matrix weights;   // num_decisions x dim, final iterate
  Matrix averaged;  // averaged over training instances
  bool use_averaged = true;

  static PerceptronModel zeros(PhiComposition composition, int num_decisions, int dim) {
    return {composition, Matrix::Zero(num_decisions, dim), Matrix::Zero(num_decisions, dim), true};
  }

  int dim() const { return static_cast<int>(weights.cols()); }
  int num_decisions() const { return static_cast<int>(weights.rows()); }
  const Matrix& decoding_weights() const { return use_averaged ? averaged : weights; }

  friend bool operator==(const PerceptronModel& a, const PerceptronModel& b) {
    return a.composition == b.composition && a.use_averaged == b.use_averaged && a.weights.rows() == b.weights.rows() &&
           a.weights.cols() == b.weights.cols() && a.averaged.rows() == b.averaged.rows() &&
           a.averaged.cols() == b.averaged.cols() && a.weights == b.weights && a.averaged == b.averaged;
  }
};

inline double score_decision(const PerceptronModel& model, const Vector& phi, int decision) {
  if (phi.size() != model.dim()) {
    throw std::invalid_argument("phi has dimension " + std::to_string(phi.size()) + ", model expects " +
                                std::to_string(model.dim()));
  }
  if (decision < 0 || decision >= model.num_decisions()) throw std::out_of_range("decision id out of range");
  return model.decoding_weights().row(decision).dot(phi);
}

// Adds log P(y) per decision.
class SoftmaxScoring {
 public:
  explicit SoftmaxScoring(const NetworkScorer& net) : net_(net) {}

  void operator()(const FeatureIds& f, const LegalMask& legal, Vector& scores) const {
    net_.forward(f, legal, trace_);
    scores = trace_.log_probs;
  }

 private:
  const NetworkScorer& net_;
  mutable ForwardTrace trace_;
};

// Adds v(y) . phi(x, c) per decision.
class PerceptronScoring {
 public:
  PerceptronScoring(const NetworkScorer& net, const Matrix& weights, PhiComposition composition)
      : net_(net), weights_(weights), composition_(composition) {
    if (weights.cols() != composition.dimension(net.params().dims) || weights.rows() != net.num_decisions()) {
      throw std::invalid_argument("perceptron weights do not match network and phi composition");
    }
  }

  void operator()(const FeatureIds& f, const LegalMask& legal, Vector& scores) const {
    net_.forward(f, legal, trace_);
    scores.noalias() = weights_ * compute_phi(trace_, composition_);
  }

 private:
  const NetworkScorer& net_;
  const Matrix& weights_;
  PhiComposition composition_;
  mutable ForwardTrace trace_;
};

struct BeamItem {
  Configuration config;
  double score = 0.0;
  std::vector<int> history;  // decision ids applied so far
  bool gold = false;         // history is a prefix of the gold sequence
};

namespace detail {

struct Candidate {
  double score;
  std::size_t item;
  int decision;
};

// One expansion step: every legal successor of every item, top `width` kept.
// Ties keep insertion order (items in beam order, then ascending decision id).
template <class Scoring>
std::vector<BeamItem> expand_beam(const std::vector<BeamItem>& beam, const SentenceIds& ids,
                                  const TransitionSystem& system, const Scoring& scoring, int width,
                                  const std::vector<int>* gold = nullptr) {
  std::vector<Candidate> cands;
  Vector scores;
  const int labels = system.num_labels();
  for (std::size_t i = 0; i < beam.size(); ++i) {
    const auto& item = beam[i];
    const LegalMask legal = item.config.legal();
    scoring(extract_features(item.config, ids), legal, scores);
    for (int y = 0; y < system.num_decisions(); ++y) {
      if (legal.allows(y, labels)) cands.push_back({item.score + scores[y], i, y});
    }
  }
  std::stable_sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) { return a.score > b.score; });
  if (cands.size() > static_cast<std::size_t>(width)) cands.resize(static_cast<std::size_t>(width));

  std::vector<BeamItem> next;
  next.reserve(cands.size());
  for (const auto& cand : cands) {
    const auto& parent = beam[cand.item];
    BeamItem item{parent.config, cand.score, parent.history, false};
    item.config.apply_in_place(system.decision(cand.decision));
    item.history.push_back(cand.decision);
    if (gold) {
      const auto depth = parent.history.size();
      item.gold = parent.gold && depth < gold->size() && (*gold)[depth] == cand.decision;
    }
    next.push_back(std::move(item));
  }
  return next;
}

}  // namespace detail

// Full beam search; returns the final beam, best first.
template <class Scoring>
std::vector<BeamItem> beam_search(const Scoring& scoring, const TransitionSystem& system, const SentenceIds& ids,
                                  int width) {
  if (width < 1) throw std::invalid_argument("beam width must be at least 1");
  std::vector<BeamItem> beam{{Configuration::initial(ids.size()), 0.0, {}, false}};
  for (int step = 0; step < 2 * ids.size(); ++step) beam = detail::expand_beam(beam, ids, system, scoring, width);
  return beam;
}

template <class Scoring>
DepTree beam_parse(const Scoring& scoring, const TransitionSystem& system, const DepTree& sentence,
                   const Vocabularies& vocabs, int width) {
  const auto beam = beam_search(scoring, system, map_sentence(sentence, vocabs), width);
  return tree_from_configuration(beam.front().config, sentence, system);
}

// Running average of the perceptron weight iterates over training instances.
class AveragedWeights {
 public:
  AveragedWeights(int rows, int cols) : w_(Matrix::Zero(rows, cols)), u_(Matrix::Zero(rows, cols)) {}

  void add(int row, const Vector& phi, double scale) {
    w_.row(row) += scale * phi.transpose();
    u_.row(row) += (scale * static_cast<double>(instances_)) * phi.transpose();
  }

  // Marks the end of one training instance.
  void tick() { ++instances_; }

  const Matrix& weights() const { return w_; }
  std::int64_t instances() const { return instances_; }

  // Mean of the weights after each completed instance.
  Matrix averaged() const {
    if (instances_ == 0) return w_;
    return w_ - u_ / static_cast<double>(instances_);
  }

 private:
  Matrix w_;
  Matrix u_;
  std::int64_t instances_ = 0;
};

enum class UpdateKind { kNone, kEarly, kFull };

struct UpdateRecord {
  UpdateKind kind = UpdateKind::kNone;
  int step = 0;                    // prefix length used by the update
  std::vector<int> gold_prefix;    // decision ids
  std::vector<int> predicted_prefix;
  std::vector<char> gold_in_beam;  // per depth 1..steps run
};

class PerceptronTrainer {
 public:
  PerceptronTrainer(const NetworkScorer& net, const TransitionSystem& system, PhiComposition composition)
      : net_(net),
        system_(system),
        composition_(composition),
        weights_(net.num_decisions(), composition.dimension(net.params().dims)) {
    if (composition.has(PhiComposition::kH2) && !net.params().has_second_layer()) {
      throw std::invalid_argument("phi composition uses h2 but the network has one hidden layer");
    }
  }

  // Beam search with early update on one sentence; `gold` is its oracle
  // sequence as decision ids.
  UpdateRecord train_sentence(const SentenceIds& ids, const std::vector<int>& gold, int width) {
    const PerceptronScoring scoring(net_, weights_.weights(), composition_);
    UpdateRecord rec;
    std::vector<BeamItem> beam{{Configuration::initial(ids.size()), 0.0, {}, true}};
    for (std::size_t depth = 1; depth <= gold.size(); ++depth) {
      beam = detail::expand_beam(beam, ids, system_, scoring, width, &gold);
      const bool survived = std::any_of(beam.begin(), beam.end(), [](const BeamItem& b) { return b.gold; });
      rec.gold_in_beam.push_back(survived ? 1 : 0);
      if (!survived) {
        rec.kind = UpdateKind::kEarly;
        rec.step = static_cast<int>(depth);
        break;
      }
    }
    if (rec.kind == UpdateKind::kNone && !beam.front().gold) {
      rec.kind = UpdateKind::kFull;
      rec.step = static_cast<int>(gold.size());
    }
    if (rec.kind != UpdateKind::kNone) {
      rec.gold_prefix.assign(gold.begin(), gold.begin() + rec.step);
      rec.predicted_prefix = beam.front().history;
      apply_update(ids, rec.gold_prefix, +1.0);
      apply_update(ids, rec.predicted_prefix, -1.0);
    }
    weights_.tick();
    return rec;
  }

  // Sum over the prefix of phi at each configuration paired with the decision taken there.
  void apply_update(const SentenceIds& ids, const std::vector<int>& prefix, double scale) {
    auto c = Configuration::initial(ids.size());
    ForwardTrace trace;
    for (int y : prefix) {
      net_.forward(extract_features(c, ids), c.legal(), trace);
      weights_.add(y, compute_phi(trace, composition_), scale);
      c.apply_in_place(system_.decision(y));
    }
  }

  const AveragedWeights& weights() const { return weights_; }

  PerceptronModel model(bool averaged = true) const {
    return {composition_, weights_.weights(), weights_.averaged(), averaged};
  }

 private:
  const NetworkScorer& net_;
  const TransitionSystem& system_;
  PhiComposition composition_;
  AveragedWeights weights_;
};

struct PerceptronConfig {
  int beam = 8;
  int epochs = 10;
  PhiComposition composition = PhiComposition::all();
  bool averaged = true;
  std::uint64_t seed = 1;
};

struct PerceptronEpochRecord {
  int epoch = 0;
  std::size_t sentences = 0;
  std::size_t early_updates = 0;
  std::size_t full_updates = 0;
  double dev_uas = 0.0;

  double early_update_rate() const {
    return sentences == 0 ? 0.0 : static_cast<double>(early_updates) / static_cast<double>(sentences);
  }
};

struct PerceptronTrainingResult {
  PerceptronModel model;
  std::vector<PerceptronEpochRecord> epochs;
  std::size_t skipped_sentences = 0;
  int best_epoch = 0;
};

inline std::vector<DepTree> beam_parse_all(const NetworkScorer& net, const PerceptronModel* perceptron,
                                           const TransitionSystem& system, const std::vector<DepTree>& sentences,
                                           const Vocabularies& vocabs, int width) {
  std::vector<DepTree> out;
  out.reserve(sentences.size());
  if (perceptron) {
    const PerceptronScoring scoring(net, perceptron->decoding_weights(), perceptron->composition);
    for (const auto& s : sentences) out.push_back(beam_parse(scoring, system, s, vocabs, width));
  } else {
    const SoftmaxScoring scoring(net);
    for (const auto& s : sentences) out.push_back(beam_parse(scoring, system, s, vocabs, width));
  }
  return out;
}

// Sentences are visited in a seeded shuffled order each epoch. With a dev set,
// the model from the epoch with the best dev UAS is returned; otherwise the
// last. `network` is never modified.
inline PerceptronTrainingResult train_perceptron(const NetworkParams& network, const Vocabularies& vocabs,
                                                 const std::vector<DepTree>& train, const std::vector<DepTree>& dev,
                                                 const PerceptronConfig& config, std::ostream* log = nullptr) {
  if (config.beam < 1) throw std::invalid_argument("beam width must be at least 1");
  const auto system = vocabs.transition_system();
  const NetworkScorer net(network);
  PerceptronTrainer trainer(net, system, config.composition);
  PerceptronTrainingResult result;
  result.model = trainer.model(config.averaged);

  std::vector<SentenceIds> ids;
  std::vector<std::vector<int>> golds;
  for (const auto& tree : train) {
    std::vector<Decision> seq;
    try {
      seq = derive_oracle_sequence(tree, system);
    } catch (const OracleError&) {
      ++result.skipped_sentences;
      continue;
    }
    std::vector<int> gold;
    gold.reserve(seq.size());
    for (const auto& d : seq) gold.push_back(system.id(d));
    ids.push_back(map_sentence(tree, vocabs));
    golds.push_back(std::move(gold));
  }
  if (log) {
    *log << "perceptron beam=" << config.beam << " epochs=" << config.epochs
         << " phi=" << config.composition.to_string() << " dim=" << config.composition.dimension(network.dims)
         << " averaged=" << (config.averaged ? 1 : 0) << " sentences=" << ids.size()
         << " skipped_nonprojective=" << result.skipped_sentences << '\n';
  }

  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  double best_uas = -1.0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    PerceptronEpochRecord rec;
    rec.epoch = epoch;
    for (auto i : order) {
      const auto upd = trainer.train_sentence(ids[i], golds[i], config.beam);
      ++rec.sentences;
      if (upd.kind == UpdateKind::kEarly) ++rec.early_updates;
      if (upd.kind == UpdateKind::kFull) ++rec.full_updates;
    }
    auto model = trainer.model(config.averaged);
    if (!dev.empty()) {
      rec.dev_uas = evaluate(dev, beam_parse_all(net, &model, system, dev, vocabs, config.beam), true).uas;
      if (rec.dev_uas > best_uas) {
        best_uas = rec.dev_uas;
        result.best_epoch = epoch;
        result.model = std::move(model);
      }
    } else {
      result.best_epoch = epoch;
      result.model = std::move(model);
    }
    if (log) {
      *log << "perceptron_epoch=" << epoch << " early_update_rate=" << rec.early_update_rate()
           << " early_updates=" << rec.early_updates << " full_updates=" << rec.full_updates
           << " dev_uas=" << rec.dev_uas << '\n';
    }
    result.epochs.push_back(rec);
  }
  return result;
}

}  // namespace beamparse
