#pragma once

// Backpropagation pretraining: mini-batched averaged SGD with momentum and
// step-wise learning-rate decay, plus greedy decoding for held-out scoring.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "beamparse/errors.hpp"
#include "beamparse/feature_model.hpp"
#include "beamparse/network.hpp"
#include "beamparse/transition_system.hpp"
#include "beamparse/treebank.hpp"

namespace beamparse {

struct TrainerConfig {
  double eta0 = 0.05;
  double mu = 0.9;
  double gamma = 0.2;   // fraction of an epoch between learning-rate decays
  double decay = 0.96;
  double lambda = 1e-4;
  int batch = 32;
  std::uint64_t seed = 1;
  int patience = 10;
  int max_epochs = 200;
  double max_seconds = 0.0;  // wall-clock cap, 0 = none

  // Averaging weight alpha_t = clamp(1 - 1/(averaging_rate * t + 1/(1 - alpha_min)), alpha_min, alpha_max)
  // where t counts completed updates, so the first update uses alpha_min.
  double alpha_min = 0.1;
  double alpha_max = 0.9999;
  double averaging_rate = 0.9;

  int word_dim = 64;
  int tag_dim = 32;
  int label_dim = 32;
  int hidden1 = 200;
  int hidden2 = 200;
  std::size_t min_count = 2;
  InitOptions init;
};

inline double averaging_weight(const TrainerConfig& c, std::int64_t completed_updates) {
  const double a = 1.0 - 1.0 / (c.averaging_rate * static_cast<double>(completed_updates) + 1.0 / (1.0 - c.alpha_min));
  return std::clamp(a, c.alpha_min, c.alpha_max);
}

struct TrainerState {
  TrainerConfig config;
  NetworkParams momentum;
  NetworkParams average;
  std::int64_t step = 0;
  double eta = 0.0;
  std::int64_t decay_interval = 1;  // updates between learning-rate decays

  TrainerState(const TrainerConfig& c, const NetworkParams& initial, std::int64_t updates_per_epoch)
      : config(c),
        momentum(NetworkParams::zeros(initial.dims)),
        average(initial),
        eta(c.eta0),
        decay_interval(std::max<std::int64_t>(
            1, std::llround(c.gamma * static_cast<double>(std::max<std::int64_t>(1, updates_per_epoch))))) {}
};

// g <- mu g - grad; theta <- theta + eta g; decay eta every decay_interval
// updates; then fold theta into the running average.
inline void sgd_step(TrainerState& state, NetworkParams& params, const NetworkParams& gradient) {
  NetworkParams::zip_blocks(
      [](const char* name, const auto& g) {
        if (!g.allFinite()) throw NumericError(std::string("non-finite gradient in ") + name);
      },
      gradient);
  const double mu = state.config.mu;
  const double eta = state.eta;
  NetworkParams::zip_blocks(
      [&](const char*, auto& theta, auto& g, const auto& grad) {
        g = mu * g - grad;
        theta += eta * g;
      },
      params, state.momentum, gradient);
  const double alpha = averaging_weight(state.config, state.step);
  ++state.step;
  if (state.step % state.decay_interval == 0) state.eta *= state.config.decay;
  NetworkParams::zip_blocks(
      [&](const char* name, auto& avg, const auto& theta) {
        if (!theta.allFinite()) throw NumericError(std::string("non-finite parameters in ") + name);
        avg = alpha * avg + (1.0 - alpha) * theta;
      },
      state.average, params);
}

// (configuration, gold decision) pairs from oracle replay. Sentences the
// oracle cannot derive are counted in `skipped`.
inline std::vector<TrainingExample> build_training_examples(const std::vector<DepTree>& trees,
                                                            const Vocabularies& vocabs,
                                                            const TransitionSystem& system,
                                                            std::size_t* skipped = nullptr) {
  std::vector<TrainingExample> out;
  std::size_t bad = 0;
  for (const auto& tree : trees) {
    std::vector<Decision> gold;
    try {
      gold = derive_oracle_sequence(tree, system);
    } catch (const OracleError&) {
      ++bad;
      continue;
    }
    const auto ids = map_sentence(tree, vocabs);
    auto c = Configuration::initial(static_cast<int>(tree.size()));
    for (const auto& d : gold) {
      out.push_back({extract_features(c, ids), c.legal(), system.id(d)});
      c.apply_in_place(d);
    }
  }
  if (skipped) *skipped = bad;
  return out;
}

// Follows the most probable legal decision; ties go to the lowest id.
inline DepTree greedy_parse(const NetworkScorer& scorer, const TransitionSystem& system, const DepTree& sentence,
                            const Vocabularies& vocabs) {
  const auto ids = map_sentence(sentence, vocabs);
  auto c = Configuration::initial(static_cast<int>(sentence.size()));
  ForwardTrace trace;
  while (!c.is_terminal()) {
    scorer.forward(extract_features(c, ids), c.legal(), trace);
    int best = -1;
    for (int y = 0; y < scorer.num_decisions(); ++y) {
      if (!trace.legal[static_cast<std::size_t>(y)]) continue;
      if (best < 0 || trace.log_probs[y] > trace.log_probs[best]) best = y;
    }
    c.apply_in_place(system.decision(best));
  }
  return tree_from_configuration(c, sentence, system);
}

inline std::vector<DepTree> greedy_parse_all(const NetworkParams& params, const TransitionSystem& system,
                                             const std::vector<DepTree>& sentences, const Vocabularies& vocabs) {
  NetworkScorer scorer(params);
  std::vector<DepTree> out;
  out.reserve(sentences.size());
  for (const auto& s : sentences) out.push_back(greedy_parse(scorer, system, s, vocabs));
  return out;
}

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;
  double dev_uas = 0.0;
  double dev_las = 0.0;
  double eta = 0.0;
  double seconds = 0.0;
};

struct GreedyTrainingResult {
  NetworkParams params;  // averaged parameters from the best held-out epoch
  std::vector<EpochRecord> epochs;
  std::size_t examples = 0;
  std::size_t skipped_sentences = 0;
  int best_epoch = 0;
  double best_dev_uas = 0.0;
};

inline void log_config(std::ostream& log, const TrainerConfig& c) {
  log << "config eta0=" << c.eta0 << " mu=" << c.mu << " gamma=" << c.gamma << " lambda=" << c.lambda
      << " batch=" << c.batch << " seed=" << c.seed << " patience=" << c.patience << " max_epochs=" << c.max_epochs
      << " word_dim=" << c.word_dim << " tag_dim=" << c.tag_dim << " label_dim=" << c.label_dim
      << " hidden1=" << c.hidden1 << " hidden2=" << c.hidden2 << " min_count=" << c.min_count << '\n';
}

// Trains on oracle decisions of `train`, scoring greedy UAS on `dev` (or on
// `train` when dev is empty) after each epoch and stopping after `patience`
// epochs without improvement.
inline GreedyTrainingResult train_greedy(const std::vector<DepTree>& train, const std::vector<DepTree>& dev,
                                         const Vocabularies& vocabs, const TrainerConfig& config,
                                         const Embeddings* pretrained = nullptr, std::ostream* log = nullptr) {
  if (train.empty()) throw DataError("training treebank is empty");
  if (config.batch < 1) throw std::invalid_argument("batch size must be positive");
  const auto system = vocabs.transition_system();
  GreedyTrainingResult result;
  auto examples = build_training_examples(train, vocabs, system, &result.skipped_sentences);
  if (examples.empty()) throw DataError("no training sentence is derivable (all non-projective?)");
  result.examples = examples.size();
  if (log) {
    log_config(*log, config);
    *log << "data sentences=" << train.size() << " skipped_nonprojective=" << result.skipped_sentences
         << " examples=" << examples.size() << '\n';
  }

  std::mt19937_64 rng(config.seed);
  const auto dims = make_dims(vocabs, config.word_dim, config.tag_dim, config.label_dim, config.hidden1, config.hidden2);
  int copied = 0;
  auto params = init_params(dims, vocabs.word, rng, pretrained, config.init, &copied);
  if (log && pretrained) *log << "pretrained_rows=" << copied << '\n';

  const auto batch_size = static_cast<std::size_t>(config.batch);
  const auto updates_per_epoch = static_cast<std::int64_t>((examples.size() + batch_size - 1) / batch_size);
  TrainerState state(config, params, updates_per_epoch);
  result.params = state.average;

  const auto& heldout = dev.empty() ? train : dev;
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<TrainingExample> batch;
  batch.reserve(batch_size);
  const auto start = std::chrono::steady_clock::now();
  int since_best = 0;
  result.best_dev_uas = -1.0;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += batch_size) {
      const std::size_t end = std::min(order.size(), begin + batch_size);
      batch.clear();
      for (std::size_t i = begin; i < end; ++i) batch.push_back(examples[order[i]]);
      auto lg = loss_and_gradient(params, batch, config.lambda);
      loss_sum += lg.data_loss * static_cast<double>(batch.size());
      sgd_step(state, params, lg.gradient);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = loss_sum / static_cast<double>(examples.size());
    rec.eta = state.eta;
    const auto report = evaluate(heldout, greedy_parse_all(state.average, system, heldout, vocabs), true);
    rec.dev_uas = report.uas;
    rec.dev_las = report.las;
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.epochs.push_back(rec);
    if (log) {
      *log << "epoch=" << epoch << " loss=" << rec.loss << " dev_uas=" << rec.dev_uas << " dev_las=" << rec.dev_las
           << " eta=" << rec.eta << '\n';
    }

    if (rec.dev_uas > result.best_dev_uas) {
      result.best_dev_uas = rec.dev_uas;
      result.best_epoch = epoch;
      result.params = state.average;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
    if (config.max_seconds > 0.0 && rec.seconds >= config.max_seconds) break;
  }
  if (log) *log << "best_epoch=" << result.best_epoch << " best_dev_uas=" << result.best_dev_uas << '\n';
  return result;
}

}  // namespace beamparse
