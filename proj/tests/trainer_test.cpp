#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "beamparse/trainer.hpp"
#include "support/synthetic.hpp"
#include "support/toy_network.hpp"

namespace beamparse {
namespace {

NetworkParams filled(const NetworkDims& d, double value) {
  auto p = NetworkParams::zeros(d);
  NetworkParams::zip_blocks([&](const char*, auto& m) { m.setConstant(value); }, p);
  return p;
}

TEST(AveragingWeight, Schedule) {
  TrainerConfig c;
  EXPECT_NEAR(averaging_weight(c, 0), 0.1, 1e-15);
  EXPECT_NEAR(averaging_weight(c, 1), 1.0 - 1.0 / (0.9 + 10.0 / 9.0), 1e-15);
  EXPECT_EQ(averaging_weight(c, 1'000'000'000), 0.9999);
  for (int t = 1; t < 1000; ++t) EXPECT_GE(averaging_weight(c, t), averaging_weight(c, t - 1));
}

TEST(SgdStep, PlainStepWithoutMomentum) {
  TrainerConfig c;
  c.mu = 0.0;
  c.eta0 = 1.0;
  const auto d = testing::toy_dims();
  auto theta = NetworkParams::zeros(d);
  TrainerState s(c, theta, 100);
  sgd_step(s, theta, filled(d, 2.0));
  EXPECT_TRUE((theta.hidden1_weights.array() == -2.0).all());
  EXPECT_TRUE((theta.word_embeddings.array() == -2.0).all());
  EXPECT_TRUE((theta.softmax_bias.array() == -2.0).all());
}

TEST(SgdStep, MomentumDecaysGeometricallyUnderZeroGradient) {
  TrainerConfig c;
  c.mu = 0.9;
  c.eta0 = 1.0;
  c.decay = 1.0;
  const auto d = testing::toy_dims();
  auto theta = NetworkParams::zeros(d);
  TrainerState s(c, theta, 100);
  sgd_step(s, theta, filled(d, 1.0));
  const auto zero = NetworkParams::zeros(d);
  double expected_theta = -1.0;
  for (int k = 1; k <= 10; ++k) {
    sgd_step(s, theta, zero);
    EXPECT_NEAR(s.momentum.hidden2_bias[0], -std::pow(0.9, k), 1e-14);
    expected_theta -= std::pow(0.9, k);
    EXPECT_NEAR(theta.hidden2_bias[0], expected_theta, 1e-13);
  }
}

TEST(SgdStep, LearningRateDecaysEveryInterval) {
  TrainerConfig c;
  c.gamma = 0.2;
  const auto d = testing::toy_dims();
  auto theta = NetworkParams::zeros(d);
  TrainerState s(c, theta, 50);
  EXPECT_EQ(s.decay_interval, 10);
  const auto zero = NetworkParams::zeros(d);
  for (int k = 1; k <= 35; ++k) {
    sgd_step(s, theta, zero);
    EXPECT_NEAR(s.eta, 0.05 * std::pow(0.96, k / 10), 1e-15);
  }
  EXPECT_EQ(TrainerState(c, theta, 1).decay_interval, 1);
}

TEST(SgdStep, AverageMatchesRecurrence) {
  TrainerConfig c;
  c.mu = 0.5;
  c.eta0 = 0.3;
  const auto d = testing::toy_dims();
  auto theta = NetworkParams::zeros(d);
  TrainerState s(c, theta, 7);
  std::mt19937_64 rng(1);
  double avg = 0.0;
  for (int t = 0; t < 40; ++t) {
    const auto grad = testing::random_params(d, rng);
    sgd_step(s, theta, grad);
    const double a = averaging_weight(c, t);
    avg = a * avg + (1.0 - a) * theta.hidden1_weights(3, 5);
    EXPECT_NEAR(s.average.hidden1_weights(3, 5), avg, 1e-12);
  }
  EXPECT_FALSE(s.average == theta);
}

TEST(SgdStep, NonFiniteGradientThrows) {
  const auto d = testing::toy_dims();
  auto theta = NetworkParams::zeros(d);
  TrainerState s(TrainerConfig{}, theta, 10);
  auto grad = NetworkParams::zeros(d);
  grad.tag_embeddings(1, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(sgd_step(s, theta, grad), NumericError);
  grad.tag_embeddings(1, 1) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(sgd_step(s, theta, grad), NumericError);
}

TEST(BuildTrainingExamples, TwoPerTokenAndSkipsNonProjective) {
  std::mt19937_64 rng(2);
  auto corpus = testing::SyntheticGrammar().corpus(rng, 30);
  const auto v = build_vocabularies(corpus, 1);
  std::size_t tokens = token_count(corpus);
  auto crossing = testing::make_tree({3, 0, 2}, {"arg", "root", "mod"});
  corpus.push_back(crossing);
  std::size_t skipped = 0;
  const auto ex = build_training_examples(corpus, v, v.transition_system(), &skipped);
  EXPECT_EQ(skipped, 1u);
  EXPECT_EQ(ex.size(), 2 * tokens);
  for (const auto& e : ex) EXPECT_TRUE(e.legal.allows(e.gold, v.transition_system().num_labels()));
}

TEST(GreedyParse, ProducesWellFormedTreesForAllLengths) {
  std::mt19937_64 rng(3);
  const auto corpus = testing::SyntheticGrammar().corpus(rng, 50);
  const auto v = build_vocabularies(corpus, 1);
  const auto dims = make_dims(v, 4, 4, 4, 8, 8);
  const auto sys = v.transition_system();
  for (int trial = 0; trial < 3; ++trial) {
    const auto p = testing::random_params(dims, rng, 1.0);
    NetworkScorer scorer(p);
    for (int n = 1; n <= 40; ++n) {
      const auto tree = testing::random_projective_tree(rng, n, {"arg", "mod"});
      const auto out = greedy_parse(scorer, sys, tree, v);
      ASSERT_EQ(out.size(), tree.size());
      ASSERT_TRUE(is_well_formed(out));
      for (std::size_t i = 0; i < out.size(); ++i) ASSERT_EQ(out.tokens[i].form, tree.tokens[i].form);
    }
  }
}

TrainerConfig small_config() {
  TrainerConfig c;
  c.word_dim = 8;
  c.tag_dim = 4;
  c.label_dim = 4;
  c.hidden1 = 24;
  c.hidden2 = 16;
  c.min_count = 1;
  c.max_epochs = 5;
  c.patience = 100;
  c.batch = 16;
  c.init.weight_variance = 0.01;
  return c;
}

TEST(TrainGreedy, DeterministicAndLossDecreases) {
  std::mt19937_64 rng(4);
  const auto train = testing::SyntheticGrammar().corpus(rng, 60);
  const auto dev = testing::SyntheticGrammar().corpus(rng, 20);
  const auto v = build_vocabularies(train, 1);
  const auto c = small_config();
  std::ostringstream log;
  const auto a = train_greedy(train, dev, v, c, nullptr, &log);
  const auto b = train_greedy(train, dev, v, c);
  EXPECT_TRUE(a.params == b.params);
  ASSERT_EQ(a.epochs.size(), 5u);
  EXPECT_LT(a.epochs[4].loss, a.epochs[0].loss);
  for (std::size_t i = 0; i < a.epochs.size(); ++i) EXPECT_EQ(a.epochs[i].loss, b.epochs[i].loss);
  EXPECT_TRUE(all_finite(a.params));

  auto other = c;
  other.seed = 99;
  EXPECT_FALSE(train_greedy(train, dev, v, other).params == a.params);
}

TEST(TrainGreedy, LogEchoesHyperparameters) {
  std::mt19937_64 rng(5);
  const auto train = testing::SyntheticGrammar().corpus(rng, 20);
  const auto v = build_vocabularies(train, 1);
  auto c = small_config();
  c.max_epochs = 1;
  c.eta0 = 0.07;
  c.batch = 9;
  std::ostringstream log;
  train_greedy(train, {}, v, c, nullptr, &log);
  const auto text = log.str();
  for (const char* key : {"eta0=0.07", "mu=0.9", "gamma=0.2", "lambda=0.0001", "batch=9", "seed=1", "hidden1=24",
                          "hidden2=16", "epoch=1 ", "best_epoch=1"})
    EXPECT_NE(text.find(key), std::string::npos) << key;
}

TEST(TrainGreedy, PatienceStopsEarly) {
  std::mt19937_64 rng(6);
  const auto train = testing::SyntheticGrammar().corpus(rng, 20);
  const auto v = build_vocabularies(train, 1);
  auto c = small_config();
  c.eta0 = 0.0;  // no learning, so no epoch improves on the first
  c.max_epochs = 50;
  c.patience = 3;
  const auto r = train_greedy(train, {}, v, c);
  EXPECT_EQ(r.epochs.size(), 4u);
  EXPECT_EQ(r.best_epoch, 1);
}

TEST(TrainGreedy, Errors) {
  std::mt19937_64 rng(7);
  const auto train = testing::SyntheticGrammar().corpus(rng, 5);
  const auto v = build_vocabularies(train, 1);
  EXPECT_THROW(train_greedy({}, {}, v, small_config()), DataError);
  EXPECT_THROW(train_greedy({testing::make_tree({3, 0, 2}, {"arg", "root", "mod"})}, {}, v, small_config()),
               DataError);
}

}  // namespace
}  // namespace beamparse
