#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "beamparse/model_io.hpp"
#include "beamparse/trainer.hpp"
#include "support/cli.hpp"
#include "support/synthetic.hpp"

#ifndef BEAMPARSE_CLI
#error "BEAMPARSE_CLI must name the command-line binary"
#endif

namespace beamparse {
namespace {

using testing::CliSandbox;

constexpr const char* kSmallNet =
    " --word-dim 8 --tag-dim 4 --label-dim 4 --hidden1 24 --hidden2 16 --min-count 1 --epochs 3 --batch 16";

std::vector<DepTree> corpus(std::uint64_t seed, int n) {
  std::mt19937_64 rng(seed);
  return testing::SyntheticGrammar().corpus(rng, n);
}

DepTree tagged(std::vector<int> heads, std::vector<std::string> tags) {
  auto t = testing::make_tree(heads);
  for (std::size_t i = 0; i < tags.size(); ++i) t.tokens[i].pos = tags[i];
  return t;
}

TEST(Cli, UsageErrorsExitTwo) {
  CliSandbox box(BEAMPARSE_CLI, "usage");
  EXPECT_EQ(box.run("").status, 2);
  EXPECT_EQ(box.run("train").status, 2);
  EXPECT_NE(box.run("train").err.find("--train"), std::string::npos);
  EXPECT_EQ(box.run("parse --model m --input x --bogus").status, 2);
  EXPECT_EQ(box.run("frobnicate").status, 2);
  EXPECT_EQ(box.run("--help").status, 0);
}

TEST(Cli, DataErrorsExitOne) {
  CliSandbox box(BEAMPARSE_CLI, "data_errors");
  EXPECT_EQ(box.run("eval --gold missing.conll --pred missing.conll").status, 1);
  box.write_text("bad.conll", "1\tHe\t_\tPRP\tPRP\t_\t2\tnsubj\t_\t_\n2\teats\t_\tVB\tVB\t_\tX\troot\t_\t_\n");
  const auto r = box.run("eval --gold bad.conll --pred bad.conll");
  EXPECT_EQ(r.status, 1);
  EXPECT_NE(r.err.find("line 2"), std::string::npos);
  box.write_text("model", "garbage\n");
  box.write("in.conll", corpus(1, 2));
  EXPECT_EQ(box.run("parse --model model --input in.conll").status, 1);
}

TEST(Cli, EvalScores) {
  CliSandbox box(BEAMPARSE_CLI, "eval");
  const auto gold = tagged({2, 0, 2, 3}, {"NN", "VB", "NN", "JJ"});
  auto one_wrong = gold;
  one_wrong.tokens[3].head = 2;
  auto punct_gold = tagged({2, 0, 2, 2}, {"NN", "VB", "NN", "."});
  auto punct_pred = punct_gold;
  punct_pred.tokens[3].head = 1;
  box.write("gold.conll", {gold});
  box.write("wrong.conll", {one_wrong});
  box.write("pgold.conll", {punct_gold});
  box.write("ppred.conll", {punct_pred});
  EXPECT_EQ(box.run("eval --gold gold.conll --pred gold.conll").out, "UAS 100.00 LAS 100.00 scored 4/4\n");
  EXPECT_EQ(box.run("eval --gold gold.conll --pred wrong.conll").out, "UAS 75.00 LAS 75.00 scored 4/4\n");
  EXPECT_EQ(box.run("eval --gold pgold.conll --pred ppred.conll").out, "UAS 100.00 LAS 100.00 scored 3/4\n");
  EXPECT_EQ(box.run("eval --gold pgold.conll --pred ppred.conll --include-punct").out,
            "UAS 75.00 LAS 75.00 scored 4/4\n");
}

class CliPipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    box_ = new CliSandbox(BEAMPARSE_CLI, "pipeline");
    box_->write("train.conll", corpus(2, 60));
    box_->write("dev.conll", corpus(3, 15));
    const auto r = box_->run(std::string("train --train train.conll --dev dev.conll --model net.model") + kSmallNet);
    ASSERT_EQ(r.status, 0) << r.err;
  }
  static void TearDownTestSuite() {
    delete box_;
    box_ = nullptr;
  }
  static CliSandbox* box_;
};

CliSandbox* CliPipeline::box_ = nullptr;

TEST_F(CliPipeline, TrainLogsConfigAndWritesModel) {
  const auto r = box_->run(std::string("train --train train.conll --model again.model --seed 4") + kSmallNet);
  ASSERT_EQ(r.status, 0);
  EXPECT_NE(r.err.find("hidden1=24"), std::string::npos);
  EXPECT_NE(r.err.find("seed=4"), std::string::npos);
  EXPECT_NE(r.err.find("epoch=3 "), std::string::npos);
  const auto model = load_model_file(box_->path("again.model"));
  EXPECT_EQ(model.network.dims.hidden2, 16);
  EXPECT_FALSE(model.perceptron.has_value());
}

TEST_F(CliPipeline, ConfigFileAndFlagPrecedence) {
  box_->write_text("small.conf", "hidden=20,10\nword_dim=6\nmax_epochs=1\nmin_count=1\ntag_dim=2\nlabel_dim=2\n");
  const auto r = box_->run("train --train train.conll --config small.conf --hidden2 12 --model conf.model");
  ASSERT_EQ(r.status, 0) << r.err;
  const auto d = load_model_file(box_->path("conf.model")).network.dims;
  EXPECT_EQ(d.hidden1, 20);
  EXPECT_EQ(d.hidden2, 12);
  EXPECT_EQ(d.word_dim, 6);
}

TEST_F(CliPipeline, ParseKeepsOrderAcrossThreadCounts) {
  auto input = testing::strip_parses(corpus(4, 41));
  box_->write("raw.conll", input);
  const auto one = box_->run("parse --model net.model --input raw.conll --output one.conll --threads 1");
  const auto four = box_->run("parse --model net.model --input raw.conll --output four.conll --threads 4");
  ASSERT_EQ(one.status, 0) << one.err;
  ASSERT_EQ(four.status, 0) << four.err;
  EXPECT_EQ(box_->read("one.conll"), box_->read("four.conll"));
  const auto env = box_->run("parse --model net.model --input raw.conll", "BEAMPARSE_THREADS=3");
  EXPECT_EQ(env.out, box_->read("one.conll"));
  EXPECT_NE(env.err.find("threads=3"), std::string::npos);
  EXPECT_NE(env.err.find("sentences_per_second="), std::string::npos);

  std::istringstream in(box_->read("one.conll"));
  const auto parsed = read_conll(in);
  ASSERT_EQ(parsed.size(), input.size());
  for (std::size_t i = 0; i < parsed.size(); ++i) {
    ASSERT_EQ(parsed[i].size(), input[i].size());
    EXPECT_TRUE(is_well_formed(parsed[i]));
    for (std::size_t k = 0; k < parsed[i].size(); ++k) EXPECT_EQ(parsed[i].tokens[k].form, input[i].tokens[k].form);
  }
}

TEST_F(CliPipeline, BeamOneSoftmaxMatchesLibraryGreedy) {
  const auto input = testing::strip_parses(corpus(5, 20));
  box_->write("raw5.conll", input);
  const auto r = box_->run("parse --model net.model --input raw5.conll --beam 1 --scorer softmax");
  ASSERT_EQ(r.status, 0);
  const auto model = load_model_file(box_->path("net.model"));
  std::ostringstream expected;
  write_conll(greedy_parse_all(model.network, model.transition_system(), input, model.vocabs), expected);
  EXPECT_EQ(r.out, expected.str());
}

TEST_F(CliPipeline, PerceptronScorerNeedsPerceptronSection) {
  box_->write("raw6.conll", testing::strip_parses(corpus(6, 3)));
  const auto r = box_->run("parse --model net.model --input raw6.conll --scorer perceptron");
  EXPECT_EQ(r.status, 1);
  EXPECT_NE(r.err.find("perceptron"), std::string::npos);
  EXPECT_EQ(box_->run("parse --model net.model --input raw6.conll --scorer magic").status, 2);
  EXPECT_EQ(box_->run("parse --model net.model --input raw6.conll --beam 0").status, 2);
}

TEST_F(CliPipeline, TrainPerceptronLeavesInputModelAlone) {
  const auto before = box_->read("net.model");
  const auto r = box_->run(
      "train-perceptron --model net.model --train train.conll --dev dev.conll --out full.model --epochs 2 --beam 4");
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_EQ(box_->read("net.model"), before);
  EXPECT_NE(r.err.find("early_update_rate="), std::string::npos);
  const auto full = load_model_file(box_->path("full.model"));
  ASSERT_TRUE(full.perceptron.has_value());
  EXPECT_EQ(full.perceptron->composition, PhiComposition::all());
  EXPECT_TRUE(full.network == load_model_file(box_->path("net.model")).network);

  box_->write("raw7.conll", testing::strip_parses(corpus(7, 5)));
  const auto parsed = box_->run("parse --model full.model --input raw7.conll");
  ASSERT_EQ(parsed.status, 0);
  EXPECT_NE(parsed.err.find("scorer=perceptron"), std::string::npos);
  EXPECT_EQ(box_->run("train-perceptron --model net.model --train train.conll --out x.model --phi h5").status, 2);
}

TEST(Cli, FilterAgree) {
  CliSandbox box(BEAMPARSE_CLI, "filter");
  const auto a = corpus(8, 200);
  auto b = a;
  for (std::size_t i = 0; i < b.size(); i += 3) b[i].tokens[0].label = "changed";
  box.write("a.conll", a);
  box.write("b.conll", b);

  const auto same = box.run("filter-agree --a a.conll --b a.conll --out same.conll");
  ASSERT_EQ(same.status, 0);
  EXPECT_EQ(box.read("same.conll"), box.read("a.conll"));
  EXPECT_NE(same.err.find("agreement_rate=1\n"), std::string::npos);

  ASSERT_EQ(box.run("filter-agree --a a.conll --b b.conll --out lab.conll --stats lab.stats").status, 0);
  std::istringstream lab(box.read("lab.conll"));
  const auto kept = read_conll(lab);
  EXPECT_EQ(kept.size(), 200u - 67u);
  const auto stats = box.read("lab.stats");
  EXPECT_NE(stats.find("kept_sentences=" + std::to_string(kept.size()) + "\n"), std::string::npos);
  EXPECT_NE(stats.find("kept_tokens=" + std::to_string(token_count(kept)) + "\n"), std::string::npos);

  ASSERT_EQ(box.run("filter-agree --a a.conll --b b.conll --mode unlabeled --budget 1000 --out budget.conll").status, 0);
  std::istringstream budget(box.read("budget.conll"));
  const auto within = read_conll(budget);
  EXPECT_LE(token_count(within), 1000u);
  EXPECT_GT(token_count(within) + a[within.size()].size(), 1000u);

  box.write("ref.conll", corpus(9, 50));
  EXPECT_EQ(box.run("filter-agree --a a.conll --b a.conll --match-lengths --reference ref.conll --budget 500").status,
            0);
  EXPECT_EQ(box.run("filter-agree --a a.conll --b a.conll --match-lengths").status, 2);
  EXPECT_EQ(box.run("filter-agree --a a.conll --b a.conll --mode fuzzy").status, 2);
  box.write("short.conll", {a.begin(), a.end() - 1});
  EXPECT_EQ(box.run("filter-agree --a a.conll --b short.conll").status, 1);
}

TEST(Cli, Vocab) {
  CliSandbox box(BEAMPARSE_CLI, "vocab");
  box.write("t.conll", {testing::make_tree({2, 0}), testing::make_tree({0, 1, 1})});
  const auto r = box.run("vocab --train t.conll --min-count 2");
  ASSERT_EQ(r.status, 0);
  EXPECT_NE(r.out.find("vocab word 5\n0\t<ROOT>\n1\t<NULL>\n2\t<UNK>\n3\tw1\n4\tw2\n"), std::string::npos);
}

}  // namespace
}  // namespace beamparse
