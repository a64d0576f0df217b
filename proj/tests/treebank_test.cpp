#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "beamparse/treebank.hpp"
#include "support/synthetic.hpp"

namespace beamparse {
namespace {

constexpr const char* kHeEats =
    "1\tHe\t_\tPRP\tPRP\t_\t2\tnsubj\t_\t_\n"
    "2\teats\t_\tVBZ\tVBZ\t_\t0\troot\t_\t_\n";

TEST(ReadConll, EmptyStreamYieldsNothing) {
  std::istringstream in("");
  EXPECT_TRUE(read_conll(in).empty());
}

TEST(ReadConll, ReadsOneSentence) {
  std::istringstream in(kHeEats);
  const auto trees = read_conll(in);
  ASSERT_EQ(trees.size(), 1u);
  EXPECT_EQ(trees[0].heads(), (std::vector<int>{2, 0}));
  EXPECT_EQ(trees[0].labels(), (std::vector<std::string>{"nsubj", "root"}));
  EXPECT_EQ(trees[0].at(1).form, "He");
  EXPECT_EQ(trees[0].at(2).pos, "VBZ");
}

TEST(ReadConll, FallsBackToColumnFourForPos) {
  std::istringstream in("1\tHe\t_\tPRP\t_\t_\t0\troot\t_\t_\n");
  EXPECT_EQ(read_conll(in)[0].at(1).pos, "PRP");
}

TEST(ReadConll, NonIntegerHeadNamesLine) {
  std::istringstream in(std::string(kHeEats) + "\n1\tx\t_\tNN\tNN\t_\tx\troot\t_\t_\n");
  try {
    read_conll(in);
    FAIL() << "expected parse error";
  } catch (const ConllParseError& e) {
    EXPECT_EQ(e.line(), 4u);
    EXPECT_NE(std::string(e.what()).find("line 4"), std::string::npos);
  }
}

TEST(ReadConll, WrongColumnCountIsError) {
  std::istringstream in("1\tHe\tPRP\t0\n");
  EXPECT_THROW(read_conll(in), ConllParseError);
}

TEST(ReadConll, HeadOutOfRangeIsError) {
  std::istringstream in("1\tHe\t_\tPRP\tPRP\t_\t5\troot\t_\t_\n");
  EXPECT_THROW(read_conll(in), ConllParseError);
  std::istringstream self("1\tHe\t_\tPRP\tPRP\t_\t1\troot\t_\t_\n");
  EXPECT_THROW(read_conll(self), ConllParseError);
}

TEST(ReadConll, AcceptsCrlfCommentsAndMultiwordRanges) {
  std::istringstream in(
      "# sent_id = 1\r\n"
      "1-2\tdon't\t_\t_\t_\t_\t_\t_\t_\t_\r\n"
      "1\tdo\t_\tVB\tVB\t_\t0\troot\t_\t_\r\n"
      "2\tn't\t_\tRB\tRB\t_\t1\tneg\t_\t_\r\n"
      "\r\n"
      "\r\n"
      "1\tyes\t_\tUH\tUH\t_\t0\troot\t_\t_\r\n");
  const auto trees = read_conll(in);
  ASSERT_EQ(trees.size(), 2u);
  EXPECT_EQ(trees[0].size(), 2u);
  EXPECT_EQ(trees[0].at(2).label, "neg");
  EXPECT_EQ(trees[1].at(1).form, "yes");
}

TEST(ReadConll, PlaceholderHeadsWhenAllowed) {
  std::istringstream in("1\tHe\t_\tPRP\tPRP\t_\t_\t_\t_\t_\n");
  EXPECT_THROW(read_conll(in), ConllParseError);
  std::istringstream again("1\tHe\t_\tPRP\tPRP\t_\t_\t_\t_\t_\n");
  EXPECT_EQ(read_conll(again, {.require_heads = false})[0].at(1).head, 0);
}

TEST(WriteConll, EmptySequenceWritesNothing) {
  std::ostringstream out;
  write_conll(std::vector<DepTree>{}, out);
  EXPECT_EQ(out.str(), "");
}

TEST(WriteConll, OneTokenRoundTrip) {
  DepTree t;
  t.tokens.push_back({"Hi", "UH", 0, "root"});
  std::stringstream io;
  write_conll(std::vector<DepTree>{t}, io);
  EXPECT_EQ(io.str(), "1\tHi\t_\tUH\tUH\t_\t0\troot\t_\t_\n\n");
  EXPECT_EQ(read_conll(io), std::vector<DepTree>{t});
}

TEST(WriteConll, RandomProjectiveTreesRoundTrip) {
  std::mt19937_64 rng(7);
  std::vector<DepTree> trees;
  for (int i = 0; i < 100; ++i)
    trees.push_back(testing::random_projective_tree(rng, testing::uniform(rng, 1, 25), {"nsubj", "dobj", "amod", "root"}));
  std::stringstream io;
  write_conll(trees, io);
  EXPECT_EQ(read_conll(io), trees);
}

TEST(IsProjective, TwoTokensAlwaysProjective) {
  EXPECT_TRUE(is_projective(testing::make_tree({2, 0})));
  EXPECT_TRUE(is_projective(testing::make_tree({0, 1})));
}

TEST(IsProjective, CrossingArcs) {
  // (1 -> 3) crosses (4 -> 2).
  EXPECT_FALSE(is_projective(testing::make_tree({0, 4, 1, 2})));
  // Root arc (0 -> 2) crosses (3 -> 1).
  EXPECT_FALSE(is_projective(testing::make_tree({3, 0, 2})));
  EXPECT_TRUE(is_projective(testing::make_tree({2, 0, 2})));
}

TEST(IsProjective, AgreesWithBruteForceOnAllTreesUpToSix) {
  for (int n = 1; n <= 6; ++n) {
    testing::for_each_tree(n, [&](const std::vector<int>& heads) {
      ASSERT_EQ(is_projective(testing::make_tree(heads)), !testing::crosses_brute_force(heads));
    });
  }
}

TEST(IsWellFormed, DetectsCyclesAndMultipleRoots) {
  EXPECT_TRUE(is_well_formed(testing::make_tree({2, 0})));
  EXPECT_FALSE(is_well_formed(testing::make_tree({0, 0})));
  EXPECT_FALSE(is_well_formed(testing::make_tree({0, 3, 2})));
}

DepTree tagged(std::vector<int> heads, std::vector<std::string> labels, std::vector<std::string> tags) {
  auto t = testing::make_tree(heads, labels);
  for (std::size_t i = 0; i < tags.size(); ++i) t.tokens[i].pos = tags[i];
  return t;
}

TEST(Evaluate, IdentityIsPerfect) {
  std::mt19937_64 rng(3);
  std::vector<DepTree> gold;
  for (int i = 0; i < 20; ++i) gold.push_back(testing::random_projective_tree(rng, 10, {"a", "b"}));
  const auto r = evaluate(gold, gold);
  EXPECT_EQ(r.uas, 1.0);
  EXPECT_EQ(r.las, 1.0);
}

TEST(Evaluate, WrongLabelHalvesLas) {
  const auto gold = tagged({2, 0}, {"nsubj", "root"}, {"PRP", "VBZ"});
  const auto pred = tagged({2, 0}, {"dobj", "root"}, {"PRP", "VBZ"});
  const auto r = evaluate({gold}, {pred});
  EXPECT_DOUBLE_EQ(r.uas, 1.0);
  EXPECT_DOUBLE_EQ(r.las, 0.5);
  EXPECT_EQ(r.scored_tokens, 2u);
}

TEST(Evaluate, PunctuationOnlySentenceIsDegenerate) {
  const auto gold = tagged({0, 1}, {"root", "p"}, {".", ","});
  const auto pred = tagged({2, 0}, {"x", "x"}, {".", ","});
  const auto r = evaluate({gold}, {pred}, true);
  EXPECT_EQ(r.scored_tokens, 0u);
  EXPECT_EQ(r.total_tokens, 2u);
  EXPECT_EQ(r.uas, 1.0);
  EXPECT_EQ(r.las, 1.0);
  EXPECT_DOUBLE_EQ(evaluate({gold}, {pred}, false).uas, 0.0);
}

TEST(Evaluate, PunctuationExcludedByGoldTag) {
  const auto gold = tagged({2, 0, 2, 2}, {"a", "root", "b", "p"}, {"NN", "VB", "NN", "."});
  auto pred = gold;
  pred.tokens[3].head = 1;
  EXPECT_DOUBLE_EQ(evaluate({gold}, {pred}).uas, 1.0);
  EXPECT_DOUBLE_EQ(evaluate({gold}, {pred}, false).uas, 0.75);
}

TEST(Evaluate, MisalignmentNamesSentence) {
  const auto a = testing::make_tree({2, 0});
  const auto b = testing::make_tree({0});
  try {
    evaluate({a, a}, {a, b});
    FAIL();
  } catch (const AlignmentError& e) {
    EXPECT_EQ(e.sentence(), 1u);
  }
  EXPECT_THROW(evaluate({a}, {a, a}), AlignmentError);
}

TEST(Evaluate, LasNeverExceedsUas) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = testing::uniform(rng, 1, 12);
    auto gold = testing::random_projective_tree(rng, n, {"a", "b", "c"});
    auto pred = testing::random_projective_tree(rng, n, {"a", "b", "c"});
    const auto r = evaluate({gold}, {pred}, false);
    EXPECT_LE(r.las, r.uas);
    EXPECT_LE(r.scored_tokens, r.total_tokens);
  }
}

}  // namespace
}  // namespace beamparse
