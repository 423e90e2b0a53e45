#include <gtest/gtest.h>

#include "nnprobe/treesim.hpp"
#include "test_util.hpp"
#include "tree_gen.hpp"

namespace nnprobe {
namespace {

using testing::occ;

constexpr const char* kLaw = "(S (NP (DT the) (NN law)) (VP (VBD passed)))";

ErrorCode code_of(const std::string& line) {
  try {
    parse_bracketed(line);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::IoError;  // no error: never expected by callers
}

TEST(ParseBracketed, Basic) {
  const auto tree = parse_bracketed(kLaw);
  EXPECT_EQ(tree.leaf_count(), 3u);
  EXPECT_EQ(tree.words(), (std::vector<std::string>{"the", "law", "passed"}));
  EXPECT_EQ(tree.node(tree.root()).label, "S");
}

TEST(ParseBracketed, Errors) {
  EXPECT_EQ(code_of("(S (NP (DT the)"), ErrorCode::UnbalancedParens);
  EXPECT_EQ(code_of("(S (NN a)))"), ErrorCode::UnbalancedParens);
  EXPECT_EQ(code_of("(X a)(Y b)"), ErrorCode::MultipleRoots);
  EXPECT_EQ(code_of(""), ErrorCode::EmptyTree);
  EXPECT_EQ(code_of("(S (NP))"), ErrorCode::EmptyTree);
}

TEST(ParseBracketed, EscapesAndFunctionTags) {
  const auto tree = parse_bracketed("(ROOT (NP-SBJ (-LRB- -LRB-) (NN x) (-RRB- -RRB-)))");
  EXPECT_EQ(tree.words(), (std::vector<std::string>{"(", "x", ")"}));
  const auto sub = smallest_phrase_subtree(tree, 1);
  EXPECT_EQ(sub.spans, (std::vector<LabeledSpan>{{"NP", 0, 3}}));
  EXPECT_EQ(sub.preterminals, (std::vector<std::string>{"-LRB-", "NN", "-RRB-"}));
  EXPECT_EQ(normalize_label("PP=2"), "PP");
  EXPECT_EQ(normalize_label("-NONE-"), "-NONE-");
  EXPECT_EQ(normalize_label("-NONE--1"), "-NONE-");
  EXPECT_EQ(normalize_label("NP-SBJ=2"), "NP");
}

TEST(SmallestPhraseSubtree, Examples) {
  const auto tree = parse_bracketed(kLaw);
  const auto law = smallest_phrase_subtree(tree, 1);
  EXPECT_EQ(law.spans, (std::vector<LabeledSpan>{{"NP", 0, 2}}));
  EXPECT_EQ(law.preterminals, (std::vector<std::string>{"DT", "NN"}));
  EXPECT_EQ(law.leaf_count, 2u);

  const auto passed = smallest_phrase_subtree(tree, 2);
  EXPECT_EQ(passed.spans, (std::vector<LabeledSpan>{{"VP", 0, 1}}));
  EXPECT_EQ(passed.preterminals, (std::vector<std::string>{"VBD"}));

  const auto dog = smallest_phrase_subtree(parse_bracketed("(NP (NN dog))"), 0);
  EXPECT_EQ(dog.spans, (std::vector<LabeledSpan>{{"NP", 0, 1}}));

  try {
    smallest_phrase_subtree(tree, 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::LeafIndexOutOfRange);
  }
}

SubtreeSpan make(std::vector<LabeledSpan> spans, std::vector<std::string> tags) {
  SubtreeSpan s;
  std::sort(spans.begin(), spans.end());
  s.spans = std::move(spans);
  s.leaf_count = tags.size();
  s.preterminals = std::move(tags);
  return s;
}

TEST(Parseval, Identity) {
  const auto s = smallest_phrase_subtree(parse_bracketed(kLaw), 0);
  const auto p = parseval(s, s);
  EXPECT_EQ(p.precision, 1.0);
  EXPECT_EQ(p.recall, 1.0);
  EXPECT_EQ(p.complete_match, 1.0);
  EXPECT_EQ(p.crossing, 0u);
  EXPECT_EQ(p.tag_accuracy, 1.0);
}

TEST(Parseval, TagMismatch) {
  const auto p = parseval(make({{"NP", 0, 2}}, {"DT", "NN"}), make({{"NP", 0, 2}}, {"DT", "JJ"}));
  EXPECT_EQ(p.precision, 1.0);
  EXPECT_EQ(p.recall, 1.0);
  EXPECT_EQ(p.tag_accuracy, 0.5);
}

TEST(Parseval, CrossingBracket) {
  const auto gold = make({{"NP", 0, 2}, {"VP", 2, 4}, {"S", 0, 4}}, {"DT", "NN", "VBD", "RB"});
  const auto cand = make({{"X", 1, 3}, {"S", 0, 4}}, {"DT", "NN", "VBD", "RB"});
  const auto p = parseval(gold, cand);
  EXPECT_EQ(p.matched, 1u);
  EXPECT_EQ(p.precision, 0.5);
  EXPECT_EQ(p.recall, 1.0 / 3.0);
  EXPECT_EQ(p.crossing, 1u);
  EXPECT_EQ(p.complete_match, 0.0);
}

TEST(Parseval, EmptySubtree) {
  EXPECT_THROW(parseval(SubtreeSpan{}, make({{"NP", 0, 1}}, {"NN"})), Error);
}

TEST(Parseval, RandomTreeProperties) {
  testing::TreeGen gen(21);
  std::vector<SubtreeSpan> pool;
  std::vector<std::string> lines;
  for (int k = 0; k < 200; ++k) {
    lines.push_back(gen.tree());
    const auto tree = parse_bracketed(lines.back());
    const auto s = smallest_phrase_subtree(tree, gen.rng()() % tree.leaf_count());
    const auto p = parseval(s, s);
    EXPECT_EQ(p.precision, 1.0);
    EXPECT_EQ(p.recall, 1.0);
    EXPECT_EQ(p.complete_match, 1.0);
    EXPECT_EQ(p.tag_accuracy, 1.0);
    EXPECT_EQ(p.crossing, 0u);
    pool.push_back(s);
  }
  for (std::size_t k = 0; k + 1 < pool.size(); ++k) {
    const auto a = parseval(pool[k], pool[k + 1]);
    const auto b = parseval(pool[k + 1], pool[k]);
    EXPECT_EQ(a.precision, b.recall);
    EXPECT_EQ(a.recall, b.precision);
    EXPECT_EQ(a.matched, b.matched);
    EXPECT_EQ(a.tag_accuracy, b.tag_accuracy);
  }
  for (const auto& line : lines) {
    const auto tree = parse_bracketed(line);
    const auto renamed = parse_bracketed(gen.rewrite_terminals(line));
    ASSERT_EQ(tree.leaf_count(), renamed.leaf_count());
    for (std::size_t leaf = 0; leaf < tree.leaf_count(); ++leaf) {
      EXPECT_EQ(smallest_phrase_subtree(tree, leaf), smallest_phrase_subtree(renamed, leaf));
    }
  }
}

TEST(AverageTreesim, IdentityCorpusAndMean) {
  const auto np = make({{"NP", 0, 2}}, {"DT", "NN"});
  const auto vp = make({{"VP", 0, 1}}, {"VBD"});
  std::vector<std::optional<SubtreeSpan>> by_row = {np, np, np, std::nullopt};
  const std::vector<NeighborList> same = {{0, {{1, 0.9}, {2, 0.8}}, false}};
  const auto all = average_treesim(same, by_row);
  EXPECT_EQ(all.precision, 1.0);
  EXPECT_EQ(all.recall, 1.0);
  EXPECT_EQ(all.matched_brackets, 1.0);
  EXPECT_EQ(all.cross_brackets, 0.0);
  EXPECT_EQ(all.pair_count, 2u);

  by_row[2] = vp;
  const std::vector<NeighborList> mixed = {{0, {{1, 0.9}, {2, 0.8}, {3, 0.1}}, false}};
  const auto half = average_treesim(mixed, by_row);
  EXPECT_EQ(half.precision, 0.5);
  EXPECT_EQ(half.pair_count, 2u);
  EXPECT_EQ(half.skipped_pairs, 1u);
}

TEST(AverageTreesim, HandFixture) {
  const auto a = make({{"NP", 0, 2}, {"VP", 2, 4}, {"S", 0, 4}}, {"DT", "NN", "VBD", "RB"});
  const auto b = make({{"X", 1, 3}, {"S", 0, 4}}, {"DT", "NN", "VBD", "RB"});
  const auto c = make({{"NP", 0, 2}}, {"DT", "JJ"});
  std::vector<std::optional<SubtreeSpan>> by_row = {a, b, c};
  // pairs: (a,b) p=1/2 r=1/3 x=1 t=1; (a,c) p=1 r=1/3 x=0 t=1/4; (b,a) p=1/3 r=1/2 x=2 t=1
  const std::vector<NeighborList> lists = {{0, {{1, 0.5}, {2, 0.4}}, false}, {1, {{0, 0.5}}, false}};
  const auto s = average_treesim(lists, by_row);
  EXPECT_NEAR(s.precision, (0.5 + 1.0 + 1.0 / 3.0) / 3.0, 1e-15);
  EXPECT_NEAR(s.recall, (1.0 / 3.0 + 1.0 / 3.0 + 0.5) / 3.0, 1e-15);
  EXPECT_NEAR(s.cross_brackets, 1.0, 1e-15);
  EXPECT_NEAR(s.tag_accuracy, (1.0 + 0.25 + 1.0) / 3.0, 1e-15);
  EXPECT_EQ(s.matched_brackets, 0.0);
}

TEST(AssignSubtrees, PropagatesThroughBpe) {
  // sentence 0: "the de@@ regulation passed" over parse "the deregulation passed"
  const OccurrenceTable table({occ(0, 0, 0, "the"), occ(1, 0, 1, "de@@"), occ(2, 0, 2, "regulation"),
                               occ(3, 0, 3, "passed"), occ(4, 1, 0, "x"), occ(5, 2, 0, "y")});
  const std::vector<std::string> parses = {"(S (NP (DT the) (NN deregulation)) (VP (VBD passed)))",
                                           "(NP (NN different))"};
  const auto a = assign_subtrees(table, parses);
  ASSERT_TRUE(a.by_row[1] && a.by_row[2]);
  EXPECT_EQ(*a.by_row[1], *a.by_row[2]);
  EXPECT_EQ(a.by_row[1]->spans, (std::vector<LabeledSpan>{{"NP", 0, 2}}));
  EXPECT_EQ(a.by_row[3]->preterminals, (std::vector<std::string>{"VBD"}));
  EXPECT_FALSE(a.by_row[4]);
  EXPECT_FALSE(a.by_row[5]);
  EXPECT_EQ(a.sentences_misaligned, 1u);
  EXPECT_EQ(a.sentences_without_parse, 1u);
}

}  // namespace
}  // namespace nnprobe
