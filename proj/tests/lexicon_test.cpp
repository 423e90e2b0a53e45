#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "nnprobe/lexicon.hpp"
#include "test_util.hpp"

namespace nnprobe {
namespace {

RelationLexicon parse(const std::string& text) {
  std::istringstream in(text);
  return parse_relations(in);
}

TEST(Relations, ParseTags) {
  EXPECT_EQ(parse_relation("SYN"), Relation::Syn);
  EXPECT_EQ(parse_relation("HYPER"), Relation::Hyper);
  EXPECT_FALSE(parse_relation("MERONYM"));
  for (auto r : kAllRelations) EXPECT_EQ(parse_relation(to_string(r)), r);
}

TEST(LoadRelations, UnionOfRows) {
  const auto lex = parse("law\tSYN\tstatute\nlaw\tHYPER\trule\n");
  const auto r = lex.related_set("law");
  EXPECT_TRUE(r.count("statute"));
  EXPECT_TRUE(r.count("rule"));
  EXPECT_EQ(lex.lookup("law", Relation::Syn), (std::set<std::string>{"statute"}));
}

TEST(LoadRelations, DuplicateRowsAreIdempotent) {
  const auto once = parse("law\tSYN\tstatute\n");
  const auto twice = parse("law\tSYN\tstatute\nlaw\tSYN\tstatute\n");
  EXPECT_EQ(once.entry_count(), twice.entry_count());
  EXPECT_EQ(once.related_set("law"), twice.related_set("law"));
}

TEST(LoadRelations, UnknownTag) {
  try {
    parse("law\tSYN\tstatute\nlaw\tMERONYM\tclause\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownRelationTag);
    EXPECT_EQ(e.row(), 2);
  }
}

TEST(LoadRelations, MalformedAndComments) {
  EXPECT_NO_THROW(parse("# comment\n\nlaw\tSYN\tstatute\tNOUN\n"));
  try {
    parse("law\tSYN\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MalformedRow);
  }
}

TEST(LoadRelations, FromFile) {
  testing::TempDir tmp;
  testing::write_text(tmp / "lex.tsv", "law\tANT\tchaos\n");
  EXPECT_EQ(load_relations((tmp / "lex.tsv").string()).related_set("law"), (std::set<std::string>{"chaos"}));
  EXPECT_THROW(load_relations((tmp / "missing.tsv").string()), Error);
}

TEST(RelatedSet, AbsentWord) { EXPECT_TRUE(parse("law\tSYN\tstatute\n").related_set("dog").empty()); }

TEST(RelatedSet, UnionOfFourRelations) {
  const auto lex = parse("law\tSYN\tstatute\nlaw\tHYPO\tbylaw\nlaw\tHYPER\trule\n");
  EXPECT_EQ(lex.related_set("law"), (std::set<std::string>{"statute", "bylaw", "rule"}));
}

TEST(RelatedSet, FoldCase) {
  const auto lex = parse("Law\tSYN\tstatute\n");
  EXPECT_TRUE(lex.related_set("law").empty());
  EXPECT_EQ(lex.related_set("law", std::nullopt, true), (std::set<std::string>{"statute"}));
  EXPECT_EQ(lex.related_set("LAW", std::nullopt, true), (std::set<std::string>{"statute"}));
}

TEST(RelatedSet, PosFilterKeepsUntaggedEntries) {
  const auto lex = parse("run\tSYN\tsprint\tVERB\nrun\tSYN\tstreak\tNOUN\nrun\tHYPER\tmove\n");
  EXPECT_EQ(lex.related_set("run", std::string("VERB")), (std::set<std::string>{"sprint", "move"}));
  EXPECT_EQ(lex.related_set("run"), (std::set<std::string>{"sprint", "streak", "move"}));
}

TEST(RelatedSet, MonotoneInRowsAndFilterIsSubset) {
  std::mt19937 rng(5);
  const std::vector<std::string> words = {"a", "b", "c", "d", "e"};
  const std::vector<std::string> pos = {"", "NOUN", "VERB"};
  for (int trial = 0; trial < 50; ++trial) {
    RelationLexicon lex;
    std::set<std::string> before = lex.related_set("a");
    for (int k = 0; k < 20; ++k) {
      lex.add(words[rng() % 2], kAllRelations[rng() % 4], words[rng() % words.size()], pos[rng() % pos.size()]);
      const auto after = lex.related_set("a");
      EXPECT_TRUE(std::includes(after.begin(), after.end(), before.begin(), before.end()));
      before = after;
      for (const auto& p : {"NOUN", "VERB"}) {
        const auto filtered = lex.related_set("a", std::string(p));
        EXPECT_TRUE(std::includes(after.begin(), after.end(), filtered.begin(), filtered.end()));
      }
    }
  }
}

}  // namespace
}  // namespace nnprobe
