#include <gtest/gtest.h>

#include <numeric>
#include <random>
#include <sstream>

#include "knn_oracle.hpp"
#include "nnprobe/knn.hpp"
#include "test_util.hpp"

namespace nnprobe {
namespace {

using testing::occ;

std::vector<float> v(std::initializer_list<float> xs) { return xs; }

TEST(Cosine, IdenticalOrthogonalAndDiagonal) {
  EXPECT_EQ(cosine(v({1, 0}), v({1, 0})), 1.0);
  EXPECT_EQ(cosine(v({1, 0}), v({0, 1})), 0.0);
  EXPECT_NEAR(cosine(v({1, 1}), v({1, 0})), 0.70710678, 1e-6);
}

TEST(Cosine, Errors) {
  EXPECT_THROW(cosine(v({0, 0}), v({1, 0})), Error);
  try {
    cosine(v({1, 0}), v({1, 0, 0}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
  try {
    cosine(v({1, 0}), v({0, 0}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ZeroVector);
  }
}

TEST(Cosine, SymmetricAndBounded) {
  std::mt19937 rng(2);
  std::normal_distribution<float> g;
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<float> a(1 + rng() % 64), b;
    for (auto& x : a) x = g(rng);
    b.resize(a.size());
    for (auto& x : b) x = g(rng);
    const double ab = cosine(a, b);
    EXPECT_EQ(ab, cosine(b, a));
    EXPECT_GE(ab, -1.0);
    EXPECT_LE(ab, 1.0);
    EXPECT_EQ(cosine(a, a) <= 1.0, true);
  }
}

OccurrenceTable distinct_table(std::size_t rows) {
  std::vector<TokenOccurrence> o;
  for (RowId r = 0; r < rows; ++r) o.push_back(occ(r, r / 7, r % 7, "t" + std::to_string(r)));
  return OccurrenceTable(std::move(o));
}

TEST(BuildIndex, QueryableRows) {
  const VectorSet three(2, {1, 0, 0, 1, 1, 1});
  const auto t3 = distinct_table(3);
  EXPECT_EQ(build_index(three, t3).queryable_count(), 3u);

  const VectorSet with_zero(2, {1, 0, 0, 0, 1, 1});
  const auto index = build_index(with_zero, t3);
  EXPECT_EQ(index.queryable_count(), 2u);
  EXPECT_FALSE(index.queryable(1));

  const VectorSet empty(3, {});
  const OccurrenceTable no_rows;
  EXPECT_EQ(build_index(empty, no_rows).size(), 0u);
}

TEST(BuildIndex, SizeMismatch) {
  const VectorSet three(2, {1, 0, 0, 1, 1, 1});
  const auto t2 = distinct_table(2);
  try {
    build_index(three, t2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SizeMismatch);
  }
}

TEST(QueryNeighbors, AxisVectorsTieOrderedByPosition) {
  // e1..e4; the query e1 is orthogonal to the rest, so every candidate
  // scores 0 and the two kept are the earliest by (sentence, token).
  const VectorSet axes(4, {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1});
  const OccurrenceTable table({occ(0, 0, 0, "a"), occ(1, 2, 0, "b"), occ(2, 1, 3, "c"), occ(3, 1, 1, "d")});
  const auto index = build_index(axes, table);
  const auto list = query_neighbors(index, 0, 2, Exclusion::SelfOnly);
  ASSERT_EQ(list.entries.size(), 2u);
  EXPECT_EQ(list.entries[0].row, 3u);  // (1,1)
  EXPECT_EQ(list.entries[1].row, 2u);  // (1,3)
  EXPECT_EQ(list.entries[0].score, 0.0);
  EXPECT_EQ(list.entries[1].score, 0.0);
  EXPECT_FALSE(list.short_list);
}

TEST(QueryNeighbors, DuplicateVectorScoresOne) {
  const VectorSet dup(3, {0.3f, -1, 2, 0.3f, -1, 2});
  const OccurrenceTable table({occ(0, 0, 0, "a"), occ(1, 0, 1, "b")});
  const auto list = query_neighbors(build_index(dup, table), 0, 1);
  ASSERT_EQ(list.entries.size(), 1u);
  EXPECT_EQ(list.entries[0].row, 1u);
  EXPECT_EQ(list.entries[0].score, 1.0);
}

TEST(QueryNeighbors, SameTypeExclusionCanEmptyTheList) {
  const VectorSet vs(2, {1, 0, 1, 1, 0, 1});
  const OccurrenceTable table({occ(0, 0, 0, "a"), occ(1, 0, 1, "a"), occ(2, 1, 0, "a")});
  const auto index = build_index(vs, table);
  const auto list = query_neighbors(index, 0, 3, Exclusion::SameType);
  EXPECT_TRUE(list.entries.empty());
  EXPECT_TRUE(list.short_list);
  const auto self_only = query_neighbors(index, 0, 3, Exclusion::SelfOnly);
  EXPECT_EQ(self_only.entries.size(), 2u);
  EXPECT_TRUE(self_only.short_list);
}

TEST(QueryNeighbors, UnqueryableAndBadN) {
  const VectorSet vs(2, {0, 0, 1, 1});
  const auto table = distinct_table(2);
  const auto index = build_index(vs, table);
  try {
    query_neighbors(index, 0, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnqueryableRow);
  }
  EXPECT_THROW(query_neighbors(index, 5, 1), Error);
  EXPECT_THROW(query_neighbors(index, 1, 0), Error);
  // zero rows are never candidates
  EXPECT_TRUE(query_neighbors(index, 1, 1).entries.empty());
}

TEST(AllNeighbors, OrderedByQueryRowAndSkipsUnqueryable) {
  const VectorSet vs(2, {1, 0, 0, 0, 1, 1, 0, 1});
  const auto table = distinct_table(4);
  const auto index = build_index(vs, table);
  const auto run = all_neighbors(index, QuerySet{{3, 1, 0}}, 2);
  ASSERT_EQ(run.lists.size(), 2u);
  EXPECT_EQ(run.lists[0].query, 0u);
  EXPECT_EQ(run.lists[1].query, 3u);
  EXPECT_EQ(run.skipped, (std::vector<RowId>{1}));
}

void expect_matches_oracle(const VectorSet& vs, const OccurrenceTable& table, std::size_t n, Exclusion ex,
                           unsigned threads) {
  const auto index = build_index(vs, table);
  QuerySet all;
  for (RowId r = 0; r < vs.count(); ++r) all.rows.push_back(r);
  const auto run = all_neighbors(index, all, n, ex, threads);
  ASSERT_EQ(run.lists.size() + run.skipped.size(), vs.count());
  for (RowId r : run.skipped) EXPECT_TRUE(testing::oracle_zero(vs, r));
  for (const auto& list : run.lists) {
    const auto want = testing::oracle_neighbors(vs, table, list.query, n, ex == Exclusion::SameType);
    ASSERT_EQ(list.entries.size(), want.size()) << "query " << list.query;
    for (std::size_t k = 0; k < want.size(); ++k) {
      ASSERT_EQ(list.entries[k].row, want[k].row) << "query " << list.query << " rank " << k;
      ASSERT_NEAR(list.entries[k].score, want[k].score, 1e-6);
    }
  }
}

TEST(AllNeighbors, MatchesExhaustiveOracle) {
  const auto vs = testing::random_vectors(500, 16, 42);
  std::vector<TokenOccurrence> rows;
  std::mt19937 rng(9);
  for (RowId r = 0; r < 500; ++r) rows.push_back(occ(r, rng() % 60, r, "t" + std::to_string(rng() % 40)));
  // token ids must be unique within a sentence; row id keeps them unique
  const OccurrenceTable table(std::move(rows));
  expect_matches_oracle(vs, table, 10, Exclusion::SameType, 1);
  expect_matches_oracle(vs, table, 10, Exclusion::SelfOnly, 3);
}

TEST(AllNeighbors, TiesAndDuplicatesMatchOracle) {
  // Small integer coordinates produce many exact ties.
  std::mt19937 rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    const std::uint32_t dim = 1 + rng() % 5;
    const std::size_t rows = 20 + rng() % 60;
    std::vector<float> data(rows * dim);
    for (auto& x : data) x = static_cast<float>(static_cast<int>(rng() % 3) - 1);
    const VectorSet vs(dim, std::move(data));
    std::vector<TokenOccurrence> o;
    std::vector<RowId> perm(rows);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (RowId r = 0; r < rows; ++r) o.push_back(occ(r, perm[r] / 5, perm[r] % 5, "t" + std::to_string(rng() % 6)));
    const OccurrenceTable table(std::move(o));
    expect_matches_oracle(vs, table, 1 + rng() % 12, trial % 2 ? Exclusion::SameType : Exclusion::SelfOnly, 2);
  }
}

TEST(AllNeighbors, ThreadCountDoesNotChangeOutput) {
  const auto vs = testing::random_vectors(300, 24, 7);
  const auto table = distinct_table(300);
  const auto index = build_index(vs, table);
  QuerySet all;
  for (RowId r = 0; r < 300; ++r) all.rows.push_back(r);
  std::ostringstream a, b;
  write_neighbors_tsv(a, all_neighbors(index, all, 10, Exclusion::SameType, 1).lists);
  write_neighbors_tsv(b, all_neighbors(index, all, 10, Exclusion::SameType, 5).lists);
  EXPECT_EQ(a.str(), b.str());
}

TEST(AllNeighbors, ScaleInvariance) {
  auto base = testing::random_vectors(120, 12, 8);
  const auto table = distinct_table(120);
  QuerySet all;
  for (RowId r = 0; r < 120; ++r) all.rows.push_back(r);
  const auto before = all_neighbors(build_index(base, table), all, 10);
  std::mt19937 rng(4);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<float> data(base.data().begin(), base.data().end());
    const RowId target = rng() % 120;
    const float c = trial % 2 ? 4.0f : 0.25f;  // powers of two keep the scaled row exact
    for (std::uint32_t i = 0; i < base.dim(); ++i) data[target * base.dim() + i] *= c;
    const VectorSet scaled(base.dim(), std::move(data));
    const auto after = all_neighbors(build_index(scaled, table), all, 10);
    for (std::size_t q = 0; q < before.lists.size(); ++q) {
      ASSERT_EQ(before.lists[q].entries.size(), after.lists[q].entries.size());
      for (std::size_t k = 0; k < before.lists[q].entries.size(); ++k) {
        EXPECT_EQ(before.lists[q].entries[k].row, after.lists[q].entries[k].row);
        EXPECT_NEAR(before.lists[q].entries[k].score, after.lists[q].entries[k].score, 1e-6);
      }
    }
  }
}

TEST(EmbeddingNeighbors, IdenticalVectors) {
  const VectorSet e(2, {1, 2, 1, 2});
  const auto list = embedding_neighbors(e, {"a", "b"}, "a", 1);
  ASSERT_EQ(list.entries.size(), 1u);
  EXPECT_EQ(list.entries[0].type, "b");
  EXPECT_EQ(list.entries[0].score, 1.0);
}

TEST(EmbeddingNeighbors, UnknownAndZero) {
  const VectorSet e(2, {1, 2, 0, 0});
  try {
    embedding_neighbors(e, {"a", "b"}, "zzz", 1);
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::UnknownType);
  }
  try {
    embedding_neighbors(e, {"a", "b"}, "b", 1);
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::ZeroVector);
  }
}

TEST(EmbeddingNeighbors, MatchesExhaustiveOracle) {
  const auto e = testing::random_vectors(50, 8, 99);
  std::vector<std::string> vocab;
  for (int k = 0; k < 50; ++k) vocab.push_back("w" + std::to_string((k * 37) % 50));
  EmbeddingIndex index(e, vocab);
  for (RowId q = 0; q < 50; ++q) {
    const auto got = index.neighbors(vocab[q], 10);
    const auto want = testing::oracle_type_neighbors(e, vocab, q, 10);
    ASSERT_EQ(got.entries.size(), want.size());
    for (std::size_t k = 0; k < want.size(); ++k) {
      EXPECT_EQ(got.entries[k].type, want[k].type);
      EXPECT_NEAR(got.entries[k].score, want[k].score, 1e-6);
    }
  }
}

TEST(EmbeddingNeighbors, LexicographicTieBreak) {
  const VectorSet e(2, {1, 0, 0, 1, 0, 1, 0, 1});
  const auto list = embedding_neighbors(e, {"q", "zeta", "alpha", "mid"}, "q", 3);
  ASSERT_EQ(list.entries.size(), 3u);
  EXPECT_EQ(list.entries[0].type, "alpha");
  EXPECT_EQ(list.entries[1].type, "mid");
  EXPECT_EQ(list.entries[2].type, "zeta");
}

TEST(NeighborFiles, TsvAndBinaryRoundTrip) {
  testing::TempDir tmp;
  std::vector<NeighborList> lists = {{2, {{5, 0.25}, {1, -0.125}}, false}, {7, {{0, 1.0}}, true}};
  write_neighbors_tsv((tmp / "n.tsv").string(), lists);
  write_neighbors_bin((tmp / "n.bin").string(), lists);
  EXPECT_EQ(testing::read_bytes(tmp / "n.tsv"),
            "query_row\trank\tneighbor_row\tscore\n2\t1\t5\t0.250000\n2\t2\t1\t-0.125000\n7\t1\t0\t1.000000\n");
  auto tsv = read_neighbors_tsv((tmp / "n.tsv").string());
  auto bin = read_neighbors_bin((tmp / "n.bin").string());
  lists[1].short_list = false;  // not carried by the files
  EXPECT_EQ(tsv, lists);
  EXPECT_EQ(bin, lists);
}

}  // namespace
}  // namespace nnprobe
