#pragma once

// Exact cosine nearest-neighbor search over hidden states (one vector per
// occurrence) and embeddings (one vector per type).
//
// Every dot product is accumulated in double, strictly in ascending
// dimension order. Products of two floats are exact in double, so the
// blocked kernel and the scalar `cosine` agree bit for bit, with or
// without FMA contraction.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <vector>

#if defined(__AVX2__) || defined(__AVX512F__)
#include <immintrin.h>
#endif

#include "corpusio.hpp"
#include "error.hpp"
#include "text.hpp"

namespace nnprobe {

enum class Exclusion {
  SameType,  // drop every candidate whose surface type equals the query's
  SelfOnly,  // drop only the query row
};

constexpr std::string_view to_string(Exclusion e) { return e == Exclusion::SameType ? "same-type" : "self-only"; }

struct Neighbor {
  RowId row = 0;
  double score = 0.0;
  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

struct NeighborList {
  RowId query = 0;
  std::vector<Neighbor> entries;
  bool short_list = false;  // fewer than n candidates were available
  friend bool operator==(const NeighborList&, const NeighborList&) = default;
};

struct TypeNeighbor {
  std::string type;
  double score = 0.0;
  friend bool operator==(const TypeNeighbor&, const TypeNeighbor&) = default;
};

struct TypeNeighborList {
  std::string query_type;
  std::vector<TypeNeighbor> entries;
  bool short_list = false;
};

namespace detail {

inline double dot(std::span<const float> u, std::span<const float> v) {
  double acc = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) acc += static_cast<double>(u[i]) * static_cast<double>(v[i]);
  return acc;
}

inline double squared_norm(std::span<const float> u) { return dot(u, u); }

inline double clamp_score(double s) { return std::clamp(s, -1.0, 1.0); }

// One rounding for the product of squared norms, so a vector scored
// against its own copy gives exactly 1.
inline double score_from(double dot, double sq_u, double sq_v) { return clamp_score(dot / std::sqrt(sq_u * sq_v)); }

}  // namespace detail

inline double cosine(std::span<const float> u, std::span<const float> v) {
  if (u.size() != v.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                "cosine of vectors with dims " + std::to_string(u.size()) + " and " + std::to_string(v.size()));
  }
  const double su = detail::squared_norm(u);
  const double sv = detail::squared_norm(v);
  if (su == 0.0 || sv == 0.0) throw Error(ErrorCode::ZeroVector, "cosine of a zero vector");
  return detail::score_from(detail::dot(u, v), su, sv);
}

/// Worker count: explicit request, else NNPROBE_THREADS, else hardware.
inline unsigned resolve_threads(unsigned requested = 0) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("NNPROBE_THREADS")) {
    if (auto v = text::parse_int<unsigned>(env); v && *v > 0) return *v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Blocked exact top-n scan over one VectorSet. Candidates are ordered by
/// descending score, then ascending tie rank. Rows with zero norm are never
/// candidates. Rows sharing a group id are mutually excluded when grouping
/// is requested.
class ScanEngine {
 public:
  static constexpr std::size_t kPanel = 16;  // candidates per transposed panel
  static constexpr std::size_t kTile = 4;    // queries per register tile

  struct Hit {
    RowId row;
    double score;
    std::uint32_t rank;
  };

  ScanEngine() = default;

  ScanEngine(const VectorSet& vectors, std::vector<std::uint32_t> tie_rank, std::vector<std::uint32_t> group)
      : vectors_(&vectors), tie_rank_(std::move(tie_rank)), group_(std::move(group)) {
    const auto count = vectors.count();
    const auto dim = vectors.dim();
    sq_norms_.resize(count);
    for (RowId r = 0; r < count; ++r) sq_norms_[r] = detail::squared_norm(vectors.row(r));

    num_panels_ = (count + kPanel - 1) / kPanel;
    panels_.assign(num_panels_ * dim * kPanel, 0.0f);
    for (RowId r = 0; r < count; ++r) {
      const auto row = vectors.row(r);
      float* panel = panels_.data() + (r / kPanel) * dim * kPanel;
      const auto lane = r % kPanel;
      for (std::uint32_t i = 0; i < dim; ++i) panel[i * kPanel + lane] = row[i];
    }
  }

  std::size_t count() const noexcept { return sq_norms_.size(); }
  double norm(RowId r) const { return std::sqrt(sq_norms_[r]); }
  bool queryable(RowId r) const { return r < sq_norms_.size() && sq_norms_[r] > 0.0; }

  /// Top-n for every query, in the order given. `threads` only changes
  /// scheduling; results are identical for any value.
  std::vector<std::vector<Hit>> top_n(std::span<const RowId> queries, std::size_t n, bool exclude_group,
                                      unsigned threads) const {
    std::vector<std::vector<Hit>> results(queries.size());
    if (queries.empty() || count() == 0) return results;

    const std::size_t dim = vectors_->dim();
    constexpr std::size_t kBlockTiles = 16;
    const std::size_t tiles = (queries.size() + kTile - 1) / kTile;
    const std::size_t blocks = (tiles + kBlockTiles - 1) / kBlockTiles;
    // Keep one candidate chunk around 256 KiB so it stays cache resident
    // while every tile of the query block streams over it.
    const std::size_t chunk_panels = std::max<std::size_t>(1, (256u << 10) / (dim * kPanel * sizeof(float)));

    std::atomic<std::size_t> next_block{0};
    auto worker = [&] {
      std::vector<double> tile_buf(kBlockTiles * dim * kTile);
      std::vector<TopN> tops;
      for (;;) {
        const std::size_t block = next_block.fetch_add(1);
        if (block >= blocks) return;
        const std::size_t first_tile = block * kBlockTiles;
        const std::size_t tile_count = std::min(kBlockTiles, tiles - first_tile);
        const std::size_t first_query = first_tile * kTile;
        const std::size_t query_count = std::min(tile_count * kTile, queries.size() - first_query);

        // Query tiles transposed to [dim][kTile] doubles; padding lanes are zero.
        std::fill(tile_buf.begin(), tile_buf.end(), 0.0);
        tops.assign(query_count, TopN{});
        for (std::size_t q = 0; q < query_count; ++q) {
          const RowId row = queries[first_query + q];
          const auto v = vectors_->row(row);
          double* tile = tile_buf.data() + (q / kTile) * dim * kTile;
          for (std::size_t i = 0; i < dim; ++i) tile[i * kTile + q % kTile] = v[i];
          tops[q].reset(n);
        }

        for (std::size_t p0 = 0; p0 < num_panels_; p0 += chunk_panels) {
          const std::size_t p1 = std::min(num_panels_, p0 + chunk_panels);
          for (std::size_t t = 0; t < tile_count; ++t) {
            const double* tile = tile_buf.data() + t * dim * kTile;
            for (std::size_t p = p0; p < p1; ++p) {
              double acc[kTile][kPanel];
              kernel(tile, panels_.data() + p * dim * kPanel, dim, acc);
              for (std::size_t lane_q = 0; lane_q < kTile; ++lane_q) {
                const std::size_t q = t * kTile + lane_q;
                if (q >= query_count) break;
                offer(tops[q], queries[first_query + q], p * kPanel, acc[lane_q], exclude_group);
              }
            }
          }
        }
        for (std::size_t q = 0; q < query_count; ++q) results[first_query + q] = std::move(tops[q].hits);
      }
    };

    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, threads), blocks));
    if (workers <= 1) {
      worker();
    } else {
      std::vector<std::jthread> pool;
      pool.reserve(workers);
      for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
    }
    return results;
  }

 private:
  struct TopN {
    std::size_t capacity = 0;
    std::vector<Hit> hits;  // sorted best first

    void reset(std::size_t n) {
      capacity = n;
      hits.clear();
      hits.reserve(n + 1);
    }
  };

  static bool better(double score_a, std::uint32_t rank_a, double score_b, std::uint32_t rank_b) {
    return score_a > score_b || (score_a == score_b && rank_a < rank_b);
  }

  // acc[q][c] = sum_i tile[i][q] * panel[i][c], each lane summed in
  // ascending i. Vector widths only spread independent lanes across registers.
  static void kernel(const double* tile, const float* panel, std::size_t dim, double (&acc)[kTile][kPanel]) {
#if defined(__AVX512F__)
    __m512d a[kTile][2];
    for (auto& row : a) row[0] = row[1] = _mm512_setzero_pd();
    for (std::size_t i = 0; i < dim; ++i) {
      const __m512 col = _mm512_loadu_ps(panel + i * kPanel);
      const __m512d lo = _mm512_cvtps_pd(_mm512_castps512_ps256(col));
      const __m512d hi = _mm512_cvtps_pd(_mm256_castpd_ps(_mm512_extractf64x4_pd(_mm512_castps_pd(col), 1)));
      const double* qv = tile + i * kTile;
      for (std::size_t q = 0; q < kTile; ++q) {
        const __m512d x = _mm512_set1_pd(qv[q]);
        a[q][0] = _mm512_fmadd_pd(x, lo, a[q][0]);
        a[q][1] = _mm512_fmadd_pd(x, hi, a[q][1]);
      }
    }
    for (std::size_t q = 0; q < kTile; ++q) {
      _mm512_storeu_pd(acc[q], a[q][0]);
      _mm512_storeu_pd(acc[q] + 8, a[q][1]);
    }
#elif defined(__AVX2__) && defined(__FMA__)
    __m256d a[kTile][4];
    for (auto& row : a) row[0] = row[1] = row[2] = row[3] = _mm256_setzero_pd();
    for (std::size_t i = 0; i < dim; ++i) {
      const float* col = panel + i * kPanel;
      __m256d c[4];
      for (int k = 0; k < 4; ++k) c[k] = _mm256_cvtps_pd(_mm_loadu_ps(col + 4 * k));
      const double* qv = tile + i * kTile;
      for (std::size_t q = 0; q < kTile; ++q) {
        const __m256d x = _mm256_broadcast_sd(qv + q);
        for (int k = 0; k < 4; ++k) a[q][k] = _mm256_fmadd_pd(x, c[k], a[q][k]);
      }
    }
    for (std::size_t q = 0; q < kTile; ++q) {
      for (int k = 0; k < 4; ++k) _mm256_storeu_pd(acc[q] + 4 * k, a[q][k]);
    }
#else
    double a[kTile][kPanel] = {};
    for (std::size_t i = 0; i < dim; ++i) {
      const float* col = panel + i * kPanel;
      const double* qv = tile + i * kTile;
      for (std::size_t q = 0; q < kTile; ++q) {
        const double x = qv[q];
        for (std::size_t c = 0; c < kPanel; ++c) a[q][c] += x * static_cast<double>(col[c]);
      }
    }
    std::memcpy(acc, a, sizeof(a));
#endif
  }

  void offer(TopN& top, RowId query, RowId base, const double* dots, bool exclude_group) const {
    const double qsq = sq_norms_[query];
    const std::size_t lanes = std::min(kPanel, count() - base);
    for (std::size_t c = 0; c < lanes; ++c) {
      const RowId cand = base + c;
      const double csq = sq_norms_[cand];
      if (csq == 0.0) continue;
      const double score = detail::score_from(dots[c], qsq, csq);
      const std::uint32_t rank = tie_rank_[cand];
      if (top.hits.size() == top.capacity) {
        const Hit& worst = top.hits.back();
        if (!better(score, rank, worst.score, worst.rank)) continue;
      }
      if (cand == query || (exclude_group && group_[cand] == group_[query])) continue;
      auto pos = std::find_if(top.hits.begin(), top.hits.end(),
                              [&](const Hit& h) { return better(score, rank, h.score, h.rank); });
      top.hits.insert(pos, Hit{cand, score, rank});
      if (top.hits.size() > top.capacity) top.hits.pop_back();
    }
  }

  const VectorSet* vectors_ = nullptr;
  std::vector<std::uint32_t> tie_rank_;
  std::vector<std::uint32_t> group_;
  std::vector<double> sq_norms_;
  std::size_t num_panels_ = 0;
  std::vector<float> panels_;
};

/// Hidden-state index. Keeps references to `vectors` and `table`; both must
/// outlive the index.
class SimilarityIndex {
 public:
  SimilarityIndex(const VectorSet& vectors, const OccurrenceTable& table) : vectors_(&vectors), table_(&table) {
    if (vectors.count() != table.size()) {
      throw Error(ErrorCode::SizeMismatch, "vector log has " + std::to_string(vectors.count()) +
                                               " rows but the token table has " + std::to_string(table.size()));
    }
    std::vector<std::uint32_t> rank(table.size());
    std::vector<std::uint32_t> group(table.size());
    std::unordered_map<std::string_view, std::uint32_t> type_ids;
    for (RowId r = 0; r < table.size(); ++r) {
      rank[r] = table.position_rank(r);
      group[r] = type_ids.try_emplace(table[r].surface, static_cast<std::uint32_t>(type_ids.size())).first->second;
    }
    engine_ = ScanEngine(vectors, std::move(rank), std::move(group));
  }

  std::size_t size() const noexcept { return engine_.count(); }
  bool queryable(RowId r) const { return engine_.queryable(r); }
  double norm(RowId r) const { return engine_.norm(r); }
  std::size_t queryable_count() const {
    std::size_t k = 0;
    for (RowId r = 0; r < size(); ++r) k += queryable(r);
    return k;
  }
  const VectorSet& vectors() const noexcept { return *vectors_; }
  const OccurrenceTable& table() const noexcept { return *table_; }
  const ScanEngine& engine() const noexcept { return engine_; }

 private:
  const VectorSet* vectors_;
  const OccurrenceTable* table_;
  ScanEngine engine_;
};

inline SimilarityIndex build_index(const VectorSet& vectors, const OccurrenceTable& table) {
  return SimilarityIndex(vectors, table);
}

namespace detail {

inline NeighborList to_neighbor_list(RowId query, std::vector<ScanEngine::Hit> hits, std::size_t n) {
  NeighborList list;
  list.query = query;
  list.short_list = hits.size() < n;
  list.entries.reserve(hits.size());
  for (const auto& h : hits) list.entries.push_back({h.row, h.score});
  return list;
}

inline void require_positive_n(std::size_t n) {
  if (n == 0) throw Error(ErrorCode::ConfigError, "neighbor count n must be at least 1");
}

}  // namespace detail

inline NeighborList query_neighbors(const SimilarityIndex& index, RowId query, std::size_t n,
                                    Exclusion exclusion = Exclusion::SameType) {
  detail::require_positive_n(n);
  if (!index.queryable(query)) {
    throw Error(ErrorCode::UnqueryableRow, "row " + std::to_string(query) + " is missing or has zero norm",
                static_cast<std::int64_t>(query));
  }
  const RowId q[1] = {query};
  auto hits = index.engine().top_n(q, n, exclusion == Exclusion::SameType, 1);
  return detail::to_neighbor_list(query, std::move(hits[0]), n);
}

struct NeighborRun {
  std::vector<NeighborList> lists;  // ascending query row
  std::vector<RowId> skipped;       // unqueryable query rows
};

inline NeighborRun all_neighbors(const SimilarityIndex& index, const QuerySet& queries, std::size_t n,
                                 Exclusion exclusion = Exclusion::SameType, unsigned threads = 0) {
  detail::require_positive_n(n);
  std::vector<RowId> rows(queries.rows);
  std::sort(rows.begin(), rows.end());
  rows.erase(std::unique(rows.begin(), rows.end()), rows.end());

  NeighborRun run;
  std::vector<RowId> live;
  for (RowId r : rows) (index.queryable(r) ? live : run.skipped).push_back(r);

  auto hits = index.engine().top_n(live, n, exclusion == Exclusion::SameType, resolve_threads(threads));
  run.lists.reserve(live.size());
  for (std::size_t k = 0; k < live.size(); ++k) run.lists.push_back(detail::to_neighbor_list(live[k], std::move(hits[k]), n));
  return run;
}

/// Embedding-space index over a type vocabulary. Ties are broken by
/// lexicographic type order. Keeps a reference to `embeddings`.
class EmbeddingIndex {
 public:
  EmbeddingIndex(const VectorSet& embeddings, std::vector<std::string> vocab)
      : embeddings_(&embeddings), vocab_(std::move(vocab)) {
    if (embeddings.count() != vocab_.size()) {
      throw Error(ErrorCode::SizeMismatch, "embedding log has " + std::to_string(embeddings.count()) +
                                               " rows but the vocabulary has " + std::to_string(vocab_.size()));
    }
    std::vector<std::uint32_t> order(vocab_.size());
    std::iota(order.begin(), order.end(), 0u);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return vocab_[a] < vocab_[b]; });
    std::vector<std::uint32_t> rank(vocab_.size());
    for (std::uint32_t k = 0; k < order.size(); ++k) rank[order[k]] = k;
    std::vector<std::uint32_t> group(vocab_.size());
    std::iota(group.begin(), group.end(), 0u);
    for (RowId r = 0; r < vocab_.size(); ++r) row_of_.try_emplace(vocab_[r], r);
    engine_ = ScanEngine(embeddings, std::move(rank), std::move(group));
  }

  const std::vector<std::string>& vocab() const noexcept { return vocab_; }
  bool contains(std::string_view type) const { return row_of_.count(std::string(type)) != 0; }

  TypeNeighborList neighbors(const std::string& type, std::size_t n) const {
    return std::move(neighbors_batch({type}, n, 1).front());
  }

  /// Lists for many types at once; every type must be known and nonzero.
  std::vector<TypeNeighborList> neighbors_batch(const std::vector<std::string>& types, std::size_t n,
                                                unsigned threads) const {
    detail::require_positive_n(n);
    std::vector<RowId> rows;
    rows.reserve(types.size());
    for (const auto& t : types) {
      const auto it = row_of_.find(t);
      if (it == row_of_.end()) throw Error(ErrorCode::UnknownType, "type '" + t + "' is not in the vocabulary");
      if (!engine_.queryable(it->second)) throw Error(ErrorCode::ZeroVector, "type '" + t + "' has a zero embedding");
      rows.push_back(it->second);
    }
    auto hits = engine_.top_n(rows, n, true, threads);
    std::vector<TypeNeighborList> out(types.size());
    for (std::size_t k = 0; k < types.size(); ++k) {
      out[k].query_type = types[k];
      out[k].short_list = hits[k].size() < n;
      for (const auto& h : hits[k]) out[k].entries.push_back({vocab_[h.row], h.score});
    }
    return out;
  }

  /// Whether `type` can be queried (present with a nonzero vector).
  bool queryable(const std::string& type) const {
    const auto it = row_of_.find(type);
    return it != row_of_.end() && engine_.queryable(it->second);
  }

 private:
  const VectorSet* embeddings_;
  std::vector<std::string> vocab_;
  std::unordered_map<std::string, RowId> row_of_;
  ScanEngine engine_;
};

inline TypeNeighborList embedding_neighbors(const VectorSet& embeddings, const std::vector<std::string>& vocab,
                                            const std::string& query_type, std::size_t n) {
  return EmbeddingIndex(embeddings, vocab).neighbors(query_type, n);
}

// Neighbor records: TSV `query_row rank neighbor_row score` (rank 1-based,
// score to 6 decimals) and a binary mirror:
//   magic "HSN1", u64 record count, then per record
//   u64 query_row, u32 rank, u64 neighbor_row, f64 score (little-endian).

inline constexpr std::string_view kNeighborHeader = "query_row\trank\tneighbor_row\tscore";
inline constexpr char kNeighborMagic[4] = {'H', 'S', 'N', '1'};

inline void write_neighbors_tsv(std::ostream& out, const std::vector<NeighborList>& lists) {
  out << kNeighborHeader << '\n';
  for (const auto& list : lists) {
    for (std::size_t k = 0; k < list.entries.size(); ++k) {
      out << list.query << '\t' << (k + 1) << '\t' << list.entries[k].row << '\t'
          << text::fixed(list.entries[k].score) << '\n';
    }
  }
}

inline void write_neighbors_tsv(const std::string& path, const std::vector<NeighborList>& lists) {
  auto out = text::open_output(path);
  write_neighbors_tsv(out, lists);
}

inline void write_neighbors_bin(const std::string& path, const std::vector<NeighborList>& lists) {
  std::string buf(kNeighborMagic, 4);
  std::uint64_t records = 0;
  for (const auto& l : lists) records += l.entries.size();
  detail::put_le<std::uint64_t>(buf, records);
  for (const auto& list : lists) {
    for (std::size_t k = 0; k < list.entries.size(); ++k) {
      detail::put_le<std::uint64_t>(buf, list.query);
      detail::put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(k + 1));
      detail::put_le<std::uint64_t>(buf, list.entries[k].row);
      detail::put_le<std::uint64_t>(buf, std::bit_cast<std::uint64_t>(list.entries[k].score));
    }
  }
  auto out = text::open_output(path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

namespace detail {

inline void append_record(std::vector<NeighborList>& lists, std::uint64_t query, std::uint64_t rank,
                          std::uint64_t row, double score, const std::string& where) {
  if (lists.empty() || lists.back().query != query) {
    if (!lists.empty() && lists.back().query > query) {
      throw Error(ErrorCode::InputInconsistency, where + ": query rows are not ascending");
    }
    lists.push_back(NeighborList{query, {}, false});
  }
  auto& list = lists.back();
  if (rank != list.entries.size() + 1) throw Error(ErrorCode::InputInconsistency, where + ": ranks are not consecutive");
  list.entries.push_back({row, score});
}

}  // namespace detail

inline std::vector<NeighborList> read_neighbors_tsv(const std::string& path) {
  auto in = text::open_input(path);
  std::string line;
  if (!std::getline(in, line) || text::chomp(line) != kNeighborHeader) {
    throw Error(ErrorCode::MalformedRow, path + ":1: expected neighbor header", 1);
  }
  std::vector<NeighborList> lists;
  std::int64_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto view = text::chomp(line);
    if (view.empty()) continue;
    const auto f = text::split(view);
    const auto q = f.size() == 4 ? text::parse_int<std::uint64_t>(f[0]) : std::nullopt;
    const auto k = f.size() == 4 ? text::parse_int<std::uint64_t>(f[1]) : std::nullopt;
    const auto r = f.size() == 4 ? text::parse_int<std::uint64_t>(f[2]) : std::nullopt;
    const auto s = f.size() == 4 ? text::parse_double(f[3]) : std::nullopt;
    if (!q || !k || !r || !s) {
      throw Error(ErrorCode::MalformedRow, path + ":" + std::to_string(line_no) + ": malformed neighbor row", line_no);
    }
    detail::append_record(lists, *q, *k, *r, *s, path + ":" + std::to_string(line_no));
  }
  return lists;
}

inline std::vector<NeighborList> read_neighbors_bin(const std::string& path) {
  auto in = text::open_input(path);
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto* p = reinterpret_cast<const unsigned char*>(buf.data());
  constexpr std::size_t kRecord = 8 + 4 + 8 + 8;
  if (buf.size() < 12 || std::memcmp(p, kNeighborMagic, 4) != 0) {
    throw Error(ErrorCode::BadMagic, path + " does not start with HSN1");
  }
  const auto records = detail::get_le<std::uint64_t>(p + 4);
  if ((buf.size() - 12) % kRecord != 0 || (buf.size() - 12) / kRecord != records) {
    throw Error(ErrorCode::HeaderMismatch, path + ": record count does not match payload");
  }
  std::vector<NeighborList> lists;
  for (std::uint64_t k = 0; k < records; ++k) {
    const auto* rec = p + 12 + k * kRecord;
    detail::append_record(lists, detail::get_le<std::uint64_t>(rec), detail::get_le<std::uint32_t>(rec + 8),
                          detail::get_le<std::uint64_t>(rec + 12),
                          std::bit_cast<double>(detail::get_le<std::uint64_t>(rec + 20)), path);
  }
  return lists;
}

}  // namespace nnprobe
