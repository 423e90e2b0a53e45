#pragma once

// Coverage, concentration, positional means and POS-stratified summaries.
// All reductions run in a fixed order so results do not depend on how the
// inputs were produced.

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "corpusio.hpp"
#include "error.hpp"
#include "knn.hpp"

namespace nnprobe {

enum class CoverageKind { Embed, Lexicon };

constexpr std::string_view to_string(CoverageKind k) { return k == CoverageKind::Embed ? "EMBED" : "LEXICON"; }

// PerSlot: each neighbor entry counts, denominator is the list length.
// Distinct: both sides count distinct neighbor keys.
enum class CountingMode { PerSlot, Distinct };

// Which occurrence field is compared against the reference set.
enum class CoverageKey { Surface, OriginWord };

struct CoverageRecord {
  RowId row = 0;
  SentenceId sentence_id = 0;
  TokenPos token_id = 0;
  CoverageKind kind = CoverageKind::Embed;
  std::size_t numerator = 0;
  std::size_t denominator = 0;
  double value = 0.0;
};

struct ConcentrationRecord {
  RowId row = 0;
  SentenceId sentence_id = 0;
  TokenPos token_id = 0;
  double value = 0.0;
};

namespace detail {

inline const std::string& key_of(const TokenOccurrence& occ, CoverageKey key) {
  return key == CoverageKey::Surface ? occ.surface : occ.origin_word;
}

template <typename Contains>
CoverageRecord coverage(const NeighborList& neighbors, const OccurrenceTable& table, CoverageKind kind,
                        CoverageKey key, CountingMode mode, Contains&& contains) {
  if (neighbors.entries.empty()) {
    throw Error(ErrorCode::EmptyNeighborList, "row " + std::to_string(neighbors.query) + " has no neighbors",
                static_cast<std::int64_t>(neighbors.query));
  }
  CoverageRecord rec;
  rec.row = neighbors.query;
  rec.sentence_id = table[neighbors.query].sentence_id;
  rec.token_id = table[neighbors.query].token_id;
  rec.kind = kind;
  if (mode == CountingMode::PerSlot) {
    for (const auto& e : neighbors.entries) rec.numerator += contains(key_of(table[e.row], key)) ? 1 : 0;
    rec.denominator = neighbors.entries.size();
  } else {
    std::set<std::string> keys;
    for (const auto& e : neighbors.entries) keys.insert(key_of(table[e.row], key));
    for (const auto& k : keys) rec.numerator += contains(k) ? 1 : 0;
    rec.denominator = keys.size();
  }
  rec.value = static_cast<double>(rec.numerator) / static_cast<double>(rec.denominator);
  return rec;
}

}  // namespace detail

/// |N^H ∩ N^E_w| / |N^H|: neighbors whose type appears among the
/// embedding neighbors of the query's type.
inline CoverageRecord embedding_coverage(const NeighborList& neighbors, const TypeNeighborList& type_neighbors,
                                         const OccurrenceTable& table, CoverageKey key = CoverageKey::Surface,
                                         CountingMode mode = CountingMode::PerSlot) {
  std::unordered_set<std::string> types;
  for (const auto& e : type_neighbors.entries) types.insert(e.type);
  return detail::coverage(neighbors, table, CoverageKind::Embed, key, mode,
                          [&](const std::string& w) { return types.count(w) != 0; });
}

/// |N^H ∩ R_w| / |N^H| with R_w from RelationLexicon::related_set.
inline CoverageRecord lexical_coverage(const NeighborList& neighbors, const std::set<std::string>& relations,
                                       const OccurrenceTable& table, CoverageKey key = CoverageKey::OriginWord,
                                       CountingMode mode = CountingMode::PerSlot) {
  return detail::coverage(neighbors, table, CoverageKind::Lexicon, key, mode,
                          [&](const std::string& w) { return relations.count(w) != 0; });
}

/// v = (1/n) Σ_k (1 - x_k)^2 over the stored neighbor scores.
inline ConcentrationRecord concentration(const NeighborList& neighbors, const OccurrenceTable& table) {
  if (neighbors.entries.empty()) {
    throw Error(ErrorCode::EmptyNeighborList, "row " + std::to_string(neighbors.query) + " has no neighbors",
                static_cast<std::int64_t>(neighbors.query));
  }
  double sum = 0.0;
  for (const auto& e : neighbors.entries) {
    const double d = 1.0 - e.score;
    sum += d * d;
  }
  ConcentrationRecord rec;
  rec.row = neighbors.query;
  rec.sentence_id = table[neighbors.query].sentence_id;
  rec.token_id = table[neighbors.query].token_id;
  rec.value = sum / static_cast<double>(neighbors.entries.size());
  return rec;
}

enum class SeriesKind { AcpEmbed, AcpLexicon, Av };

constexpr std::string_view to_string(SeriesKind k) {
  switch (k) {
    case SeriesKind::AcpEmbed: return "acp_embed";
    case SeriesKind::AcpLexicon: return "acp_lexicon";
    case SeriesKind::Av: return "av";
  }
  return "?";
}

// Zero: an occurrence without a record adds 0 but its sentence stays in
// the denominator. Skip: the denominator counts only sentences that have a
// record at that position.
enum class MissingMode { Zero, Skip };

/// One per-occurrence value keyed by row.
struct RowValue {
  RowId row = 0;
  double value = 0.0;
};

struct PositionalPoint {
  std::size_t position = 0;  // 1-based
  double value = 0.0;
  std::uint64_t support = 0;  // |S_{l(s) >= j}|
  std::uint64_t contributors = 0;
};

struct PositionalSeries {
  SeriesKind kind = SeriesKind::AcpEmbed;
  std::vector<PositionalPoint> points;
};

inline PositionalSeries positional_mean(const std::vector<RowValue>& records, const OccurrenceTable& table,
                                        SeriesKind kind, MissingMode missing = MissingMode::Zero) {
  const auto support = table.length_support();
  // Sum in ascending (sentence, position) order regardless of input order.
  std::vector<RowValue> ordered(records);
  std::sort(ordered.begin(), ordered.end(), [&](const RowValue& a, const RowValue& b) {
    return table.position_rank(a.row) < table.position_rank(b.row);
  });
  std::vector<double> sums(support.size(), 0.0);
  std::vector<std::uint64_t> contributors(support.size(), 0);
  for (const auto& r : ordered) {
    const auto j = table[r.row].token_id;
    sums[j] += r.value;
    ++contributors[j];
  }
  PositionalSeries series;
  series.kind = kind;
  for (std::size_t j = 0; j < support.size(); ++j) {
    const std::uint64_t denom = missing == MissingMode::Zero ? support[j] : contributors[j];
    if (denom == 0) continue;
    series.points.push_back({j + 1, sums[j] / static_cast<double>(denom), support[j], contributors[j]});
  }
  return series;
}

// Occurrence: σ² is the population variance of per-occurrence values.
// Type: σ² is the population variance of per-surface-type mean values.
enum class VarianceMode { Occurrence, Type };

inline constexpr std::array<std::string_view, 5> kBuckets = {"All", "VERB", "NOUN", "ADJ", "ADV"};

struct StratumRow {
  std::string bucket;
  double mean_pct = 0.0;
  double variance = 0.0;  // population variance of fractions, times 100
  std::uint64_t count = 0;
};

struct StratifiedTable {
  std::vector<StratumRow> rows;  // in kBuckets order; empty buckets omitted
};

namespace detail {

inline double mean_of(const std::vector<double>& xs) {
  double sum = 0.0;
  for (double x : xs) sum += x;
  return sum / static_cast<double>(xs.size());
}

inline double population_variance(const std::vector<double>& xs) {
  const double mean = mean_of(xs);
  double sq = 0.0;
  for (double x : xs) sq += (x - mean) * (x - mean);
  return sq / static_cast<double>(xs.size());
}

}  // namespace detail

inline StratifiedTable stratify_by_pos(const std::vector<CoverageRecord>& records, const OccurrenceTable& table,
                                       VarianceMode mode = VarianceMode::Occurrence) {
  std::vector<CoverageRecord> ordered(records);
  std::sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) { return a.row < b.row; });

  StratifiedTable out;
  for (const auto bucket : kBuckets) {
    std::vector<double> values;
    std::map<std::string, std::vector<double>> by_type;
    for (const auto& rec : ordered) {
      const auto& occ = table[rec.row];
      if (bucket != "All" && occ.pos != bucket) continue;
      values.push_back(rec.value);
      by_type[occ.surface].push_back(rec.value);
    }
    if (values.empty()) continue;
    StratumRow row;
    row.bucket = std::string(bucket);
    row.count = values.size();
    row.mean_pct = detail::mean_of(values) * 100.0;
    if (mode == VarianceMode::Occurrence) {
      row.variance = detail::population_variance(values) * 100.0;
    } else {
      std::vector<double> type_means;
      for (const auto& [type, xs] : by_type) type_means.push_back(detail::mean_of(xs));
      row.variance = detail::population_variance(type_means) * 100.0;
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

inline std::vector<RowValue> values_of(const std::vector<CoverageRecord>& records) {
  std::vector<RowValue> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back({r.row, r.value});
  return out;
}

inline std::vector<RowValue> values_of(const std::vector<ConcentrationRecord>& records) {
  std::vector<RowValue> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back({r.row, r.value});
  return out;
}

}  // namespace nnprobe
