#pragma once

// On-disk artifacts: binary vector logs, token indices, embedding vocabularies,
// bracketed parse files; plus BPE alignment and frequency-band selection.
//
// Vector log layout (all integers little-endian):
//
//   offset 0   magic  "HSV1"            4 bytes
//   offset 4   dim    u32               4 bytes, > 0
//   offset 8   count  u64               8 bytes
//   offset 16  data   count*dim f32     row-major
//
// The file must end exactly after the payload.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "error.hpp"
#include "text.hpp"

namespace nnprobe {

using RowId = std::size_t;
using SentenceId = std::uint64_t;
using TokenPos = std::uint32_t;

inline constexpr char kVectorMagic[4] = {'H', 'S', 'V', '1'};
inline constexpr std::size_t kVectorHeaderBytes = 16;
inline constexpr std::string_view kTokenHeader = "row_id\tsentence_id\ttoken_id\tsurface\torigin_word\tpos";
inline constexpr std::string_view kVocabHeader = "row_id\ttoken_type";

/// Dense count x dim matrix of finite 32-bit floats.
class VectorSet {
 public:
  VectorSet() = default;

  VectorSet(std::uint32_t dim, std::vector<float> data) : dim_(dim), data_(std::move(data)) {
    if (dim_ == 0) throw Error(ErrorCode::HeaderMismatch, "vector dimensionality must be positive");
    if (data_.size() % dim_ != 0) {
      throw Error(ErrorCode::HeaderMismatch, "payload is not a whole number of rows");
    }
    count_ = data_.size() / dim_;
    for (std::size_t k = 0; k < data_.size(); ++k) {
      if (!std::isfinite(data_[k])) {
        throw Error(ErrorCode::NonFiniteValue,
                    "non-finite value at row " + std::to_string(k / dim_) + ", column " + std::to_string(k % dim_),
                    static_cast<std::int64_t>(k / dim_), static_cast<std::int64_t>(k % dim_));
      }
    }
  }

  std::uint32_t dim() const noexcept { return dim_; }
  std::size_t count() const noexcept { return count_; }
  bool empty() const noexcept { return count_ == 0; }

  std::span<const float> row(RowId r) const { return {data_.data() + r * dim_, dim_}; }
  std::span<const float> data() const noexcept { return data_; }

  friend bool operator==(const VectorSet&, const VectorSet&) = default;

 private:
  std::uint32_t dim_ = 1;
  std::size_t count_ = 0;
  std::vector<float> data_;
};

namespace detail {

template <typename UInt>
void put_le(std::string& out, UInt value) {
  for (std::size_t b = 0; b < sizeof(UInt); ++b) out.push_back(static_cast<char>((value >> (8 * b)) & 0xFF));
}

template <typename UInt>
UInt get_le(const unsigned char* p) {
  UInt value = 0;
  for (std::size_t b = 0; b < sizeof(UInt); ++b) value |= static_cast<UInt>(p[b]) << (8 * b);
  return value;
}

}  // namespace detail

inline void write_vector_log(const std::string& path, const VectorSet& vectors) {
  std::string header(kVectorMagic, 4);
  detail::put_le<std::uint32_t>(header, vectors.dim());
  detail::put_le<std::uint64_t>(header, vectors.count());
  auto out = text::open_output(path);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  const auto data = vectors.data();
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size_bytes()));
  } else {
    std::string buf;
    buf.reserve(data.size_bytes());
    for (float f : data) detail::put_le<std::uint32_t>(buf, std::bit_cast<std::uint32_t>(f));
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  }
  if (!out) throw Error(ErrorCode::IoError, "short write to " + path);
}

inline VectorSet load_vector_log(const std::string& path) {
  auto in = text::open_input(path);
  in.seekg(0, std::ios::end);
  const auto file_size = static_cast<std::uint64_t>(in.tellg());
  in.seekg(0, std::ios::beg);

  unsigned char header[kVectorHeaderBytes];
  if (file_size < 4 || !in.read(reinterpret_cast<char*>(header), 4) ||
      std::memcmp(header, kVectorMagic, 4) != 0) {
    throw Error(ErrorCode::BadMagic, path + " does not start with HSV1");
  }
  if (file_size < kVectorHeaderBytes || !in.read(reinterpret_cast<char*>(header) + 4, kVectorHeaderBytes - 4)) {
    throw Error(ErrorCode::HeaderMismatch, path + ": truncated header");
  }
  const auto dim = detail::get_le<std::uint32_t>(header + 4);
  const auto count = detail::get_le<std::uint64_t>(header + 8);
  if (dim == 0) throw Error(ErrorCode::HeaderMismatch, path + ": dim must be positive");

  const std::uint64_t payload = file_size - kVectorHeaderBytes;
  const std::uint64_t max_rows = std::numeric_limits<std::uint64_t>::max() / (4ull * dim);
  if (count > max_rows || payload != count * dim * 4ull) {
    throw Error(ErrorCode::HeaderMismatch,
                path + ": header declares " + std::to_string(count) + "x" + std::to_string(dim) +
                    " floats but payload holds " + std::to_string(payload) + " bytes");
  }

  std::vector<float> data(count * dim);
  if (!in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(payload))) {
    throw Error(ErrorCode::IoError, path + ": short read");
  }
  if constexpr (std::endian::native != std::endian::little) {
    for (auto& f : data) {
      const auto* p = reinterpret_cast<const unsigned char*>(&f);
      f = std::bit_cast<float>(detail::get_le<std::uint32_t>(p));
    }
  }
  return VectorSet(dim, std::move(data));
}

struct TokenOccurrence {
  RowId row_id = 0;
  SentenceId sentence_id = 0;
  TokenPos token_id = 0;
  std::string surface;
  std::string origin_word;
  std::string pos = "_";

  friend bool operator==(const TokenOccurrence&, const TokenOccurrence&) = default;
};

/// Occurrences indexed by row id, plus per-sentence lengths l(s).
class OccurrenceTable {
 public:
  OccurrenceTable() = default;

  // Occurrences may arrive in any order; they are stored by row_id, which
  // must form the range [0, size). Sentence lengths are 1 + max token_id.
  explicit OccurrenceTable(std::vector<TokenOccurrence> occurrences) {
    const auto n = occurrences.size();
    occurrences_.resize(n);
    std::vector<bool> seen(n, false);
    std::map<std::pair<SentenceId, TokenPos>, RowId> positions;
    for (auto& occ : occurrences) {
      if (occ.row_id >= n || seen[occ.row_id]) {
        throw Error(ErrorCode::MalformedRow,
                    "row_id " + std::to_string(occ.row_id) + " is duplicated or outside [0, " + std::to_string(n) + ")",
                    static_cast<std::int64_t>(occ.row_id));
      }
      seen[occ.row_id] = true;
      const auto [it, inserted] = positions.emplace(std::pair{occ.sentence_id, occ.token_id}, occ.row_id);
      if (!inserted) {
        throw Error(ErrorCode::DuplicatePosition,
                    "position (" + std::to_string(occ.sentence_id) + ", " + std::to_string(occ.token_id) +
                        ") appears more than once",
                    static_cast<std::int64_t>(occ.sentence_id), occ.token_id);
      }
      auto& len = sentence_lengths_[occ.sentence_id];
      len = std::max<TokenPos>(len, occ.token_id + 1);
      const RowId r = occ.row_id;
      occurrences_[r] = std::move(occ);
    }
    position_rank_.resize(n);
    std::uint32_t rank = 0;
    for (const auto& [pos, row] : positions) position_rank_[row] = rank++;
  }

  std::size_t size() const noexcept { return occurrences_.size(); }
  bool empty() const noexcept { return occurrences_.empty(); }
  const TokenOccurrence& operator[](RowId r) const { return occurrences_[r]; }
  const std::vector<TokenOccurrence>& occurrences() const noexcept { return occurrences_; }
  const std::map<SentenceId, TokenPos>& sentence_lengths() const noexcept { return sentence_lengths_; }

  /// Rank of the row in ascending (sentence_id, token_id) order.
  std::uint32_t position_rank(RowId r) const { return position_rank_[r]; }

  std::size_t sentence_count() const noexcept { return sentence_lengths_.size(); }

  /// Sum of l(s) over sentences.
  std::uint64_t total_length() const {
    std::uint64_t total = 0;
    for (const auto& [s, len] : sentence_lengths_) total += len;
    return total;
  }

  TokenPos max_length() const {
    TokenPos best = 0;
    for (const auto& [s, len] : sentence_lengths_) best = std::max(best, len);
    return best;
  }

  /// |S_{l(s) >= j}| for j = 1..max_length, stored at index j-1.
  std::vector<std::uint64_t> length_support() const {
    std::vector<std::uint64_t> support(max_length(), 0);
    for (const auto& [s, len] : sentence_lengths_) {
      for (TokenPos j = 0; j < len; ++j) ++support[j];
    }
    return support;
  }

 private:
  std::vector<TokenOccurrence> occurrences_;
  std::map<SentenceId, TokenPos> sentence_lengths_;
  std::vector<std::uint32_t> position_rank_;
};

inline OccurrenceTable load_token_index(const std::string& path, std::size_t expected_rows) {
  auto in = text::open_input(path);
  std::string line;
  if (!std::getline(in, line) || text::chomp(line) != kTokenHeader) {
    throw Error(ErrorCode::MalformedRow, path + ":1: expected header '" + std::string(kTokenHeader) + "'", 1);
  }
  std::vector<TokenOccurrence> rows;
  std::int64_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto view = text::chomp(line);
    if (view.empty()) continue;
    const auto fields = text::split(view);
    const auto row_id = fields.size() == 6 ? text::parse_int<std::uint64_t>(fields[0]) : std::nullopt;
    const auto sentence = fields.size() == 6 ? text::parse_int<std::uint64_t>(fields[1]) : std::nullopt;
    const auto token = fields.size() == 6 ? text::parse_int<std::uint32_t>(fields[2]) : std::nullopt;
    if (!row_id || !sentence || !token || fields[3].empty()) {
      throw Error(ErrorCode::MalformedRow, path + ":" + std::to_string(line_no) + ": malformed token row", line_no);
    }
    TokenOccurrence occ;
    occ.row_id = *row_id;
    occ.sentence_id = *sentence;
    occ.token_id = *token;
    occ.surface = fields[3];
    occ.origin_word = fields[4].empty() ? std::string(fields[3]) : std::string(fields[4]);
    occ.pos = fields[5].empty() ? "_" : std::string(fields[5]);
    rows.push_back(std::move(occ));
  }
  if (rows.size() != expected_rows) {
    throw Error(ErrorCode::RowCountMismatch,
                path + " has " + std::to_string(rows.size()) + " rows but the vector log has " +
                    std::to_string(expected_rows));
  }
  return OccurrenceTable(std::move(rows));
}

inline OccurrenceTable load_token_index(const std::string& path, const VectorSet& vectors) {
  return load_token_index(path, vectors.count());
}

inline void write_token_index(const std::string& path, const OccurrenceTable& table) {
  auto out = text::open_output(path);
  out << kTokenHeader << '\n';
  for (const auto& occ : table.occurrences()) {
    out << occ.row_id << '\t' << occ.sentence_id << '\t' << occ.token_id << '\t' << occ.surface << '\t'
        << occ.origin_word << '\t' << occ.pos << '\n';
  }
}

/// Embedding vocabulary: type string per embedding row.
inline std::vector<std::string> load_vocab(const std::string& path, std::size_t expected_rows) {
  auto in = text::open_input(path);
  std::string line;
  if (!std::getline(in, line) || text::chomp(line) != kVocabHeader) {
    throw Error(ErrorCode::MalformedRow, path + ":1: expected header '" + std::string(kVocabHeader) + "'", 1);
  }
  std::vector<std::pair<std::uint64_t, std::string>> rows;
  std::int64_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto view = text::chomp(line);
    if (view.empty()) continue;
    const auto fields = text::split(view);
    const auto row_id = fields.size() == 2 ? text::parse_int<std::uint64_t>(fields[0]) : std::nullopt;
    if (!row_id || fields[1].empty()) {
      throw Error(ErrorCode::MalformedRow, path + ":" + std::to_string(line_no) + ": malformed vocab row", line_no);
    }
    rows.emplace_back(*row_id, std::string(fields[1]));
  }
  if (rows.size() != expected_rows) {
    throw Error(ErrorCode::RowCountMismatch,
                path + " has " + std::to_string(rows.size()) + " rows but the embedding log has " +
                    std::to_string(expected_rows));
  }
  std::vector<std::string> vocab(rows.size());
  std::vector<bool> seen(rows.size(), false);
  for (auto& [id, type] : rows) {
    if (id >= rows.size() || seen[id]) {
      throw Error(ErrorCode::MalformedRow, path + ": vocab row_id " + std::to_string(id) + " is not a bijection");
    }
    seen[id] = true;
    vocab[id] = std::move(type);
  }
  return vocab;
}

inline void write_vocab(const std::string& path, const std::vector<std::string>& vocab) {
  auto out = text::open_output(path);
  out << kVocabHeader << '\n';
  for (std::size_t r = 0; r < vocab.size(); ++r) out << r << '\t' << vocab[r] << '\n';
}

/// One bracketed tree per line; index = sentence_id. Blank lines are kept
/// as empty entries so that numbering is preserved.
inline std::vector<std::string> load_parse_lines(const std::string& path) {
  auto in = text::open_input(path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.emplace_back(text::chomp(line));
  return lines;
}

/// Maps every BPE segment of one sentence to the index of its word.
struct SegmentMap {
  std::vector<std::size_t> segment_to_word;
  friend bool operator==(const SegmentMap&, const SegmentMap&) = default;
};

// A segment carrying the continuation marker must not end its word, and a
// segment without it must end exactly at a word boundary.
inline SegmentMap align_bpe(const std::vector<std::string>& words, const std::vector<std::string>& segments,
                            std::string_view marker = "@@") {
  if (words.empty() || segments.empty()) throw Error(ErrorCode::EmptyInput, "align_bpe needs words and segments");
  SegmentMap map;
  map.segment_to_word.reserve(segments.size());
  std::size_t word = 0;
  std::size_t offset = 0;  // characters of words[word] already consumed
  for (std::size_t k = 0; k < segments.size(); ++k) {
    std::string_view seg = segments[k];
    const bool continues = !marker.empty() && seg.size() >= marker.size() &&
                           seg.substr(seg.size() - marker.size()) == marker;
    if (continues) seg.remove_suffix(marker.size());
    if (seg.empty() || word >= words.size()) {
      throw Error(ErrorCode::AlignmentFailure, "segment " + std::to_string(k) + " has no word to align to",
                  static_cast<std::int64_t>(k));
    }
    const std::string_view target = words[word];
    if (target.substr(offset, seg.size()) != seg) {
      throw Error(ErrorCode::AlignmentFailure,
                  "segment " + std::to_string(k) + " '" + segments[k] + "' does not match word '" + words[word] + "'",
                  static_cast<std::int64_t>(k));
    }
    map.segment_to_word.push_back(word);
    offset += seg.size();
    const bool word_done = offset == target.size();
    if (word_done == continues) {
      throw Error(ErrorCode::AlignmentFailure,
                  "segment " + std::to_string(k) + " '" + segments[k] + "' crosses the boundary of word '" +
                      words[word] + "'",
                  static_cast<std::int64_t>(k));
    }
    if (word_done) {
      ++word;
      offset = 0;
    }
  }
  if (word != words.size()) {
    throw Error(ErrorCode::AlignmentFailure, "segments cover only " + std::to_string(word) + " of " +
                                                 std::to_string(words.size()) + " words");
  }
  return map;
}

/// Rows whose surface-type frequency lies in [min_freq, max_freq], ascending.
struct QuerySet {
  std::vector<RowId> rows;
};

inline std::unordered_map<std::string, std::uint64_t> surface_frequencies(const OccurrenceTable& table) {
  std::unordered_map<std::string, std::uint64_t> freq;
  for (const auto& occ : table.occurrences()) ++freq[occ.surface];
  return freq;
}

inline QuerySet apply_frequency_band(const OccurrenceTable& table, std::uint64_t min_freq, std::uint64_t max_freq) {
  QuerySet queries;
  if (min_freq > max_freq) return queries;
  const auto freq = surface_frequencies(table);
  for (const auto& occ : table.occurrences()) {
    const auto f = freq.at(occ.surface);
    if (f >= min_freq && f <= max_freq) queries.rows.push_back(occ.row_id);
  }
  return queries;
}

}  // namespace nnprobe
