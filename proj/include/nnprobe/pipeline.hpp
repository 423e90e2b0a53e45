#pragma once

// Analysis driver: stage sequencing, output files, report tables and the
// run manifest.
//
// Output directory layout:
//   neighbors.tsv      query_row rank neighbor_row score
//   neighbors.bin      binary mirror (optional)
//   coverage.tsv       per-occurrence EMBED / LEXICON coverage
//   strata.tsv         per-POS mean coverage and σ²
//   positional.tsv     series position value support
//   figure_*.tsv       one file per positional series: position value support
//   concentration.tsv  per-occurrence concentration
//   treesim.tsv        averaged PARSEVAL fields
//   tables.txt         human-readable tables
//   manifest.json      config, input digests, counts, stage notes, timing
//
// Every file except manifest.json is a pure function of config and inputs.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "corpusio.hpp"
#include "digest.hpp"
#include "error.hpp"
#include "knn.hpp"
#include "lexicon.hpp"
#include "metrics.hpp"
#include "text.hpp"
#include "treesim.hpp"

namespace nnprobe {

inline constexpr std::string_view kToolVersion = "0.1.0";

enum Stage : unsigned {
  kStageKnn = 1u << 0,
  kStageCoverage = 1u << 1,
  kStageTreesim = 1u << 2,
  kStageConcentration = 1u << 3,
  kStageReport = 1u << 4,
  kAllStages = kStageKnn | kStageCoverage | kStageTreesim | kStageConcentration | kStageReport,
};

struct AnalysisConfig {
  std::size_t n = 10;
  std::uint64_t min_freq = 10;
  std::uint64_t max_freq = 2000;
  Exclusion exclusion = Exclusion::SameType;
  CountingMode counting = CountingMode::PerSlot;
  CoverageKey embed_key = CoverageKey::Surface;
  CoverageKey lexicon_key = CoverageKey::OriginWord;
  VarianceMode variance = VarianceMode::Occurrence;
  MissingMode missing = MissingMode::Zero;
  bool fold_case = false;
  bool lexicon_pos_filter = false;
  std::string bpe_marker = "@@";

  std::string vectors;
  std::string tokens;
  std::string embeddings;  // optional, with vocab
  std::string vocab;
  std::string parses;      // optional
  std::string lexicon;     // optional
  std::string neighbors_in;  // optional precomputed neighbors (.tsv or .bin)
  std::string output_dir = "out";
  bool binary_neighbors = false;
  unsigned threads = 0;
};

struct RunManifest {
  nlohmann::ordered_json doc;
};

namespace detail {

inline bool uses_tables(unsigned stages) { return stages & (kStageKnn | kStageCoverage | kStageTreesim | kStageConcentration); }

inline void require_file(const std::string& path, const char* what) {
  if (!std::filesystem::is_regular_file(path)) {
    throw Error(ErrorCode::ConfigError, std::string(what) + " path '" + path + "' does not exist");
  }
}

inline void validate_config(const AnalysisConfig& c, unsigned stages) {
  if (c.n == 0) throw Error(ErrorCode::ConfigError, "n must be at least 1");
  if (c.min_freq > c.max_freq) throw Error(ErrorCode::ConfigError, "min_freq must not exceed max_freq");
  if (c.output_dir.empty()) throw Error(ErrorCode::ConfigError, "output directory is required");
  if (uses_tables(stages)) {
    if (c.vectors.empty() || c.tokens.empty()) throw Error(ErrorCode::ConfigError, "vectors and tokens paths are required");
    require_file(c.vectors, "vectors");
    require_file(c.tokens, "tokens");
  }
  if (c.embeddings.empty() != c.vocab.empty()) {
    throw Error(ErrorCode::ConfigError, "embeddings and vocab must be given together");
  }
  if (!c.embeddings.empty()) require_file(c.embeddings, "embeddings");
  if (!c.vocab.empty()) require_file(c.vocab, "vocab");
  if (!c.parses.empty()) require_file(c.parses, "parses");
  if (!c.lexicon.empty()) require_file(c.lexicon, "lexicon");
  if (!c.neighbors_in.empty()) require_file(c.neighbors_in, "neighbors");
}

inline std::string_view to_string(CountingMode m) { return m == CountingMode::PerSlot ? "per-slot" : "distinct"; }
inline std::string_view to_string(CoverageKey k) { return k == CoverageKey::Surface ? "surface" : "origin"; }
inline std::string_view to_string(VarianceMode m) { return m == VarianceMode::Occurrence ? "occurrence" : "type"; }
inline std::string_view to_string(MissingMode m) { return m == MissingMode::Zero ? "zero" : "skip"; }

inline nlohmann::ordered_json config_json(const AnalysisConfig& c) {
  nlohmann::ordered_json j;
  j["n"] = c.n;
  j["min_freq"] = c.min_freq;
  j["max_freq"] = c.max_freq;
  j["exclusion"] = nnprobe::to_string(c.exclusion);
  j["counting"] = to_string(c.counting);
  j["embed_key"] = to_string(c.embed_key);
  j["lexicon_key"] = to_string(c.lexicon_key);
  j["variance"] = to_string(c.variance);
  j["missing"] = to_string(c.missing);
  j["fold_case"] = c.fold_case;
  j["lexicon_pos_filter"] = c.lexicon_pos_filter;
  j["bpe_marker"] = c.bpe_marker;
  j["vectors"] = c.vectors;
  j["tokens"] = c.tokens;
  j["embeddings"] = c.embeddings;
  j["vocab"] = c.vocab;
  j["parses"] = c.parses;
  j["lexicon"] = c.lexicon;
  j["neighbors_in"] = c.neighbors_in;
  j["output_dir"] = c.output_dir;
  j["binary_neighbors"] = c.binary_neighbors;
  j["threads"] = resolve_threads(c.threads);
  return j;
}

}  // namespace detail

// ---- output writers --------------------------------------------------------

inline void write_coverage_tsv(const std::string& path, const std::vector<CoverageRecord>& records) {
  auto out = text::open_output(path);
  out << "query_row\tsentence_id\ttoken_id\tkind\tnumerator\tdenominator\tvalue\n";
  for (const auto& r : records) {
    out << r.row << '\t' << r.sentence_id << '\t' << r.token_id << '\t' << to_string(r.kind) << '\t' << r.numerator
        << '\t' << r.denominator << '\t' << text::fixed(r.value) << '\n';
  }
}

inline void write_concentration_tsv(const std::string& path, const std::vector<ConcentrationRecord>& records) {
  auto out = text::open_output(path);
  out << "query_row\tsentence_id\ttoken_id\tvalue\n";
  for (const auto& r : records) {
    out << r.row << '\t' << r.sentence_id << '\t' << r.token_id << '\t' << text::fixed(r.value) << '\n';
  }
}

inline void write_strata_tsv(const std::string& path,
                             const std::vector<std::pair<CoverageKind, StratifiedTable>>& tables) {
  auto out = text::open_output(path);
  out << "kind\tbucket\tmean_pct\tvar\tcount\n";
  for (const auto& [kind, table] : tables) {
    for (const auto& row : table.rows) {
      out << to_string(kind) << '\t' << row.bucket << '\t' << text::fixed(row.mean_pct) << '\t'
          << text::fixed(row.variance) << '\t' << row.count << '\n';
    }
  }
}

inline void write_positional_tsv(const std::string& path, const std::vector<PositionalSeries>& series) {
  auto out = text::open_output(path);
  out << "series\tposition\tvalue\tsupport\n";
  for (const auto& s : series) {
    for (const auto& p : s.points) {
      out << to_string(s.kind) << '\t' << p.position << '\t' << text::fixed(p.value) << '\t' << p.support << '\n';
    }
  }
}

/// One TSV per series kind (`figure_<kind>.tsv`), columns position, value,
/// support; positions without support are left out. Returns written paths.
inline std::vector<std::string> emit_figure_data(const std::vector<PositionalSeries>& series,
                                                 const std::filesystem::path& dir) {
  std::vector<std::string> written;
  for (const auto& s : series) {
    const auto path = (dir / ("figure_" + std::string(to_string(s.kind)) + ".tsv")).string();
    auto out = text::open_output(path);
    out << "position\tvalue\tsupport\n";
    for (const auto& p : s.points) {
      if (p.support == 0) continue;
      out << p.position << '\t' << text::fixed(p.value) << '\t' << p.support << '\n';
    }
    written.push_back(path);
  }
  return written;
}

inline void write_treesim_tsv(const std::string& path, const TreesimSummary& s) {
  auto out = text::open_output(path);
  out << "precision\trecall\tmatched_brackets\tcross_brackets\ttag_accuracy\tpair_count\tskipped_pairs\n";
  out << text::fixed(s.precision) << '\t' << text::fixed(s.recall) << '\t' << text::fixed(s.matched_brackets) << '\t'
      << text::fixed(s.cross_brackets) << '\t' << text::fixed(s.tag_accuracy) << '\t' << s.pair_count << '\t'
      << s.skipped_pairs << '\n';
}

// ---- report ----------------------------------------------------------------

namespace detail {

inline std::vector<std::vector<std::string>> read_tsv_rows(const std::filesystem::path& path) {
  std::vector<std::vector<std::string>> rows;
  std::ifstream in(path);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      header = false;
      continue;
    }
    const auto view = text::chomp(line);
    if (view.empty()) continue;
    std::vector<std::string> fields;
    for (auto f : text::split(view)) fields.emplace_back(f);
    rows.push_back(std::move(fields));
  }
  return rows;
}

}  // namespace detail

/// Renders coverage tables (POS, %, σ²) and the parse-similarity row from
/// strata.tsv and treesim.tsv in `dir`.
inline std::string render_tables(const std::filesystem::path& dir) {
  std::ostringstream out;
  const auto strata_path = dir / "strata.tsv";
  const auto pct = [](const std::string& s) {
    const auto v = text::parse_double(s);
    return v ? text::fixed(*v, 0) : s;
  };
  for (const auto& [kind, title] : {std::pair{"EMBED", "Coverage by embedding nearest neighbors"},
                                    std::pair{"LEXICON", "Coverage by lexicon relations"}}) {
    out << title << '\n';
    bool any = false;
    if (std::filesystem::exists(strata_path)) {
      char line[128];
      std::snprintf(line, sizeof line, "  %-8s %10s %8s %10s\n", "POS", "coverage", "σ²", "count");
      out << line;
      for (const auto& row : detail::read_tsv_rows(strata_path)) {
        if (row.size() != 5 || row[0] != kind) continue;
        const auto label = row[1] == "All" ? std::string("All POS") : row[1];
        const auto var = text::parse_double(row[3]);
        std::snprintf(line, sizeof line, "  %-8s %9s%% %8s %10s\n", label.c_str(), pct(row[2]).c_str(),
                      var ? text::fixed(*var, 1).c_str() : row[3].c_str(), row[4].c_str());
        out << line;
        any = true;
      }
    }
    if (!any) out << "  (not available)\n";
    out << '\n';
  }

  out << "Average parse tree similarity (PARSEVAL)\n";
  const auto treesim_path = dir / "treesim.tsv";
  const auto rows = std::filesystem::exists(treesim_path) ? detail::read_tsv_rows(treesim_path)
                                                           : std::vector<std::vector<std::string>>{};
  if (rows.size() == 1 && rows[0].size() == 7) {
    const auto two = [](const std::string& s) {
      const auto v = text::parse_double(s);
      return v ? text::fixed(*v, 2) : s;
    };
    char line[160];
    std::snprintf(line, sizeof line, "  %9s %9s %16s %14s %12s %10s %8s\n", "Precision", "Recall", "Matched Brackets",
                  "Cross Brackets", "Tag Accuracy", "pairs", "skipped");
    out << line;
    std::snprintf(line, sizeof line, "  %9s %9s %16s %14s %12s %10s %8s\n", two(rows[0][0]).c_str(),
                  two(rows[0][1]).c_str(), two(rows[0][2]).c_str(), two(rows[0][3]).c_str(), two(rows[0][4]).c_str(),
                  rows[0][5].c_str(), rows[0][6].c_str());
    out << line;
  } else {
    out << "  (not available)\n";
  }
  return out.str();
}

// ---- driver ----------------------------------------------------------------

/// Exit status for the command-line tool.
inline int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigError:
    case ErrorCode::SpecError:
      return 2;
    case ErrorCode::IoError:
    case ErrorCode::BadMagic:
    case ErrorCode::HeaderMismatch:
    case ErrorCode::NonFiniteValue:
    case ErrorCode::RowCountMismatch:
    case ErrorCode::DuplicatePosition:
    case ErrorCode::MalformedRow:
    case ErrorCode::SizeMismatch:
    case ErrorCode::InputInconsistency:
    case ErrorCode::UnknownRelationTag:
      return 3;
    default:
      return 4;
  }
}

struct PipelineResult {
  RunManifest manifest;
  std::vector<std::string> outputs;  // file names written, relative to output_dir
};

class Pipeline {
 public:
  Pipeline(AnalysisConfig config, unsigned stages) : config_(std::move(config)), stages_(stages) {}

  PipelineResult run() {
    const auto dir = std::filesystem::path(config_.output_dir);
    auto& m = result_.manifest.doc;
    m["tool"] = "nnprobe";
    m["version"] = kToolVersion;
    m["status"] = "running";
    m["config"] = detail::config_json(config_);
    m["inputs"] = nlohmann::ordered_json::object();
    m["counts"] = nlohmann::ordered_json::object();
    m["stages"] = nlohmann::ordered_json::object();
    m["notes"] = nlohmann::ordered_json::array();
    m["timing_seconds"] = nlohmann::ordered_json::object();

    std::string stage = "config";
    try {
      detail::validate_config(config_, stages_);
      std::filesystem::create_directories(dir);
      stage = "digest";
      for (const auto* path : {&config_.vectors, &config_.tokens, &config_.embeddings, &config_.vocab,
                               &config_.parses, &config_.lexicon, &config_.neighbors_in}) {
        if (!path->empty() && detail::uses_tables(stages_)) m["inputs"][*path] = sha256_file(*path);
      }
      if (detail::uses_tables(stages_)) {
        stage = "load";
        timed("load", [&] { load(); });
        stage = "knn";
        timed("knn", [&] { neighbors(); });
        if (stages_ & kStageCoverage) {
          stage = "coverage";
          timed("coverage", [&] { coverage(); });
        }
        if (stages_ & kStageConcentration) {
          stage = "concentration";
          timed("concentration", [&] { concentration_stage(); });
        }
        if (stages_ & kStageTreesim) {
          stage = "treesim";
          timed("treesim", [&] { treesim(); });
        }
        if (!positional_.empty()) {
          write_positional_tsv((dir / "positional.tsv").string(), positional_);
          output("positional.tsv");
          for (const auto& p : emit_figure_data(positional_, dir)) {
            output(std::filesystem::path(p).filename().string());
          }
        }
      }
      if (stages_ & kStageReport) {
        stage = "report";
        const auto tables = render_tables(dir);
        auto out = text::open_output((dir / "tables.txt").string());
        out << tables;
        output("tables.txt");
        m["stages"]["report"] = "done";
      }
      m["status"] = "ok";
      write_manifest(dir);
    } catch (const Error& e) {
      m["status"] = "failed";
      m["failed_stage"] = stage;
      m["error"] = e.what();
      write_manifest_quietly(dir);
      if (e.code() == ErrorCode::ConfigError || stage == "config") throw;
      throw Error(e.code(), "stage " + stage + ": " + e.what(), e.row(), e.col());
    } catch (const std::exception& e) {
      m["status"] = "failed";
      m["failed_stage"] = stage;
      m["error"] = e.what();
      write_manifest_quietly(dir);
      throw Error(ErrorCode::StageFailure, "stage " + stage + ": " + e.what());
    }
    return std::move(result_);
  }

  const std::vector<NeighborList>& neighbor_lists() const { return lists_; }
  const std::vector<CoverageRecord>& embed_records() const { return embed_records_; }
  const std::vector<CoverageRecord>& lexicon_records() const { return lexicon_records_; }
  const std::vector<ConcentrationRecord>& concentration_records() const { return concentration_records_; }
  const std::vector<PositionalSeries>& positional() const { return positional_; }
  const std::optional<TreesimSummary>& treesim_summary() const { return treesim_; }

 private:
  template <typename F>
  void timed(const char* name, F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    const auto t1 = std::chrono::steady_clock::now();
    result_.manifest.doc["timing_seconds"][name] = std::chrono::duration<double>(t1 - t0).count();
  }

  void output(const std::string& name) { result_.outputs.push_back(name); }
  std::filesystem::path out_path(const char* name) const { return std::filesystem::path(config_.output_dir) / name; }

  void note(const std::string& stage, const std::string& what) {
    auto& m = result_.manifest.doc;
    m["stages"][stage] = what;
    m["notes"].push_back(stage + ": " + what);
  }

  void load() {
    vectors_ = load_vector_log(config_.vectors);
    table_ = load_token_index(config_.tokens, vectors_);
    auto& c = result_.manifest.doc["counts"];
    c["sentences"] = table_.sentence_count();
    c["tokens"] = table_.size();
    c["total_length"] = table_.total_length();
    c["dim"] = vectors_.dim();
  }

  void neighbors() {
    index_.emplace(vectors_, table_);
    auto& c = result_.manifest.doc["counts"];
    if (!config_.neighbors_in.empty()) {
      const bool binary = std::filesystem::path(config_.neighbors_in).extension() == ".bin";
      lists_ = binary ? read_neighbors_bin(config_.neighbors_in) : read_neighbors_tsv(config_.neighbors_in);
      for (const auto& l : lists_) {
        bool bad = l.query >= table_.size();
        for (const auto& e : l.entries) bad = bad || e.row >= table_.size();
        if (bad) {
          throw Error(ErrorCode::InputInconsistency,
                      config_.neighbors_in + ": query row " + std::to_string(l.query) + " refers outside the token table");
        }
      }
      c["queries"] = lists_.size();
      c["neighbor_source"] = config_.neighbors_in;
    } else {
      const auto queries = apply_frequency_band(table_, config_.min_freq, config_.max_freq);
      auto run = all_neighbors(*index_, queries, config_.n, config_.exclusion, config_.threads);
      lists_ = std::move(run.lists);
      c["queries"] = queries.rows.size();
      c["skipped_queries"] = run.skipped.size();
      c["unqueryable_rows"] = table_.size() - index_->queryable_count();
    }
    std::size_t short_lists = 0;
    for (const auto& l : lists_) short_lists += l.short_list || l.entries.size() < config_.n;
    c["short_lists"] = short_lists;
    if (stages_ & kStageKnn) {
      write_neighbors_tsv(out_path("neighbors.tsv").string(), lists_);
      output("neighbors.tsv");
      if (config_.binary_neighbors) {
        write_neighbors_bin(out_path("neighbors.bin").string(), lists_);
        output("neighbors.bin");
      }
      result_.manifest.doc["stages"]["knn"] = "done";
    }
  }

  void coverage() {
    auto& c = result_.manifest.doc["counts"];
    std::vector<std::pair<CoverageKind, StratifiedTable>> strata;

    if (!config_.embeddings.empty()) {
      embeddings_ = load_vector_log(config_.embeddings);
      auto vocab = load_vocab(config_.vocab, embeddings_.count());
      EmbeddingIndex emb(embeddings_, std::move(vocab));

      std::vector<std::string> types;
      std::set<std::string> seen;
      std::uint64_t unknown = 0;
      for (const auto& l : lists_) {
        const auto& t = key_type(l.query);
        if (!emb.queryable(t)) continue;
        if (seen.insert(t).second) types.push_back(t);
      }
      auto type_lists = emb.neighbors_batch(types, config_.n, resolve_threads(config_.threads));
      std::unordered_map<std::string, std::size_t> slot;
      for (std::size_t k = 0; k < types.size(); ++k) slot.emplace(types[k], k);

      for (const auto& l : lists_) {
        if (l.entries.empty()) continue;
        const auto it = slot.find(key_type(l.query));
        if (it == slot.end()) {
          ++unknown;
          continue;
        }
        embed_records_.push_back(
            embedding_coverage(l, type_lists[it->second], table_, config_.embed_key, config_.counting));
      }
      c["embed_records"] = embed_records_.size();
      c["embed_queries_without_embedding"] = unknown;
      strata.emplace_back(CoverageKind::Embed, stratify_by_pos(embed_records_, table_, config_.variance));
      positional_.push_back(positional_mean(values_of(embed_records_), table_, SeriesKind::AcpEmbed, config_.missing));
    } else {
      note("coverage.embed", "skipped (no embeddings path)");
    }

    if (!config_.lexicon.empty()) {
      const auto lexicon = load_relations(config_.lexicon);
      for (const auto& l : lists_) {
        if (l.entries.empty()) continue;
        const auto& occ = table_[l.query];
        const auto related =
            lexicon.related_set(occ.origin_word,
                                config_.lexicon_pos_filter ? std::optional<std::string>(occ.pos) : std::nullopt,
                                config_.fold_case);
        lexicon_records_.push_back(lexical_coverage(l, related, table_, config_.lexicon_key, config_.counting));
      }
      c["lexicon_records"] = lexicon_records_.size();
      strata.emplace_back(CoverageKind::Lexicon, stratify_by_pos(lexicon_records_, table_, config_.variance));
      positional_.push_back(
          positional_mean(values_of(lexicon_records_), table_, SeriesKind::AcpLexicon, config_.missing));
    } else {
      note("coverage.lexicon", "skipped (no lexicon path)");
    }

    std::vector<CoverageRecord> all(embed_records_);
    all.insert(all.end(), lexicon_records_.begin(), lexicon_records_.end());
    write_coverage_tsv(out_path("coverage.tsv").string(), all);
    write_strata_tsv(out_path("strata.tsv").string(), strata);
    output("coverage.tsv");
    output("strata.tsv");
    result_.manifest.doc["stages"]["coverage"] = "done";
  }

  const std::string& key_type(RowId row) const {
    return config_.embed_key == CoverageKey::Surface ? table_[row].surface : table_[row].origin_word;
  }

  void concentration_stage() {
    for (const auto& l : lists_) {
      if (!l.entries.empty()) concentration_records_.push_back(concentration(l, table_));
    }
    write_concentration_tsv(out_path("concentration.tsv").string(), concentration_records_);
    output("concentration.tsv");
    positional_.push_back(positional_mean(values_of(concentration_records_), table_, SeriesKind::Av, config_.missing));
    result_.manifest.doc["counts"]["concentration_records"] = concentration_records_.size();
    result_.manifest.doc["stages"]["concentration"] = "done";
  }

  void treesim() {
    if (config_.parses.empty()) {
      note("treesim", "skipped");
      return;
    }
    const auto lines = load_parse_lines(config_.parses);
    const auto assignment = assign_subtrees(table_, lines, config_.bpe_marker);
    treesim_ = average_treesim(lists_, assignment.by_row);
    write_treesim_tsv(out_path("treesim.tsv").string(), *treesim_);
    output("treesim.tsv");
    auto& c = result_.manifest.doc["counts"];
    c["treesim_pairs"] = treesim_->pair_count;
    c["treesim_skipped_pairs"] = treesim_->skipped_pairs;
    c["sentences_without_parse"] = assignment.sentences_without_parse;
    c["sentences_misaligned"] = assignment.sentences_misaligned;
    result_.manifest.doc["stages"]["treesim"] = "done";
    result_.manifest.doc["notes"].push_back(
        "treesim: subtrees of different sentences are compared as local labeled spans; tag accuracy divides by the "
        "longer yield");
  }

  void write_manifest(const std::filesystem::path& dir) {
    auto out = text::open_output((dir / "manifest.json").string());
    out << result_.manifest.doc.dump(2) << '\n';
  }

  void write_manifest_quietly(const std::filesystem::path& dir) {
    try {
      std::filesystem::create_directories(dir);
      write_manifest(dir);
    } catch (...) {
    }
  }

  AnalysisConfig config_;
  unsigned stages_;
  PipelineResult result_;
  VectorSet vectors_;
  VectorSet embeddings_;
  OccurrenceTable table_;
  std::optional<SimilarityIndex> index_;
  std::vector<NeighborList> lists_;
  std::vector<CoverageRecord> embed_records_;
  std::vector<CoverageRecord> lexicon_records_;
  std::vector<ConcentrationRecord> concentration_records_;
  std::vector<PositionalSeries> positional_;
  std::optional<TreesimSummary> treesim_;
};

inline PipelineResult run_pipeline(const AnalysisConfig& config, unsigned stages = kAllStages) {
  return Pipeline(config, stages).run();
}

}  // namespace nnprobe
