#pragma once

// Synthetic bundles with planted structure, standing in for logged states
// of a trained encoder.
//
// Types are grouped into clusters. Each type's embedding is its cluster
// center plus a fixed per-type offset; each occurrence's hidden state is
// the embedding, optionally blended towards a per-sentence context vector
// (more strongly at later positions), plus isotropic Gaussian noise. The
// lexicon relates types of the same cluster only, and parses come from a
// small phrase template keyed on each cluster's POS.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "corpusio.hpp"
#include "error.hpp"
#include "lexicon.hpp"
#include "text.hpp"

namespace nnprobe {

struct SynthSpec {
  std::size_t clusters = 10;
  std::size_t types_per_cluster = 11;
  std::size_t occurrences_per_type = 20;
  std::uint32_t dim = 32;
  double noise = 0.05;             // per-component standard deviation
  double type_spread = 0.3;        // norm scale of per-type offsets from the center
  double planted_coverage = 1.0;   // probability that two same-cluster types are related
  double context_mixing = 0.0;     // blend weight reached at the last possible position
  std::size_t min_sentence_length = 5;
  std::size_t max_sentence_length = 20;
  std::uint64_t seed = 1;
};

struct LexiconRow {
  std::string word;
  Relation relation;
  std::string related;
  std::string pos;
};

struct SyntheticBundle {
  VectorSet vectors;
  OccurrenceTable table;
  VectorSet embeddings;
  std::vector<std::string> vocab;
  std::vector<std::string> parses;
  std::vector<LexiconRow> lexicon;
  std::vector<std::size_t> cluster_of_type;  // parallel to vocab
};

namespace detail {

struct PosTemplate {
  const char* universal;
  const char* tag;
  const char* phrase;
};

inline constexpr PosTemplate kPosTemplates[] = {
    {"NOUN", "NN", "NP"}, {"VERB", "VB", "VP"}, {"ADJ", "JJ", "ADJP"}, {"ADV", "RB", "ADVP"}};

inline void validate(const SynthSpec& s) {
  const auto fail = [](const std::string& why) { throw Error(ErrorCode::SpecError, why); };
  if (s.dim < 2) fail("dim must be at least 2");
  if (s.clusters == 0 || s.types_per_cluster == 0 || s.occurrences_per_type == 0) {
    fail("clusters, types_per_cluster and occurrences_per_type must be positive");
  }
  if (s.min_sentence_length == 0 || s.min_sentence_length > s.max_sentence_length) {
    fail("sentence length range must satisfy 1 <= min <= max");
  }
  if (!(s.noise >= 0.0) || !(s.type_spread >= 0.0)) fail("noise and type_spread must be non-negative");
  if (!(s.planted_coverage >= 0.0 && s.planted_coverage <= 1.0)) fail("planted_coverage must lie in [0, 1]");
  if (!(s.context_mixing >= 0.0 && s.context_mixing <= 1.0)) fail("context_mixing must lie in [0, 1]");
}

}  // namespace detail

inline SyntheticBundle generate_synthetic(const SynthSpec& spec) {
  detail::validate(spec);
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const std::size_t dim = spec.dim;
  const std::size_t num_types = spec.clusters * spec.types_per_cluster;

  // Centers: coordinate axes when they fit (exactly orthogonal), otherwise
  // random unit vectors.
  std::vector<std::vector<double>> centers(spec.clusters, std::vector<double>(dim, 0.0));
  for (std::size_t k = 0; k < spec.clusters; ++k) {
    if (spec.clusters <= dim) {
      centers[k][k] = 1.0;
    } else {
      double sq = 0.0;
      for (auto& x : centers[k]) {
        x = gauss(rng);
        sq += x * x;
      }
      for (auto& x : centers[k]) x /= std::sqrt(sq);
    }
  }

  SyntheticBundle bundle;
  std::vector<float> emb(num_types * dim);
  const double offset_scale = spec.type_spread / std::sqrt(static_cast<double>(dim));
  for (std::size_t k = 0; k < spec.clusters; ++k) {
    for (std::size_t t = 0; t < spec.types_per_cluster; ++t) {
      const std::size_t type = k * spec.types_per_cluster + t;
      bundle.vocab.push_back("c" + std::to_string(k) + "w" + std::to_string(t));
      bundle.cluster_of_type.push_back(k);
      for (std::size_t i = 0; i < dim; ++i) {
        emb[type * dim + i] = static_cast<float>(centers[k][i] + offset_scale * gauss(rng));
      }
    }
  }

  // Token stream: every type occurs occurrences_per_type times, shuffled.
  std::vector<std::size_t> stream;
  stream.reserve(num_types * spec.occurrences_per_type);
  for (std::size_t type = 0; type < num_types; ++type) stream.insert(stream.end(), spec.occurrences_per_type, type);
  std::shuffle(stream.begin(), stream.end(), rng);

  std::uniform_int_distribution<std::size_t> length_dist(spec.min_sentence_length, spec.max_sentence_length);
  std::vector<float> hidden(stream.size() * dim);
  std::vector<TokenOccurrence> occurrences;
  occurrences.reserve(stream.size());
  std::vector<double> context(dim);
  const double position_scale =
      spec.max_sentence_length > 1 ? 1.0 / static_cast<double>(spec.max_sentence_length - 1) : 0.0;

  std::size_t cursor = 0;
  for (SentenceId sentence = 0; cursor < stream.size(); ++sentence) {
    const std::size_t len = std::min(length_dist(rng), stream.size() - cursor);
    double sq = 0.0;
    for (auto& x : context) {
      x = gauss(rng);
      sq += x * x;
    }
    for (auto& x : context) x /= std::sqrt(sq);

    std::string tree = "(ROOT (S";
    std::size_t open_phrase = static_cast<std::size_t>(-1);
    std::size_t phrase_len = 0;
    for (std::size_t j = 0; j < len; ++j, ++cursor) {
      const std::size_t type = stream[cursor];
      const std::size_t row = cursor;
      const double mix = spec.context_mixing * static_cast<double>(j) * position_scale;
      for (std::size_t i = 0; i < dim; ++i) {
        double x = static_cast<double>(emb[type * dim + i]);
        if (mix > 0.0) x = (1.0 - mix) * x + mix * context[i];
        if (spec.noise > 0.0) x += spec.noise * gauss(rng);
        hidden[row * dim + i] = static_cast<float>(x);
      }

      const auto& tpl = detail::kPosTemplates[bundle.cluster_of_type[type] % std::size(detail::kPosTemplates)];
      const auto pos_class = bundle.cluster_of_type[type] % std::size(detail::kPosTemplates);
      if (pos_class != open_phrase || phrase_len == 3) {
        if (open_phrase != static_cast<std::size_t>(-1)) tree += ")";
        tree += std::string(" (") + tpl.phrase;
        open_phrase = pos_class;
        phrase_len = 0;
      }
      tree += std::string(" (") + tpl.tag + " " + bundle.vocab[type] + ")";
      ++phrase_len;

      TokenOccurrence occ;
      occ.row_id = row;
      occ.sentence_id = sentence;
      occ.token_id = static_cast<TokenPos>(j);
      occ.surface = bundle.vocab[type];
      occ.origin_word = occ.surface;
      occ.pos = tpl.universal;
      occurrences.push_back(std::move(occ));
    }
    tree += ")))";
    bundle.parses.push_back(std::move(tree));
  }

  std::bernoulli_distribution planted(spec.planted_coverage);
  for (std::size_t k = 0; k < spec.clusters; ++k) {
    const auto& tpl = detail::kPosTemplates[k % std::size(detail::kPosTemplates)];
    for (std::size_t a = 0; a < spec.types_per_cluster; ++a) {
      for (std::size_t b = 0; b < spec.types_per_cluster; ++b) {
        if (a == b || !planted(rng)) continue;
        const auto& wa = bundle.vocab[k * spec.types_per_cluster + a];
        const auto& wb = bundle.vocab[k * spec.types_per_cluster + b];
        bundle.lexicon.push_back({wa, kAllRelations[(a + b) % kAllRelations.size()], wb, tpl.universal});
      }
    }
  }

  bundle.vectors = VectorSet(spec.dim, std::move(hidden));
  bundle.table = OccurrenceTable(std::move(occurrences));
  bundle.embeddings = VectorSet(spec.dim, std::move(emb));
  return bundle;
}

struct BundlePaths {
  std::string vectors, tokens, embeddings, vocab, parses, lexicon;

  static BundlePaths in(const std::filesystem::path& dir) {
    return {(dir / "vectors.hsv").string(), (dir / "tokens.tsv").string(), (dir / "embeddings.hsv").string(),
            (dir / "vocab.tsv").string(),   (dir / "parses.txt").string(), (dir / "lexicon.tsv").string()};
  }
};

inline BundlePaths write_bundle(const SyntheticBundle& bundle, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto paths = BundlePaths::in(dir);
  write_vector_log(paths.vectors, bundle.vectors);
  write_token_index(paths.tokens, bundle.table);
  write_vector_log(paths.embeddings, bundle.embeddings);
  write_vocab(paths.vocab, bundle.vocab);
  {
    auto out = text::open_output(paths.parses);
    for (const auto& line : bundle.parses) out << line << '\n';
  }
  {
    auto out = text::open_output(paths.lexicon);
    for (const auto& r : bundle.lexicon) {
      out << r.word << '\t' << to_string(r.relation) << '\t' << r.related << '\t' << r.pos << '\n';
    }
  }
  return paths;
}

}  // namespace nnprobe
