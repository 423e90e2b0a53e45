// nnprobe: nearest-neighbor analysis of encoder hidden states.
//
//   nnprobe synth --out DIR [--clusters K ...]
//   nnprobe run --vectors V --tokens T [--embeddings E --vocab W] [--parses P] [--lexicon L] --out DIR
//   nnprobe knn | coverage | concentration | treesim | report ...
//
// Options may also come from a TOML/INI file given with --config; flags on
// the command line override it. NNPROBE_THREADS sets the worker count when
// --threads is not given.
//
// Exit codes: 0 success, 2 config error, 3 input inconsistency, 4 stage failure.

#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"

#include "nnprobe/pipeline.hpp"
#include "nnprobe/synth.hpp"

namespace {

using namespace nnprobe;

int run_stages(const AnalysisConfig& config, unsigned stages) {
  const auto result = run_pipeline(config, stages);
  for (const auto& name : result.outputs) std::cout << (std::filesystem::path(config.output_dir) / name).string() << '\n';
  for (const auto& note : result.manifest.doc["notes"]) std::cerr << "note: " << note.get<std::string>() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nearest-neighbor analysis of encoder hidden states"};
  app.set_config("--config", "", "TOML/INI file with option defaults; command-line flags win");
  app.require_subcommand(1);
  app.fallthrough();

  AnalysisConfig config;
  std::string exclusion = "same-type";
  std::string counting = "per-slot";
  std::string embed_key = "surface";
  std::string lexicon_key = "origin";
  std::string variance = "occurrence";
  std::string missing = "zero";

  app.add_option("--vectors", config.vectors, "Hidden-state vector log (HSV1)");
  app.add_option("--tokens", config.tokens, "Token index TSV");
  app.add_option("--embeddings", config.embeddings, "Embedding vector log (HSV1)");
  app.add_option("--vocab", config.vocab, "Embedding vocabulary TSV");
  app.add_option("--parses", config.parses, "Bracketed parses, one per sentence");
  app.add_option("--lexicon", config.lexicon, "Relation lexicon TSV");
  app.add_option("--neighbors-in", config.neighbors_in, "Reuse neighbors from a previous knn run (.tsv or .bin)");
  app.add_option("-o,--out", config.output_dir, "Output directory");
  app.add_option("-n,--neighbors", config.n, "Neighbors per query")->check(CLI::PositiveNumber);
  app.add_option("--min-freq", config.min_freq, "Lower end of the frequency band (inclusive)");
  app.add_option("--max-freq", config.max_freq, "Upper end of the frequency band (inclusive)");
  app.add_option("--exclusion", exclusion, "same-type | self-only")
      ->check(CLI::IsMember({"same-type", "self-only"}));
  app.add_option("--counting", counting, "per-slot | distinct")->check(CLI::IsMember({"per-slot", "distinct"}));
  app.add_option("--embed-key", embed_key, "surface | origin")->check(CLI::IsMember({"surface", "origin"}));
  app.add_option("--lexicon-key", lexicon_key, "surface | origin")->check(CLI::IsMember({"surface", "origin"}));
  app.add_option("--variance", variance, "occurrence | type")->check(CLI::IsMember({"occurrence", "type"}));
  app.add_option("--missing", missing, "zero | skip")->check(CLI::IsMember({"zero", "skip"}));
  app.add_flag("--fold-case", config.fold_case, "Case-fold lexicon lookups");
  app.add_flag("--lexicon-pos-filter", config.lexicon_pos_filter, "Restrict relations to the occurrence's POS");
  app.add_option("--bpe-marker", config.bpe_marker, "BPE continuation marker");
  app.add_flag("--binary-neighbors", config.binary_neighbors, "Also write neighbors.bin");
  app.add_option("-j,--threads", config.threads, "Worker threads (default: NNPROBE_THREADS or hardware)");

  SynthSpec spec;
  std::string synth_out = "synth";
  auto* synth = app.add_subcommand("synth", "Write a synthetic bundle with planted structure");
  synth->add_option("--out", synth_out, "Bundle directory");
  synth->add_option("--clusters", spec.clusters);
  synth->add_option("--types-per-cluster", spec.types_per_cluster);
  synth->add_option("--occurrences-per-type", spec.occurrences_per_type);
  synth->add_option("--dim", spec.dim);
  synth->add_option("--noise", spec.noise);
  synth->add_option("--type-spread", spec.type_spread);
  synth->add_option("--planted-coverage", spec.planted_coverage);
  synth->add_option("--context-mixing", spec.context_mixing);
  synth->add_option("--min-len", spec.min_sentence_length);
  synth->add_option("--max-len", spec.max_sentence_length);
  synth->add_option("--seed", spec.seed);

  const std::map<std::string, unsigned> stage_commands = {
      {"knn", kStageKnn},
      {"coverage", kStageCoverage},
      {"concentration", kStageConcentration},
      {"treesim", kStageTreesim},
      {"report", kStageReport},
      {"run", kAllStages},
  };
  const std::map<std::string, std::string> descriptions = {
      {"knn", "Compute neighbor lists"},
      {"coverage", "Embedding and lexicon coverage, strata and positional curves"},
      {"concentration", "Neighbor concentration and its positional curve"},
      {"treesim", "PARSEVAL similarity between query and neighbor subtrees"},
      {"report", "Render tables.txt from an output directory"},
      {"run", "All stages"},
  };
  for (const auto& [name, bits] : stage_commands) app.add_subcommand(name, descriptions.at(name));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  config.exclusion = exclusion == "same-type" ? Exclusion::SameType : Exclusion::SelfOnly;
  config.counting = counting == "per-slot" ? CountingMode::PerSlot : CountingMode::Distinct;
  config.embed_key = embed_key == "surface" ? CoverageKey::Surface : CoverageKey::OriginWord;
  config.lexicon_key = lexicon_key == "surface" ? CoverageKey::Surface : CoverageKey::OriginWord;
  config.variance = variance == "occurrence" ? VarianceMode::Occurrence : VarianceMode::Type;
  config.missing = missing == "zero" ? MissingMode::Zero : MissingMode::Skip;

  try {
    if (synth->parsed()) {
      const auto paths = write_bundle(generate_synthetic(spec), synth_out);
      for (const auto* p : {&paths.vectors, &paths.tokens, &paths.embeddings, &paths.vocab, &paths.parses,
                            &paths.lexicon}) {
        std::cout << *p << '\n';
      }
      return 0;
    }
    for (const auto& [name, bits] : stage_commands) {
      if (app.got_subcommand(name)) return run_stages(config, bits);
    }
  } catch (const Error& e) {
    std::cerr << "nnprobe: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "nnprobe: " << e.what() << '\n';
    return 4;
  }
  return 2;
}
