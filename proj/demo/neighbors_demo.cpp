// Minimal library use: plant a small synthetic corpus in memory, print the
// neighbors of the first few occurrences with their embedding coverage.

#include <iostream>

#include "nnprobe/nnprobe.hpp"

int main() {
  using namespace nnprobe;

  SynthSpec spec;
  spec.clusters = 4;
  spec.types_per_cluster = 6;
  spec.occurrences_per_type = 5;
  spec.dim = 16;
  spec.seed = 7;
  const auto bundle = generate_synthetic(spec);

  const auto index = build_index(bundle.vectors, bundle.table);
  EmbeddingIndex embeddings(bundle.embeddings, bundle.vocab);

  for (RowId row = 0; row < 3; ++row) {
    const auto& occ = bundle.table[row];
    const auto list = query_neighbors(index, row, 5);
    const auto type_list = embeddings.neighbors(occ.surface, 5);
    const auto cov = embedding_coverage(list, type_list, bundle.table);
    std::cout << occ.surface << " (sentence " << occ.sentence_id << ", token " << occ.token_id
              << ")  coverage " << text::fixed(cov.value, 2) << '\n';
    for (const auto& e : list.entries) {
      std::cout << "  " << bundle.table[e.row].surface << '\t' << text::fixed(e.score, 4) << '\n';
    }
  }
}
