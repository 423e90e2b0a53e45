#pragma once

// WordNet-style relation lexicon loaded from a flat TSV export:
//
//   word <TAB> relation <TAB> related_word [<TAB> pos]
//
// relation is one of SYN, ANT, HYPO, HYPER. Lines starting with '#' and
// blank lines are ignored. Any WordNet or GermaNet dump can be converted to
// this layout by emitting one row per direct relation of each lemma.

#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>

#include "error.hpp"
#include "text.hpp"

namespace nnprobe {

enum class Relation { Syn, Ant, Hypo, Hyper };

inline constexpr std::array<Relation, 4> kAllRelations = {Relation::Syn, Relation::Ant, Relation::Hypo,
                                                          Relation::Hyper};

constexpr std::string_view to_string(Relation r) {
  switch (r) {
    case Relation::Syn: return "SYN";
    case Relation::Ant: return "ANT";
    case Relation::Hypo: return "HYPO";
    case Relation::Hyper: return "HYPER";
  }
  return "?";
}

inline std::optional<Relation> parse_relation(std::string_view tag) {
  for (auto r : kAllRelations) {
    if (tag == to_string(r)) return r;
  }
  return std::nullopt;
}

class RelationLexicon {
 public:
  struct Related {
    std::string word;
    std::string pos;  // empty: no POS restriction
    auto operator<=>(const Related&) const = default;
  };

  void add(const std::string& word, Relation relation, const std::string& related, const std::string& pos = {}) {
    entries_[{word, relation}].insert(Related{related, pos});
    folded_[{text::fold_case(word), relation}].insert(Related{related, pos});
  }

  /// Related words for one relation, regardless of POS.
  std::set<std::string> lookup(const std::string& word, Relation relation) const {
    std::set<std::string> out;
    if (const auto it = entries_.find({word, relation}); it != entries_.end()) {
      for (const auto& r : it->second) out.insert(r.word);
    }
    return out;
  }

  /// R_w: union over SYN, ANT, HYPO, HYPER. With `pos`, entries tagged
  /// with another POS are dropped; untagged entries always count. With
  /// `fold_case`, the lookup key and stored keys are ASCII case-folded.
  std::set<std::string> related_set(const std::string& word, const std::optional<std::string>& pos = std::nullopt,
                                    bool fold_case = false) const {
    const auto& table = fold_case ? folded_ : entries_;
    const std::string key = fold_case ? text::fold_case(word) : word;
    std::set<std::string> out;
    for (auto relation : kAllRelations) {
      const auto it = table.find({key, relation});
      if (it == table.end()) continue;
      for (const auto& r : it->second) {
        if (pos && !r.pos.empty() && r.pos != *pos) continue;
        out.insert(r.word);
      }
    }
    return out;
  }

  std::size_t entry_count() const {
    std::size_t k = 0;
    for (const auto& [key, set] : entries_) k += set.size();
    return k;
  }

 private:
  using Key = std::tuple<std::string, Relation>;
  std::map<Key, std::set<Related>> entries_;
  std::map<Key, std::set<Related>> folded_;
};

inline RelationLexicon parse_relations(std::istream& in, const std::string& name = "<lexicon>") {
  RelationLexicon lexicon;
  std::string line;
  std::int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto view = text::chomp(line);
    if (view.empty() || view.front() == '#') continue;
    const auto f = text::split(view);
    if ((f.size() != 3 && f.size() != 4) || f[0].empty() || f[2].empty()) {
      throw Error(ErrorCode::MalformedRow, name + ":" + std::to_string(line_no) + ": expected 3 or 4 fields", line_no);
    }
    const auto relation = parse_relation(f[1]);
    if (!relation) {
      throw Error(ErrorCode::UnknownRelationTag,
                  name + ":" + std::to_string(line_no) + ": unknown relation '" + std::string(f[1]) + "'", line_no);
    }
    lexicon.add(std::string(f[0]), *relation, std::string(f[2]), f.size() == 4 ? std::string(f[3]) : std::string());
  }
  return lexicon;
}

inline RelationLexicon load_relations(const std::string& path) {
  auto in = text::open_input(path);
  return parse_relations(in, path);
}

}  // namespace nnprobe
