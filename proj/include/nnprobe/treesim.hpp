#pragma once

// Bracketed constituency trees, smallest-phrase subtrees and PARSEVAL
// scoring between subtrees of different sentences.
//
// Terminal strings never take part in scoring: a subtree is reduced to its
// labeled spans (local positions, preterminals excluded) and its sequence
// of preterminal tags.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "corpusio.hpp"
#include "error.hpp"
#include "knn.hpp"

namespace nnprobe {

class ConstTree {
 public:
  struct Node {
    std::string label;  // internal nodes
    std::string word;   // leaves, unescaped
    std::vector<std::size_t> children;
    std::size_t parent = kNone;
    bool is_leaf() const noexcept { return children.empty(); }
  };

  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);

  std::size_t root() const noexcept { return 0; }
  const Node& node(std::size_t id) const { return nodes_[id]; }
  std::size_t node_count() const noexcept { return nodes_.size(); }
  std::size_t leaf_count() const noexcept { return leaves_.size(); }
  /// Node id of the k-th leaf, left to right.
  std::size_t leaf(std::size_t k) const { return leaves_[k]; }

  bool is_preterminal(std::size_t id) const {
    const auto& n = nodes_[id];
    return n.children.size() == 1 && nodes_[n.children[0]].is_leaf();
  }

  std::vector<std::string> words() const {
    std::vector<std::string> out;
    for (auto id : leaves_) out.push_back(nodes_[id].word);
    return out;
  }

 private:
  friend ConstTree parse_bracketed(std::string_view line);
  std::vector<Node> nodes_;
  std::vector<std::size_t> leaves_;
};

/// PTB bracket escapes to their literal characters.
inline std::string unescape_token(std::string_view token) {
  static constexpr std::pair<std::string_view, std::string_view> kEscapes[] = {
      {"-LRB-", "("}, {"-RRB-", ")"}, {"-LCB-", "{"}, {"-RCB-", "}"}, {"-LSB-", "["}, {"-RSB-", "]"}};
  for (const auto& [from, to] : kEscapes) {
    if (token == from) return std::string(to);
  }
  return std::string(token);
}

/// Drops functional annotations: "NP-SBJ" -> "NP", "PP=2" -> "PP". Labels
/// wrapped in dashes ("-LRB-", "-NONE-") are kept whole, annotations after
/// them are still dropped.
inline std::string normalize_label(std::string_view label) {
  std::size_t from = 1;
  if (label.size() > 2 && label.front() == '-') {
    const auto close = label.find('-', 1);
    if (close != std::string_view::npos) from = close + 1;
  }
  const auto cut = label.find_first_of("-=", from);
  return std::string(cut == std::string_view::npos ? label : label.substr(0, cut));
}

inline ConstTree parse_bracketed(std::string_view line) {
  ConstTree tree;
  std::vector<std::size_t> stack;
  bool closed_root = false;
  std::size_t i = 0;
  const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; };
  const auto is_delim = [&](char c) { return is_space(c) || c == '(' || c == ')'; };

  while (i < line.size()) {
    const char c = line[i];
    if (is_space(c)) {
      ++i;
      continue;
    }
    if (c == '(') {
      if (stack.empty() && closed_root) {
        throw Error(ErrorCode::MultipleRoots, "second top-level constituent at offset " + std::to_string(i), i);
      }
      ++i;
      while (i < line.size() && is_space(line[i])) ++i;
      std::size_t start = i;
      while (i < line.size() && !is_delim(line[i])) ++i;
      ConstTree::Node node;
      node.label = std::string(line.substr(start, i - start));
      node.parent = stack.empty() ? ConstTree::kNone : stack.back();
      const auto id = tree.nodes_.size();
      tree.nodes_.push_back(std::move(node));
      if (!stack.empty()) tree.nodes_[stack.back()].children.push_back(id);
      stack.push_back(id);
      continue;
    }
    if (c == ')') {
      if (stack.empty()) throw Error(ErrorCode::UnbalancedParens, "unmatched ')' at offset " + std::to_string(i), i);
      stack.pop_back();
      if (stack.empty()) closed_root = true;
      ++i;
      continue;
    }
    // terminal
    std::size_t start = i;
    while (i < line.size() && !is_delim(line[i])) ++i;
    if (stack.empty()) {
      throw Error(closed_root ? ErrorCode::MultipleRoots : ErrorCode::MalformedRow,
                  "token outside any constituent at offset " + std::to_string(start), start);
    }
    ConstTree::Node leaf;
    leaf.word = unescape_token(line.substr(start, i - start));
    leaf.parent = stack.back();
    const auto id = tree.nodes_.size();
    tree.nodes_.push_back(std::move(leaf));
    tree.nodes_[stack.back()].children.push_back(id);
  }
  if (!stack.empty()) {
    throw Error(ErrorCode::UnbalancedParens, std::to_string(stack.size()) + " unclosed '(' at end of input",
                static_cast<std::int64_t>(line.size()));
  }
  if (tree.nodes_.empty()) throw Error(ErrorCode::EmptyTree, "no constituent found");

  for (const auto& n : tree.nodes_) {
    if (n.is_leaf() && n.word.empty()) throw Error(ErrorCode::EmptyTree, "constituent '" + n.label + "' has no children");
  }
  // Leaves in document order are nodes with a word.
  for (std::size_t id = 0; id < tree.nodes_.size(); ++id) {
    const auto& n = tree.nodes_[id];
    if (!n.is_leaf()) continue;
    if (!tree.is_preterminal(n.parent)) {
      throw Error(ErrorCode::MalformedRow, "terminal '" + n.word + "' has no preterminal parent");
    }
    tree.leaves_.push_back(id);
  }
  if (tree.leaves_.empty()) throw Error(ErrorCode::EmptyTree, "tree has no terminals");
  return tree;
}

struct LabeledSpan {
  std::string label;
  std::size_t start = 0;  // inclusive
  std::size_t end = 0;    // exclusive
  auto operator<=>(const LabeledSpan&) const = default;
};

/// Span multiset (sorted) and tag sequence of a subtree with local positions.
struct SubtreeSpan {
  std::vector<LabeledSpan> spans;
  std::vector<std::string> preterminals;
  std::size_t leaf_count = 0;
  friend bool operator==(const SubtreeSpan&, const SubtreeSpan&) = default;
};

namespace detail {

// Returns the leaf range [first, last) of `id` and appends spans of all
// non-preterminal constituents below it. Leaf positions count from the
// value of `next_leaf` at the subtree root (0 for a fresh subtree).
inline std::pair<std::size_t, std::size_t> collect_spans(const ConstTree& tree, std::size_t id,
                                                         std::size_t& next_leaf, SubtreeSpan& out) {
  const auto& n = tree.node(id);
  if (tree.is_preterminal(id)) {
    out.preterminals.push_back(normalize_label(n.label));
    const auto k = next_leaf++;
    return {k, k + 1};
  }
  const auto first = next_leaf;
  for (auto child : n.children) collect_spans(tree, child, next_leaf, out);
  out.spans.push_back({normalize_label(n.label), first, next_leaf});
  return {first, next_leaf};
}

}  // namespace detail

/// Subtree rooted at the lowest non-preterminal ancestor of the leaf; when
/// the tree is a bare preterminal the root itself is used.
inline SubtreeSpan smallest_phrase_subtree(const ConstTree& tree, std::size_t leaf_index) {
  if (leaf_index >= tree.leaf_count()) {
    throw Error(ErrorCode::LeafIndexOutOfRange,
                "leaf " + std::to_string(leaf_index) + " of " + std::to_string(tree.leaf_count()),
                static_cast<std::int64_t>(leaf_index));
  }
  const auto preterminal = tree.node(tree.leaf(leaf_index)).parent;
  const auto phrase = tree.node(preterminal).parent;
  SubtreeSpan out;
  if (phrase == ConstTree::kNone) {
    out.preterminals.push_back(normalize_label(tree.node(preterminal).label));
    out.spans.push_back({out.preterminals.back(), 0, 1});
    out.leaf_count = 1;
    return out;
  }
  std::size_t next_leaf = 0;
  detail::collect_spans(tree, phrase, next_leaf, out);
  out.leaf_count = next_leaf;
  std::sort(out.spans.begin(), out.spans.end());
  return out;
}

struct ParsevalScores {
  std::size_t matched = 0;
  std::size_t gold_spans = 0;
  std::size_t candidate_spans = 0;
  double precision = 0.0;
  double recall = 0.0;
  double complete_match = 0.0;  // 1 iff span multisets are equal
  std::size_t crossing = 0;
  double tag_accuracy = 0.0;
};

inline ParsevalScores parseval(const SubtreeSpan& gold, const SubtreeSpan& candidate) {
  if (gold.spans.empty() || candidate.spans.empty() || gold.leaf_count == 0 || candidate.leaf_count == 0) {
    throw Error(ErrorCode::EmptySubtree, "parseval needs two nonempty subtrees");
  }
  ParsevalScores s;
  s.gold_spans = gold.spans.size();
  s.candidate_spans = candidate.spans.size();

  auto g = gold.spans;
  auto c = candidate.spans;
  std::sort(g.begin(), g.end());
  std::sort(c.begin(), c.end());
  std::vector<LabeledSpan> common;
  std::set_intersection(g.begin(), g.end(), c.begin(), c.end(), std::back_inserter(common));
  s.matched = common.size();
  s.precision = static_cast<double>(s.matched) / static_cast<double>(s.candidate_spans);
  s.recall = static_cast<double>(s.matched) / static_cast<double>(s.gold_spans);
  s.complete_match = g == c ? 1.0 : 0.0;

  for (const auto& cs : candidate.spans) {
    const bool crosses = std::any_of(gold.spans.begin(), gold.spans.end(), [&](const LabeledSpan& gs) {
      return (cs.start < gs.start && gs.start < cs.end && cs.end < gs.end) ||
             (gs.start < cs.start && cs.start < gs.end && gs.end < cs.end);
    });
    s.crossing += crosses ? 1 : 0;
  }

  const auto shorter = std::min(gold.preterminals.size(), candidate.preterminals.size());
  const auto longer = std::max(gold.preterminals.size(), candidate.preterminals.size());
  std::size_t tags = 0;
  for (std::size_t k = 0; k < shorter; ++k) tags += gold.preterminals[k] == candidate.preterminals[k] ? 1 : 0;
  s.tag_accuracy = static_cast<double>(tags) / static_cast<double>(longer);
  return s;
}

/// One row of the parse-similarity table.
struct TreesimSummary {
  double precision = 0.0;
  double recall = 0.0;
  double matched_brackets = 0.0;
  double cross_brackets = 0.0;
  double tag_accuracy = 0.0;
  std::uint64_t pair_count = 0;
  std::uint64_t skipped_pairs = 0;
};

/// Mean PARSEVAL fields over all (query, neighbor) pairs, query as gold.
/// `subtrees` is indexed by row; pairs where either side is missing are
/// skipped and counted.
inline TreesimSummary average_treesim(const std::vector<NeighborList>& lists,
                                      const std::vector<std::optional<SubtreeSpan>>& subtrees) {
  TreesimSummary sum;
  const auto has = [&](RowId r) { return r < subtrees.size() && subtrees[r].has_value(); };
  for (const auto& list : lists) {
    for (const auto& e : list.entries) {
      if (!has(list.query) || !has(e.row)) {
        ++sum.skipped_pairs;
        continue;
      }
      const auto s = parseval(*subtrees[list.query], *subtrees[e.row]);
      sum.precision += s.precision;
      sum.recall += s.recall;
      sum.matched_brackets += s.complete_match;
      sum.cross_brackets += static_cast<double>(s.crossing);
      sum.tag_accuracy += s.tag_accuracy;
      ++sum.pair_count;
    }
  }
  if (sum.pair_count > 0) {
    const auto n = static_cast<double>(sum.pair_count);
    sum.precision /= n;
    sum.recall /= n;
    sum.matched_brackets /= n;
    sum.cross_brackets /= n;
    sum.tag_accuracy /= n;
  }
  return sum;
}

struct SubtreeAssignment {
  std::vector<std::optional<SubtreeSpan>> by_row;
  std::uint64_t sentences_without_parse = 0;
  std::uint64_t sentences_misaligned = 0;
};

/// Gives every occurrence the subtree of its pre-BPE word: the parse of
/// sentence i is line i; the sentence's segments are aligned to the tree's
/// terminals with align_bpe. Sentences that fail to parse or align leave
/// their rows empty.
inline SubtreeAssignment assign_subtrees(const OccurrenceTable& table, const std::vector<std::string>& parse_lines,
                                         std::string_view marker = "@@") {
  SubtreeAssignment out;
  out.by_row.resize(table.size());
  std::map<SentenceId, std::vector<RowId>> sentences;
  for (const auto& occ : table.occurrences()) sentences[occ.sentence_id].push_back(occ.row_id);
  for (auto& [sid, rows] : sentences) {
    std::sort(rows.begin(), rows.end(), [&](RowId a, RowId b) { return table[a].token_id < table[b].token_id; });
    if (sid >= parse_lines.size() || parse_lines[sid].empty()) {
      ++out.sentences_without_parse;
      continue;
    }
    try {
      const auto tree = parse_bracketed(parse_lines[sid]);
      std::vector<std::string> segments;
      for (auto r : rows) segments.push_back(table[r].surface);
      const auto map = align_bpe(tree.words(), segments, marker);
      std::vector<std::optional<SubtreeSpan>> per_word(tree.leaf_count());
      for (std::size_t k = 0; k < rows.size(); ++k) {
        auto& sub = per_word[map.segment_to_word[k]];
        if (!sub) sub = smallest_phrase_subtree(tree, map.segment_to_word[k]);
        out.by_row[rows[k]] = sub;
      }
    } catch (const Error& e) {
      if (e.code() == ErrorCode::AlignmentFailure || e.code() == ErrorCode::EmptyInput) {
        ++out.sentences_misaligned;
      } else {
        ++out.sentences_without_parse;
      }
    }
  }
  return out;
}

}  // namespace nnprobe
