#pragma once

#include <random>
#include <string>
#include <vector>

namespace nnprobe::testing {

// Random well-formed bracketed tree. Every terminal sits under a
// preterminal; phrases have 1-3 children.
class TreeGen {
 public:
  explicit TreeGen(std::uint64_t seed) : rng_(seed) {}

  std::string tree(int max_depth = 4) { return "(ROOT " + phrase(max_depth) + ")"; }

  // Same bracketing with every terminal replaced by a fresh random string.
  std::string rewrite_terminals(const std::string& line) {
    std::string out;
    std::size_t i = 0;
    while (i < line.size()) {
      // a terminal follows "(TAG " and is terminated by ')'
      if (line[i] == '(') {
        const auto space = line.find(' ', i);
        const auto next_paren = line.find_first_of("()", i + 1);
        if (space != std::string::npos && space < next_paren && line[next_paren] == ')') {
          out.append(line, i, space - i + 1);
          out += word();
          i = next_paren;
          continue;
        }
      }
      out.push_back(line[i++]);
    }
    return out;
  }

  std::mt19937_64& rng() { return rng_; }

 private:
  std::string pick(const std::vector<std::string>& xs) { return xs[rng_() % xs.size()]; }

  std::string word() {
    std::string w;
    const auto len = 1 + rng_() % 6;
    for (std::size_t k = 0; k < len; ++k) w.push_back(static_cast<char>('a' + rng_() % 26));
    return w;
  }

  std::string preterminal() { return "(" + pick({"DT", "NN", "JJ", "VBD", "RB", "IN"}) + " " + word() + ")"; }

  std::string phrase(int depth) {
    std::string out = "(" + pick({"S", "NP", "VP", "PP", "ADJP"});
    const auto kids = 1 + rng_() % 3;
    for (std::size_t k = 0; k < kids; ++k) {
      out += " ";
      out += depth > 0 && rng_() % 2 ? phrase(depth - 1) : preterminal();
    }
    return out + ")";
  }

  std::mt19937_64 rng_;
};

}  // namespace nnprobe::testing
