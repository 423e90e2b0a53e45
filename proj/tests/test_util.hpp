#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "nnprobe/corpusio.hpp"

namespace nnprobe::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::mt19937_64 rng(std::random_device{}());
    path_ = std::filesystem::temp_directory_path() / ("nnprobe_" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

inline std::string read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline TokenOccurrence occ(RowId row, SentenceId s, TokenPos t, std::string surface, std::string pos = "_",
                           std::string origin = "") {
  TokenOccurrence o;
  o.row_id = row;
  o.sentence_id = s;
  o.token_id = t;
  o.surface = surface;
  o.origin_word = origin.empty() ? surface : origin;
  o.pos = pos;
  return o;
}

// Gaussian rows, dim columns.
inline VectorSet random_vectors(std::size_t rows, std::uint32_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> g;
  std::vector<float> data(rows * dim);
  for (auto& x : data) x = g(rng);
  return VectorSet(dim, std::move(data));
}

}  // namespace nnprobe::testing
