#pragma once

#include <atomic>
#include <filesystem>
#include <string>

#include <unistd.h>

#include "lfrefine/types.hpp"
#include "oracles.hpp"

namespace testutil {

inline lfrefine::SimilarityMatrix to_similarity(const oracle::Grid& g,
                                                lfrefine::SimilarityKind kind = lfrefine::SimilarityKind::cosine) {
  lfrefine::Matrix m(g.size(), g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (std::size_t j = 0; j < g.size(); ++j) m(i, j) = g[i][j];
  }
  return lfrefine::SimilarityMatrix(kind, std::move(m));
}

inline oracle::Grid to_grid(const lfrefine::SimilarityMatrix& s) {
  oracle::Grid g(s.m(), std::vector<double>(s.m()));
  for (std::size_t i = 0; i < s.m(); ++i) {
    for (std::size_t j = 0; j < s.m(); ++j) g[i][j] = s(i, j);
  }
  return g;
}

// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("lfrefine_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace testutil
