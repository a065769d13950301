#pragma once

#include <atomic>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "hashtrace/hash_code.hpp"
#include "hashtrace/rng.hpp"

namespace hashtrace::testing {

inline HashCode random_code(Rng& rng, std::size_t k) {
  HashCode c(k);
  for (std::size_t i = 0; i < k; ++i) c.set(i, rng.below(2) == 1);
  return c;
}

inline std::vector<double> random_unit_vector(Rng& rng, std::size_t k) {
  std::vector<double> v(k);
  for (auto& x : v) x = rng.uniform();
  return v;
}

/// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "ht") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            (tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
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

 private:
  std::filesystem::path path_;
};

}  // namespace hashtrace::testing
