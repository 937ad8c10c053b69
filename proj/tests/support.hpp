#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "tworld/grid.hpp"

namespace tworld::test {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("tworld-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline DenseWorld random_world(const Coord& dims, int channels, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<float> n;
  DenseWorld w(dims, channels);
  for (auto& v : w.data()) v = n(rng);
  return w;
}

inline double max_abs_diff(const DenseWorld& a, const DenseWorld& b) {
  return (a.data().cast<double>() - b.data().cast<double>()).abs().maxCoeff();
}

}  // namespace tworld::test
