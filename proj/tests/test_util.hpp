#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "fkt/common.hpp"

namespace fkt_test {

/// Unique scratch directory, removed on destruction.
struct TempDir {
  std::filesystem::path path;

  TempDir() {
    static std::atomic<std::uint64_t> counter{0};
    std::random_device rd;
    const auto tag = std::to_string(rd()) + "_" + std::to_string(counter++);
    path = std::filesystem::temp_directory_path() / ("fkt_test_" + tag);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }

  std::string file(const std::string& name) const { return (path / name).string(); }
};

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return content;
}

inline bool bitwise_equal(const fkt::Matrix& a, const fkt::Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  return std::equal(a.data(), a.data() + a.size(), b.data());
}

inline bool bitwise_equal(const fkt::Vector& a, const fkt::Vector& b) {
  if (a.size() != b.size()) return false;
  return std::equal(a.data(), a.data() + a.size(), b.data());
}

/// Relative error with an absolute floor, for gradient checks.
inline double rel_err(double analytic, double numeric) {
  const double scale = std::max({1e-5, std::abs(analytic), std::abs(numeric)});
  return std::abs(analytic - numeric) / scale;
}

}  // namespace fkt_test
