#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cada/rng.hpp"
#include "cada/tensor.hpp"

namespace testutil {

inline cada::Tensor rand_tensor(const std::vector<int>& shape, cada::Rng& rng,
                                double lo = -1.0, double hi = 1.0) {
  cada::Tensor t(shape);
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

inline cada::Tensor rand_binary(const std::vector<int>& shape, cada::Rng& rng,
                                double p = 0.5) {
  cada::Tensor t(shape);
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.bernoulli(p) ? 1.0 : 0.0;
  return t;
}

inline double max_abs_diff(const cada::Tensor& a, const cada::Tensor& b) {
  REQUIRE(a.shape() == b.shape());
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    double d = std::abs(a[i] - b[i]);
    if (d > m) m = d;
  }
  return m;
}

// Unique scratch directory, removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    auto base = std::filesystem::temp_directory_path() / "cada_unit";
    path_ = base / (tag + "_" + std::to_string(++counter));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  REQUIRE(out.good());
  out << text;
}

inline std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::string cur;
  for (char c : text) {
    if (c == '\n') {
      lines.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) lines.push_back(cur);
  return lines;
}

}  // namespace testutil
