#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "utlsa/rng.hpp"
#include "utlsa/tensor.hpp"

namespace testutil {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("utlsa_" + tag + "_" + std::to_string(std::random_device{}()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

template <typename T>
utlsa::Matrix<T> random_matrix(std::size_t r, std::size_t c, std::uint64_t seed, double scale = 1.0) {
  utlsa::Rng rng(seed);
  utlsa::Matrix<T> m(r, c);
  for (auto& v : m.data) v = static_cast<T>(scale * rng.normal());
  return m;
}

inline double rel_err(double a, double b) {
  const double d = std::max(std::abs(a), std::abs(b));
  return d == 0.0 ? 0.0 : std::abs(a - b) / d;
}

}  // namespace testutil

namespace testutil {

// Central difference of f at data[i] with step h.
template <typename F, typename V>
double central_diff(F&& f, V& data, std::size_t i, double h) {
  const auto saved = data[i];
  data[i] = saved + h;
  const double fp = f();
  data[i] = saved - h;
  const double fm = f();
  data[i] = saved;
  return (fp - fm) / (2.0 * h);
}

// <a, b> over matching containers.
template <typename A, typename B>
double dot(const A& a, const B& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return s;
}

}  // namespace testutil
