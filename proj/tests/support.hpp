#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "tumornet/tumornet.hpp"

namespace testing_support {

// a * sin(b * k + c) over the flat index; mirrored by oracles/reference.py.
template <class T = double>
tumornet::Tensor<T> wave(tumornet::Shape shape, double a, double b, double c) {
  tumornet::Tensor<T> t(std::move(shape));
  for (std::size_t k = 0; k < t.size(); ++k) t[k] = static_cast<T>(a * std::sin(b * static_cast<double>(k) + c));
  return t;
}

struct Probe {
  double sum;
  double weighted;
};

template <class T>
Probe probe(const tumornet::Tensor<T>& t) {
  Probe p{0, 0};
  for (std::size_t k = 0; k < t.size(); ++k) {
    p.sum += t[k];
    p.weighted += t[k] * std::cos(0.7 * static_cast<double>(k));
  }
  return p;
}

template <class T = double>
tumornet::Tensor<T> random_tensor(tumornet::Shape shape, std::uint64_t seed, double lo = -1, double hi = 1) {
  tumornet::Rng rng(seed);
  tumornet::Tensor<T> t(std::move(shape));
  for (auto& v : t.data()) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

// Fresh, empty directory under the system temp dir; removed on destruction.
class TempDir {
public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("tumornet-" + tag + "-" + std::to_string(rd()));
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
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& p, const std::string& body) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << body;
}

} // namespace testing_support
