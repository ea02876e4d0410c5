#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include "qfilter/linalg.hpp"

namespace testing {

inline qfilter::CVector random_vector(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> g;
  qfilter::CVector v(n);
  for (auto& z : v) z = {g(rng), g(rng)};
  return v;
}

inline qfilter::CMatrix random_hermitian(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> g;
  qfilter::CMatrix a(n, n);
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) a(i, j) = {g(rng), g(rng)};
  return (a + a.adjoint()) / 2.0;
}

inline qfilter::StateVector qubit(qfilter::Complex a, qfilter::Complex b) {
  qfilter::CVector v(2);
  v << a, b;
  return qfilter::StateVector(qfilter::Basis::finite(2), v);
}

// Fresh scratch directory under the build tree.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("qfilter_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testing
