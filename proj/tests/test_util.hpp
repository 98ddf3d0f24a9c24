#pragma once

#include <random>

#include "hypoctrl/core.hpp"

namespace hypoctrl::testing {

inline Mat random_matrix(std::mt19937_64& rng, int rows, int cols) {
  std::normal_distribution<double> normal;
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = normal(rng);
  return m;
}

inline Vec random_vector(std::mt19937_64& rng, int n) { return random_matrix(rng, n, 1); }

inline CVec random_cvector(std::mt19937_64& rng, int n) {
  CVec v(n);
  v.real() = random_vector(rng, n);
  v.imag() = random_vector(rng, n);
  return v;
}

}  // namespace hypoctrl::testing
