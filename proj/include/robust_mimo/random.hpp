#pragma once

// Seeded random draws shared by the benchmark and the oracles.

#include <cmath>
#include <cstdint>
#include <random>

#include "robust_mimo/linalg.hpp"

namespace robust_mimo {

/// Counter-based seed derivation: the k-th stream of a seed is independent
/// of how many other streams are drawn or in which order.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t counter) {
  return splitmix64(splitmix64(seed) ^ splitmix64(counter + 0x632be59bd9b4e019ULL));
}

/// Matrix with i.i.d. CN(0, 1) entries.
inline ComplexMatrix complex_gaussian(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
  ComplexMatrix A(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) {
      const double re = normal(rng);
      const double im = normal(rng);
      A(i, j) = Complex(re, im);
    }
  }
  return A;
}

}  // namespace robust_mimo
