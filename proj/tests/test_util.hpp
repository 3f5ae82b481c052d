#pragma once

#include <string>

#include "nsls/rng.hpp"
#include "nsls/sparse_matrix.hpp"

namespace nsls::test {

inline DenseMatrix random_dense(int n, int d, Rng& rng) {
  DenseMatrix m(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = rng.next_gaussian();
  return m;
}

// Dense matrix with roughly power-law row magnitudes, for numerically
// sparse instances.
inline DenseMatrix random_powerlaw(int n, int d, double decay, Rng& rng) {
  DenseMatrix m = DenseMatrix::Zero(n, d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) {
      const int rank = static_cast<int>(rng.next_below(d)) + 1;
      const double sign = rng.next_u64() & 1 ? 1.0 : -1.0;
      m(i, j) = sign * std::pow(static_cast<double>(rank), -decay);
    }
  }
  return m;
}

inline Vector random_vector(int d, Rng& rng) {
  Vector v(d);
  for (int j = 0; j < d; ++j) v[j] = rng.next_gaussian();
  return v;
}

inline std::string temp_path(const std::string& name) {
  return std::string("/tmp/nsls_test_") + name;
}

}  // namespace nsls::test
