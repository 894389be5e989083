#pragma once

// Small random generators for property tests. Each case draws from its own
// seeded engine so a failing case can be replayed from the printed seed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "jmd/bridge_matrix.hpp"
#include "jmd/error.hpp"
#include "jmd/types.hpp"

namespace jmd::testing {

inline constexpr int kPropertyCases = 1000;

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  std::mt19937_64& engine() { return rng_; }

  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  double uniform(double lo = -1.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(rng_); }
  bool coin(double p = 0.5) { return std::bernoulli_distribution(p)(rng_); }

  Vector vector(Index n) {
    Vector v(n);
    for (Index i = 0; i < n; ++i) v[i] = normal();
    return v;
  }

  // Guaranteed nonconstant for n >= 2.
  Vector nonconstant(Index n) {
    Vector v = vector(n);
    if (n >= 2) v[1] = v[0] + 1.0 + std::abs(v[1]);
    return v;
  }

  Matrix matrix(Index rows, Index cols) {
    Matrix m(rows, cols);
    for (Index j = 0; j < cols; ++j)
      for (Index i = 0; i < rows; ++i) m(i, j) = normal();
    return m;
  }

  // Row-stochastic dense matrix with between 1 and `cap` positive entries per
  // row; `empty_rate` of rows are left empty.
  Matrix bridge_values(Index rows, Index cols, int cap, double empty_rate = 0.0) {
    Matrix b = Matrix::Zero(rows, cols);
    for (Index i = 0; i < rows; ++i) {
      if (coin(empty_rate)) continue;
      const int k = integer(1, std::min<int>(cap, static_cast<int>(cols)));
      for (int t = 0; t < k; ++t) b(i, integer(0, static_cast<int>(cols) - 1)) += uniform(0.1, 1.0);
      b.row(i) /= b.row(i).sum();
    }
    return b;
  }

  std::vector<Index> permutation(Index n) {
    std::vector<Index> p(static_cast<size_t>(n));
    for (Index i = 0; i < n; ++i) p[static_cast<size_t>(i)] = i;
    std::shuffle(p.begin(), p.end(), rng_);
    return p;
  }

 private:
  std::mt19937_64 rng_;
};

/// Code of the jmd::Error thrown by fn, or nullopt when it returns normally.
template <class Fn>
std::optional<ErrorCode> error_code(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

inline std::uint64_t case_seed(std::uint64_t suite, int i) { return suite * 1'000'003ULL + static_cast<std::uint64_t>(i); }

}  // namespace jmd::testing
