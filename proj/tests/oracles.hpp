#pragma once

// Independent reference computations for the tests: dense matrices, explicit
// path enumeration and scalar closed forms. Nothing here calls the library
// numerics.

#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

#include "brwlab/rate_matrix.hpp"

namespace oracle {

using Dense = std::vector<std::vector<double>>;

inline Dense dense(const brwlab::RateMatrix& k) {
  const std::size_t n = k.vertex_count();
  Dense a(n, std::vector<double>(n, 0.0));
  for (std::size_t x = 0; x < n; ++x) {
    for (std::size_t y = 0; y < n; ++y) a[x][y] = k.rate(static_cast<brwlab::Vertex>(x), static_cast<brwlab::Vertex>(y));
  }
  return a;
}

inline Dense multiply(const Dense& a, const Dense& b) {
  const std::size_t n = a.size();
  Dense c(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t l = 0; l < n; ++l)
      for (std::size_t j = 0; j < n; ++j) c[i][j] += a[i][l] * b[l][j];
  return c;
}

/// k^(n) by repeated dense multiplication, n = 0..horizon.
inline std::vector<Dense> powers(const brwlab::RateMatrix& k, std::size_t horizon) {
  const Dense a = dense(k);
  const std::size_t n = a.size();
  std::vector<Dense> out;
  Dense id(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) id[i][i] = 1.0;
  out.push_back(id);
  for (std::size_t s = 1; s <= horizon; ++s) out.push_back(multiply(out.back(), a));
  return out;
}

/// Sum of path weights x -> ... -> y of length n that visit y only at the end.
inline double first_passage_paths(const Dense& a, std::size_t x, std::size_t y, std::size_t n) {
  if (n == 0) return 0.0;
  double total = 0.0;
  // depth-first over all paths; fine for the small sizes used in tests
  struct Frame {
    std::size_t v;
    std::size_t len;
    double w;
  };
  std::vector<Frame> stack{{x, 0, 1.0}};
  while (!stack.empty()) {
    const Frame f = stack.back();
    stack.pop_back();
    for (std::size_t z = 0; z < a.size(); ++z) {
      if (a[f.v][z] == 0.0) continue;
      const double w = f.w * a[f.v][z];
      if (f.len + 1 == n) {
        if (z == y) total += w;
      } else if (z != y) {
        stack.push_back({z, f.len + 1, w});
      }
    }
  }
  return total;
}

inline double catalan(std::size_t n) {
  double c = 1.0;
  for (std::size_t i = 0; i < n; ++i) c = c * 2.0 * (2.0 * static_cast<double>(i) + 1.0) / (static_cast<double>(i) + 2.0);
  return c;
}

/// Smallest root of lambda k s^2 - (1 + lambda k) s + 1 = 0 in [0,1].
inline double scalar_extinction(double lambda, double k) {
  if (lambda * k <= 1.0) return 1.0;
  return 1.0 / (lambda * k);
}

/// Random strongly connected model on n vertices: a directed cycle plus
/// random extra edges, rates in [0.2, 2].
inline brwlab::RateMatrix random_irreducible(std::size_t n, std::mt19937_64& rng, double extra = 0.35) {
  std::uniform_real_distribution<double> rate(0.2, 2.0);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::vector<std::vector<brwlab::Entry>> rows(n);
  for (std::size_t x = 0; x < n; ++x) {
    for (std::size_t y = 0; y < n; ++y) {
      if (y == (x + 1) % n || coin(rng) < extra) {
        rows[x].push_back({static_cast<brwlab::Vertex>(y), rate(rng)});
      }
    }
  }
  return brwlab::RateMatrix(rows);
}

/// Largest eigenvalue of a nonnegative irreducible matrix by power iteration
/// on A + I.
inline double perron_root(const Dense& a, std::size_t iterations = 20000) {
  const std::size_t n = a.size();
  std::vector<double> v(n, 1.0);
  double rho = 0.0;
  for (std::size_t it = 0; it < iterations; ++it) {
    std::vector<double> w(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      w[i] = v[i];
      for (std::size_t j = 0; j < n; ++j) w[i] += a[i][j] * v[j];
    }
    double norm = 0.0;
    for (double x : w) norm = std::max(norm, x);
    for (double& x : w) x /= norm;
    rho = norm - 1.0;
    v = w;
  }
  return rho;
}

}  // namespace oracle
