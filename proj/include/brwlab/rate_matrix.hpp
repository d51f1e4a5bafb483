#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace brwlab {

using Vertex = std::uint32_t;

struct Entry {
  Vertex target;
  double rate;
};

/// Row-finite nonnegative rate matrix k_{xy} over a finite vertex window,
/// stored row-compressed. Rows are sorted by target; zero rates are not stored.
/// Immutable once built.
class RateMatrix {
 public:
  RateMatrix() = default;

  /// Builds from per-vertex rows. Rejects negative or non-finite rates,
  /// targets outside the window and duplicate (source, target) pairs.
  explicit RateMatrix(const std::vector<std::vector<Entry>>& rows);

  std::size_t vertex_count() const noexcept { return row_sums_.size(); }
  std::size_t nonzero_count() const noexcept { return entries_.size(); }

  std::span<const Entry> row(Vertex x) const;
  double row_sum(Vertex x) const { return row_sums_.at(x); }
  const std::vector<double>& row_sums() const noexcept { return row_sums_; }

  /// k_{xy}, zero when absent.
  double rate(Vertex x, Vertex y) const;

  double max_row_sum() const noexcept;
  /// Smallest positive rate, 0 when the matrix has no positive entry.
  double min_positive_rate() const noexcept;

  /// Kv(x) = sum_y k_{xy} v(y).
  std::vector<double> apply(std::span<const double> v) const;
  /// (uK)(y) = sum_x u(x) k_{xy}.
  std::vector<double> left_apply(std::span<const double> u) const;

  /// Predecessor lists, for reverse searches.
  std::vector<std::vector<Vertex>> reverse_adjacency() const;

  bool operator==(const RateMatrix&) const = default;

 private:
  std::vector<std::size_t> offsets_{0};
  std::vector<Entry> entries_;
  std::vector<double> row_sums_;
};

inline bool operator==(const Entry& a, const Entry& b) {
  return a.target == b.target && a.rate == b.rate;
}

/// Sparse product Kv; throws ContractViolation on dimension mismatch.
std::vector<double> row_apply(const RateMatrix& k, std::span<const double> v);

/// Strong connectivity of the positive-rate digraph.
bool is_irreducible(const RateMatrix& k);

/// Breadth-first step distances from `source` along positive rates;
/// unreachable vertices get SIZE_MAX.
std::vector<std::size_t> bfs_distances(const RateMatrix& k, Vertex source);

}  // namespace brwlab
