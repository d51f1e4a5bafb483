#include "brwlab/rate_matrix.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <string>

#include "brwlab/errors.hpp"

namespace brwlab {

RateMatrix::RateMatrix(const std::vector<std::vector<Entry>>& rows) {
  const std::size_t n = rows.size();
  if (n > std::numeric_limits<Vertex>::max()) {
    throw ContractViolation("rate matrix: window too large");
  }
  offsets_.reserve(n + 1);
  row_sums_.reserve(n);
  std::vector<Entry> sorted;
  for (std::size_t x = 0; x < n; ++x) {
    sorted = rows[x];
    std::sort(sorted.begin(), sorted.end(),
              [](const Entry& a, const Entry& b) { return a.target < b.target; });
    double sum = 0.0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      const Entry& e = sorted[i];
      if (!std::isfinite(e.rate) || e.rate < 0.0) {
        throw ContractViolation("rate matrix: rate k(" + std::to_string(x) + "," +
                                std::to_string(e.target) + ") must be finite and >= 0");
      }
      if (e.target >= n) {
        throw ContractViolation("rate matrix: target " + std::to_string(e.target) +
                                " outside window of " + std::to_string(n));
      }
      if (i > 0 && sorted[i - 1].target == e.target) {
        throw ContractViolation("rate matrix: duplicate entry (" + std::to_string(x) + "," +
                                std::to_string(e.target) + ")");
      }
      if (e.rate == 0.0) continue;
      entries_.push_back(e);
      sum += e.rate;
    }
    offsets_.push_back(entries_.size());
    row_sums_.push_back(sum);
  }
}

std::span<const Entry> RateMatrix::row(Vertex x) const {
  if (x >= vertex_count()) throw ContractViolation("rate matrix: vertex outside window");
  return {entries_.data() + offsets_[x], offsets_[x + 1] - offsets_[x]};
}

double RateMatrix::rate(Vertex x, Vertex y) const {
  auto r = row(x);
  auto it = std::lower_bound(r.begin(), r.end(), y,
                             [](const Entry& e, Vertex t) { return e.target < t; });
  return (it != r.end() && it->target == y) ? it->rate : 0.0;
}

double RateMatrix::max_row_sum() const noexcept {
  double m = 0.0;
  for (double s : row_sums_) m = std::max(m, s);
  return m;
}

double RateMatrix::min_positive_rate() const noexcept {
  double m = std::numeric_limits<double>::infinity();
  for (const Entry& e : entries_) m = std::min(m, e.rate);
  return std::isinf(m) ? 0.0 : m;
}

std::vector<double> RateMatrix::apply(std::span<const double> v) const {
  std::vector<double> out(vertex_count(), 0.0);
  for (std::size_t x = 0; x < vertex_count(); ++x) {
    double acc = 0.0;
    for (std::size_t i = offsets_[x]; i < offsets_[x + 1]; ++i) {
      acc += entries_[i].rate * v[entries_[i].target];
    }
    out[x] = acc;
  }
  return out;
}

std::vector<double> RateMatrix::left_apply(std::span<const double> u) const {
  std::vector<double> out(vertex_count(), 0.0);
  for (std::size_t x = 0; x < vertex_count(); ++x) {
    const double ux = u[x];
    if (ux == 0.0) continue;
    for (std::size_t i = offsets_[x]; i < offsets_[x + 1]; ++i) {
      out[entries_[i].target] += ux * entries_[i].rate;
    }
  }
  return out;
}

std::vector<std::vector<Vertex>> RateMatrix::reverse_adjacency() const {
  std::vector<std::vector<Vertex>> pred(vertex_count());
  for (std::size_t x = 0; x < vertex_count(); ++x) {
    for (std::size_t i = offsets_[x]; i < offsets_[x + 1]; ++i) {
      pred[entries_[i].target].push_back(static_cast<Vertex>(x));
    }
  }
  return pred;
}

std::vector<double> row_apply(const RateMatrix& k, std::span<const double> v) {
  if (v.size() != k.vertex_count()) {
    throw ContractViolation("row_apply: vector has " + std::to_string(v.size()) +
                            " entries, window has " + std::to_string(k.vertex_count()));
  }
  for (double value : v) {
    if (!std::isfinite(value)) throw ContractViolation("row_apply: non-finite entry");
  }
  return k.apply(v);
}

std::vector<std::size_t> bfs_distances(const RateMatrix& k, Vertex source) {
  constexpr auto kUnreached = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> dist(k.vertex_count(), kUnreached);
  if (source >= k.vertex_count()) throw ContractViolation("bfs: vertex outside window");
  std::queue<Vertex> frontier;
  dist[source] = 0;
  frontier.push(source);
  while (!frontier.empty()) {
    Vertex x = frontier.front();
    frontier.pop();
    for (const Entry& e : k.row(x)) {
      if (dist[e.target] == kUnreached) {
        dist[e.target] = dist[x] + 1;
        frontier.push(e.target);
      }
    }
  }
  return dist;
}

bool is_irreducible(const RateMatrix& k) {
  const std::size_t n = k.vertex_count();
  if (n == 0) return false;
  if (n == 1) return true;
  auto forward = bfs_distances(k, 0);
  if (std::any_of(forward.begin(), forward.end(),
                  [](std::size_t d) { return d == std::numeric_limits<std::size_t>::max(); })) {
    return false;
  }
  auto pred = k.reverse_adjacency();
  std::vector<char> seen(n, 0);
  std::queue<Vertex> frontier;
  seen[0] = 1;
  frontier.push(0);
  std::size_t count = 1;
  while (!frontier.empty()) {
    Vertex x = frontier.front();
    frontier.pop();
    for (Vertex p : pred[x]) {
      if (!seen[p]) {
        seen[p] = 1;
        ++count;
        frontier.push(p);
      }
    }
  }
  return count == n;
}

}  // namespace brwlab
