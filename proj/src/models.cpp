#include "brwlab/models.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <string>

#include "brwlab/errors.hpp"
#include "brwlab/series.hpp"

namespace brwlab {
namespace {

using Rows = std::vector<std::vector<Entry>>;

void add_edge(Rows& rows, Vertex x, Vertex y, double rate) { rows[x].push_back({y, rate}); }

BrwModel finish(Rows rows, Vertex root, std::vector<std::string> labels, std::vector<bool> boundary,
                std::string constructor, nlohmann::json parameters) {
  BrwModel m;
  m.matrix = RateMatrix(rows);
  m.root = root;
  m.labels = std::move(labels);
  m.boundary = std::move(boundary);
  m.constructor = std::move(constructor);
  m.parameters = std::move(parameters);
  if (m.boundary[root]) throw ContractViolation(m.constructor + ": root lies on the boundary");
  return m;
}

struct TreeLayout {
  std::vector<std::size_t> depth;
  std::vector<Vertex> parent;
  std::vector<std::vector<Vertex>> children;
};

// Breadth-first numbering of the regular tree truncated at `depth`.
TreeLayout layout_tree(std::size_t d, std::size_t depth) {
  TreeLayout t;
  t.depth.push_back(0);
  t.parent.push_back(0);
  t.children.emplace_back();
  for (std::size_t v = 0; v < t.depth.size(); ++v) {
    if (t.depth[v] == depth) continue;
    const std::size_t kids = v == 0 ? d : d - 1;
    for (std::size_t c = 0; c < kids; ++c) {
      const auto id = static_cast<Vertex>(t.depth.size());
      t.depth.push_back(t.depth[v] + 1);
      t.parent.push_back(static_cast<Vertex>(v));
      t.children.emplace_back();
      t.children[v].push_back(id);
    }
  }
  return t;
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw ContractViolation(msg);
}

std::size_t find_root(std::vector<std::size_t>& parent, std::size_t a) {
  while (parent[a] != a) {
    parent[a] = parent[parent[a]];
    a = parent[a];
  }
  return a;
}

}  // namespace

std::vector<Vertex> BrwModel::interior() const {
  std::vector<Vertex> out;
  for (std::size_t x = 0; x < boundary.size(); ++x) {
    if (!boundary[x]) out.push_back(static_cast<Vertex>(x));
  }
  return out;
}

nlohmann::json BrwModel::provenance() const {
  return {{"constructor", constructor},
          {"parameters", parameters},
          {"vertices", vertex_count()},
          {"boundary_vertices", std::count(boundary.begin(), boundary.end(), true)}};
}

BrwModel build_single_site(double loop_rate) {
  require(loop_rate > 0.0 && std::isfinite(loop_rate), "single_site: loop rate must be > 0");
  Rows rows(1);
  add_edge(rows, 0, 0, loop_rate);
  return finish(rows, 0, {"site"}, {false}, "single_site", {{"k", loop_rate}});
}

BrwModel build_complete(std::size_t m) {
  require(m >= 2, "complete: need m >= 2");
  Rows rows(m);
  std::vector<std::string> labels;
  for (std::size_t x = 0; x < m; ++x) {
    for (std::size_t y = 0; y < m; ++y) {
      if (x != y) add_edge(rows, static_cast<Vertex>(x), static_cast<Vertex>(y), 1.0);
    }
    labels.push_back("v" + std::to_string(x));
  }
  return finish(rows, 0, labels, std::vector<bool>(m, false), "complete", {{"m", m}});
}

BrwModel build_regular_tree(std::size_t d, std::size_t depth) {
  require(d >= 3, "tree: need d >= 3");
  require(depth >= 1, "tree: need depth >= 1");
  const TreeLayout t = layout_tree(d, depth);
  const std::size_t n = t.depth.size();
  Rows rows(n);
  std::vector<std::string> labels(n);
  std::vector<bool> boundary(n, false);
  for (std::size_t v = 0; v < n; ++v) {
    if (v != 0) add_edge(rows, static_cast<Vertex>(v), t.parent[v], 1.0);
    for (Vertex c : t.children[v]) add_edge(rows, static_cast<Vertex>(v), c, 1.0);
    labels[v] = "depth=" + std::to_string(t.depth[v]);
    boundary[v] = t.depth[v] == depth;
  }
  return finish(rows, 0, labels, boundary, "tree", {{"d", d}, {"depth", depth}});
}

BrwModel build_regular_tree_radial(std::size_t d, std::size_t depth) {
  require(d >= 3, "tree_radial: need d >= 3");
  require(depth >= 1, "tree_radial: need depth >= 1");
  Rows rows(depth + 1);
  std::vector<std::string> labels(depth + 1);
  std::vector<bool> boundary(depth + 1, false);
  for (std::size_t r = 0; r <= depth; ++r) {
    const auto v = static_cast<Vertex>(r);
    if (r > 0) add_edge(rows, v, v - 1, 1.0);
    if (r < depth) add_edge(rows, v, v + 1, r == 0 ? static_cast<double>(d) : d - 1.0);
    labels[r] = "depth=" + std::to_string(r);
  }
  boundary[depth] = true;
  return finish(rows, 0, labels, boundary, "tree_radial", {{"d", d}, {"depth", depth}});
}

std::vector<Vertex> regular_tree_radial_map(std::size_t d, std::size_t depth) {
  const TreeLayout t = layout_tree(d, depth);
  std::vector<Vertex> g(t.depth.size());
  for (std::size_t v = 0; v < g.size(); ++v) g[v] = static_cast<Vertex>(t.depth[v]);
  return g;
}

BrwModel build_tree_with_lines(std::size_t d, std::size_t tree_depth, std::size_t line_depth) {
  require(d >= 3, "tree_with_lines: need d >= 3");
  require(tree_depth >= 1 && line_depth >= 1, "tree_with_lines: depths must be >= 1");
  const TreeLayout t = layout_tree(d, tree_depth);
  const std::size_t tree_n = t.depth.size();
  const std::size_t per_line = 2 * line_depth;
  const std::size_t n = tree_n * (1 + per_line);
  Rows rows(n);
  std::vector<std::string> labels(n);
  std::vector<bool> boundary(n, false);
  const auto L = static_cast<long>(line_depth);
  // offset m != 0 on the line through tree vertex v
  auto line_vertex = [&](std::size_t v, long m) -> Vertex {
    if (m == 0) return static_cast<Vertex>(v);
    const std::size_t slot = m < 0 ? static_cast<std::size_t>(m + L) : static_cast<std::size_t>(m + L - 1);
    return static_cast<Vertex>(tree_n + v * per_line + slot);
  };
  for (std::size_t v = 0; v < tree_n; ++v) {
    if (v != 0) add_edge(rows, static_cast<Vertex>(v), t.parent[v], 1.0);
    for (Vertex c : t.children[v]) add_edge(rows, static_cast<Vertex>(v), c, 1.0);
    for (long m = -L; m <= L; ++m) {
      const Vertex x = line_vertex(v, m);
      if (m > -L) add_edge(rows, x, line_vertex(v, m - 1), 1.0);
      if (m < L) add_edge(rows, x, line_vertex(v, m + 1), 1.0);
      labels[x] = "depth=" + std::to_string(t.depth[v]) + " offset=" + std::to_string(m);
      boundary[x] = (m == -L || m == L) || (m == 0 && t.depth[v] == tree_depth);
    }
  }
  return finish(rows, 0, labels, boundary, "tree_with_lines",
                {{"d", d}, {"tree_depth", tree_depth}, {"line_depth", line_depth}});
}

BrwModel build_tree_with_lines_radial(std::size_t d, std::size_t tree_depth,
                                      std::size_t line_depth) {
  require(d >= 3, "tree_with_lines_radial: need d >= 3");
  require(tree_depth >= 1 && line_depth >= 1, "tree_with_lines_radial: depths must be >= 1");
  const std::size_t width = 2 * line_depth + 1;
  const auto L = static_cast<long>(line_depth);
  const std::size_t n = (tree_depth + 1) * width;
  auto id = [&](std::size_t r, long m) {
    return static_cast<Vertex>(r * width + static_cast<std::size_t>(m + L));
  };
  Rows rows(n);
  std::vector<std::string> labels(n);
  std::vector<bool> boundary(n, false);
  for (std::size_t r = 0; r <= tree_depth; ++r) {
    for (long m = -L; m <= L; ++m) {
      const Vertex x = id(r, m);
      if (m > -L) add_edge(rows, x, id(r, m - 1), 1.0);
      if (m < L) add_edge(rows, x, id(r, m + 1), 1.0);
      if (m == 0) {
        if (r > 0) add_edge(rows, x, id(r - 1, 0), 1.0);
        if (r < tree_depth) add_edge(rows, x, id(r + 1, 0), r == 0 ? static_cast<double>(d) : d - 1.0);
      }
      labels[x] = "depth=" + std::to_string(r) + " offset=" + std::to_string(m);
      boundary[x] = (m == -L || m == L) || (m == 0 && r == tree_depth);
    }
  }
  return finish(rows, id(0, 0), labels, boundary, "tree_with_lines_radial",
                {{"d", d}, {"tree_depth", tree_depth}, {"line_depth", line_depth}});
}

std::vector<Vertex> tree_with_lines_radial_map(std::size_t d, std::size_t tree_depth,
                                               std::size_t line_depth) {
  const TreeLayout t = layout_tree(d, tree_depth);
  const std::size_t tree_n = t.depth.size();
  const std::size_t per_line = 2 * line_depth;
  const std::size_t width = per_line + 1;
  const auto L = static_cast<long>(line_depth);
  std::vector<Vertex> g(tree_n * (1 + per_line));
  for (std::size_t v = 0; v < tree_n; ++v) {
    g[v] = static_cast<Vertex>(t.depth[v] * width + line_depth);
    for (std::size_t slot = 0; slot < per_line; ++slot) {
      const long m = slot < line_depth ? static_cast<long>(slot) - L : static_cast<long>(slot) - L + 1;
      g[tree_n + v * per_line + slot] =
          static_cast<Vertex>(t.depth[v] * width + static_cast<std::size_t>(m + L));
    }
  }
  return g;
}

BrwModel build_line_with_loop(std::size_t d, std::size_t depth) {
  require(d >= 1 && depth >= 1, "line_with_loop: need d >= 1 and depth >= 1");
  const auto L = static_cast<long>(depth);
  const std::size_t n = 2 * depth + 1;
  Rows rows(n);
  std::vector<std::string> labels(n);
  std::vector<bool> boundary(n, false);
  for (long m = -L; m <= L; ++m) {
    const auto x = static_cast<Vertex>(m + L);
    if (m == 0) add_edge(rows, x, x, static_cast<double>(d));
    if (m > -L) add_edge(rows, x, x - 1, 1.0);
    if (m < L) add_edge(rows, x, x + 1, 1.0);
    labels[x] = "offset=" + std::to_string(m);
    boundary[x] = m == -L || m == L;
  }
  return finish(rows, static_cast<Vertex>(depth), labels, boundary, "line_with_loop",
                {{"d", d}, {"depth", depth}});
}

BrwModel build_star_of_lines(std::size_t d, std::size_t line_depth) {
  require(d >= 2, "star: need d >= 2");
  require(line_depth >= 1, "star: need line_depth >= 1");
  const std::size_t n = 1 + d * line_depth;
  Rows rows(n);
  std::vector<std::string> labels(n);
  std::vector<bool> boundary(n, false);
  labels[0] = "origin";
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t i = 1; i <= line_depth; ++i) {
      const auto x = static_cast<Vertex>(1 + j * line_depth + (i - 1));
      const Vertex prev = i == 1 ? 0 : x - 1;
      add_edge(rows, x, prev, 1.0);
      add_edge(rows, prev, x, 1.0);
      labels[x] = "ray=" + std::to_string(j) + " distance=" + std::to_string(i);
      boundary[x] = i == line_depth;
    }
  }
  return finish(rows, 0, labels, boundary, "star", {{"d", d}, {"depth", line_depth}});
}

BrwModel build_star_radial(std::size_t d, std::size_t line_depth) {
  require(d >= 2, "star_radial: need d >= 2");
  require(line_depth >= 1, "star_radial: need line_depth >= 1");
  const std::size_t n = line_depth + 1;
  Rows rows(n);
  std::vector<std::string> labels(n);
  std::vector<bool> boundary(n, false);
  for (std::size_t r = 0; r < n; ++r) {
    const auto x = static_cast<Vertex>(r);
    if (r > 0) add_edge(rows, x, x - 1, 1.0);
    if (r < line_depth) add_edge(rows, x, x + 1, r == 0 ? static_cast<double>(d) : 1.0);
    labels[r] = "distance=" + std::to_string(r);
  }
  boundary[line_depth] = true;
  return finish(rows, 0, labels, boundary, "star_radial", {{"d", d}, {"depth", line_depth}});
}

std::vector<Vertex> star_radial_map(std::size_t d, std::size_t line_depth) {
  std::vector<Vertex> g(1 + d * line_depth, 0);
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t i = 1; i <= line_depth; ++i) g[1 + j * line_depth + (i - 1)] = static_cast<Vertex>(i);
  }
  return g;
}

BrwModel build_bpve(const std::vector<double>& rates, std::size_t length) {
  require(length >= 1, "bpve: need length >= 1");
  require(rates.size() >= length, "bpve: rate sequence shorter than the window");
  Rows rows(length + 1);
  std::vector<std::string> labels(length + 1);
  std::vector<bool> boundary(length + 1, false);
  for (std::size_t n = 0; n < length; ++n) {
    require(rates[n] > 0.0 && std::isfinite(rates[n]),
            "bpve: rate k_" + std::to_string(n) + " must be > 0");
    add_edge(rows, static_cast<Vertex>(n), static_cast<Vertex>(n + 1), rates[n]);
  }
  for (std::size_t n = 0; n <= length; ++n) labels[n] = "generation=" + std::to_string(n);
  boundary[length] = true;
  return finish(rows, 0, labels, boundary, "bpve",
                {{"length", length}, {"rates", std::vector<double>(rates.begin(), rates.begin() + static_cast<long>(length))}});
}

BrwModel build_shrinking_loops(std::size_t length) {
  require(length >= 1, "shrinking_loops: need length >= 1");
  Rows rows(length + 1);
  std::vector<std::string> labels(length + 1);
  std::vector<bool> boundary(length + 1, false);
  for (std::size_t n = 0; n <= length; ++n) {
    const double loop = std::ldexp(1.0, -static_cast<int>(n + 1));
    const auto x = static_cast<Vertex>(n);
    add_edge(rows, x, x, loop);
    if (n < length) add_edge(rows, x, x + 1, 1.0 - loop);
    labels[n] = "n=" + std::to_string(n);
  }
  boundary[length] = true;
  return finish(rows, 0, labels, boundary, "shrinking_loops", {{"length", length}});
}

std::vector<double> remark_rates(std::size_t length) {
  std::vector<double> k(length);
  for (std::size_t n = 0; n < length; ++n) {
    const double a = 1.0 + 1.0 / static_cast<double>(n + 1);
    k[n] = a * a;
  }
  return k;
}

OscillatingSequence build_oscillating_sequence(std::size_t target_length) {
  require(target_length >= 2, "oscillating sequence: need target_length >= 2");
  const double log2 = std::log(2.0);
  auto a = [&](std::size_t n) {
    return static_cast<std::size_t>(std::ceil(log2 / std::log(1.0 + 1.0 / static_cast<double>(n))));
  };
  auto b = [&](std::size_t n) {
    return static_cast<std::size_t>(
        std::ceil(log2 / (log2 * std::log(2.0 - 1.0 / static_cast<double>(n)))));
  };
  OscillatingSequence seq;
  seq.checkpoints.push_back(1);
  while (seq.checkpoints.back() < target_length) {
    const std::size_t n = seq.checkpoints.size() + 1;
    const std::size_t prev = seq.checkpoints.back();
    seq.checkpoints.push_back((n % 2 == 0 ? a(n) : b(n)) * prev);
  }
  // k_i = 1 on (c_{2r-1}, c_{2r}], 2 on (c_{2r}, c_{2r+1}]; indices up to c_1 take 2
  seq.rates.assign(target_length, 2.0);
  for (std::size_t r = 1; 2 * r <= seq.checkpoints.size(); ++r) {
    const std::size_t lo = seq.checkpoints[2 * r - 2];
    const std::size_t hi = seq.checkpoints[2 * r - 1];
    for (std::size_t i = lo + 1; i <= hi && i < target_length; ++i) seq.rates[i] = 1.0;
  }
  return seq;
}

std::vector<double> geometric_epsilon(const std::vector<double>& rates, double delta,
                                      std::size_t count, double q) {
  require(delta > 0.0, "geometric epsilon: delta must be > 0");
  require(q > 0.0 && q < 1.0, "geometric epsilon: q must lie in (0,1)");
  std::vector<double> eps(count);
  double log_prod = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const auto fi = static_cast<double>(i);
    eps[i] = std::exp((fi + 2.0) * std::log(q) + (fi + 1.0) * std::log(delta) - log_prod);
    if (i < rates.size()) log_prod += std::log(rates[i]);
  }
  return eps;
}

FeedbackLine build_feedback_line(const std::vector<double>& rates,
                                 const std::vector<double>& epsilon, std::size_t length) {
  require(length >= 1, "feedback_line: need length >= 1");
  require(rates.size() >= length, "feedback_line: rate sequence shorter than the window");
  require(epsilon.size() >= length + 1, "feedback_line: need eps_0 .. eps_length");
  FeedbackLine out;
  out.delta = *std::min_element(rates.begin(), rates.begin() + static_cast<long>(length));
  require(out.delta > 0.0, "feedback_line: rates must be > 0");
  double log_prod = 0.0;
  for (std::size_t i = 0; i <= length; ++i) {
    require(epsilon[i] > 0.0, "feedback_line: eps_" + std::to_string(i) + " must be > 0");
    out.beta += std::exp(std::log(epsilon[i]) + log_prod -
                         static_cast<double>(i + 1) * std::log(out.delta));
    if (i < length) log_prod += std::log(rates[i]);
  }
  if (!(out.beta < 1.0)) {
    throw ContractViolation("feedback_line: beta = " + std::to_string(out.beta) + " >= 1");
  }
  Rows rows(length + 1);
  std::vector<std::string> labels(length + 1);
  std::vector<bool> boundary(length + 1, false);
  for (std::size_t n = 0; n <= length; ++n) {
    const auto x = static_cast<Vertex>(n);
    add_edge(rows, x, 0, epsilon[n]);
    if (n < length) add_edge(rows, x, x + 1, rates[n]);
    labels[n] = "n=" + std::to_string(n);
  }
  boundary[length] = true;
  out.model = finish(rows, 0, labels, boundary, "feedback_line",
                     {{"length", length}, {"beta", out.beta}, {"delta", out.delta}});
  return out;
}

Vertex ExampleFinally::index_of(long n) const {
  const auto h = static_cast<long>(forward.size());
  if (n < -h || n > h) throw ContractViolation("example_finally: site outside window");
  return static_cast<Vertex>(n + h);
}

ExampleFinally build_example_finally(std::size_t half_length,
                                     const std::vector<double>& epsilon_plus,
                                     const std::vector<double>& epsilon_minus) {
  require(half_length >= 1, "example_finally: need half_length >= 1");
  ExampleFinally ex;
  ex.forward = build_oscillating_sequence(std::max<std::size_t>(half_length, 2)).rates;
  ex.forward.resize(half_length);
  for (double k : ex.forward) ex.backward.push_back(3.0 - k);
  ex.reducible = epsilon_plus.empty() && epsilon_minus.empty();
  if (!ex.reducible) {
    require(epsilon_plus.size() >= half_length + 1 && epsilon_minus.size() >= half_length + 1,
            "example_finally: need eps_0 .. eps_half_length on both sides");
  }
  auto beta = [&](const std::vector<double>& eps, const std::vector<double>& k) {
    double s = 0.0;
    double prod = 1.0;
    for (std::size_t i = 0; i < eps.size() && i <= half_length; ++i) {
      require(eps[i] >= 0.0, "example_finally: eps must be >= 0");
      s += eps[i] * prod;
      if (i < k.size()) prod *= k[i];
    }
    return s;
  };
  ex.beta_plus = beta(epsilon_plus, ex.forward);
  ex.beta_minus = beta(epsilon_minus, ex.backward);
  if (!(ex.beta_plus < 1.0 / 3.0) || !(ex.beta_minus < 1.0 / 3.0)) {
    throw ContractViolation("example_finally: beta_plus = " + std::to_string(ex.beta_plus) +
                            ", beta_minus = " + std::to_string(ex.beta_minus) +
                            " (both must be < 1/3)");
  }
  const auto h = static_cast<long>(half_length);
  const std::size_t n = 2 * half_length + 1;
  Rows rows(n);
  std::vector<std::string> labels(n);
  std::vector<bool> boundary(n, false);
  auto idx = [&](long s) { return static_cast<Vertex>(s + h); };
  for (long s = 0; s < h; ++s) {
    add_edge(rows, idx(s), idx(s + 1), ex.forward[static_cast<std::size_t>(s)]);
    add_edge(rows, idx(-s), idx(-s - 1), ex.backward[static_cast<std::size_t>(s)]);
  }
  if (!ex.reducible) {
    // the site 0 collects both eps_0 and eps_{-0} as a loop
    std::map<Vertex, double> back;
    for (long s = 0; s <= h; ++s) {
      back[idx(s)] += epsilon_plus[static_cast<std::size_t>(s)];
      back[idx(-s)] += epsilon_minus[static_cast<std::size_t>(s)];
    }
    for (auto [x, e] : back) {
      if (e > 0.0) add_edge(rows, x, idx(0), e);
    }
  }
  for (long s = -h; s <= h; ++s) {
    labels[idx(s)] = "site=" + std::to_string(s);
    boundary[idx(s)] = s == -h || s == h;
  }
  ex.model = finish(rows, idx(0), labels, boundary, "example_finally",
                    {{"half_length", half_length},
                     {"reducible", ex.reducible},
                     {"beta_plus", ex.beta_plus},
                     {"beta_minus", ex.beta_minus}});
  return ex;
}

ExampleFinally build_example_finally(std::size_t half_length, bool reducible) {
  if (reducible) return build_example_finally(half_length, {}, {});
  const auto fwd = build_oscillating_sequence(std::max<std::size_t>(half_length, 2)).rates;
  std::vector<double> bwd;
  for (double k : fwd) bwd.push_back(3.0 - k);
  return build_example_finally(half_length, geometric_epsilon(fwd, 1.0, half_length + 1),
                               geometric_epsilon(bwd, 1.0, half_length + 1));
}

TreeLikeModel build_periodic_tree_like(const std::vector<PieceSpec>& pieces,
                                       const std::vector<GlueMap>& glue, std::size_t root_label,
                                       std::size_t depth, Vertex x0) {
  const std::size_t labels_n = pieces.size();
  require(labels_n >= 1, "tree_like: need at least one piece");
  require(root_label < labels_n, "tree_like: root label out of range");
  require(x0 < pieces[root_label].matrix.vertex_count(), "tree_like: x0 outside the root piece");
  for (std::size_t i = 0; i < labels_n; ++i) {
    require(pieces[i].matrix.vertex_count() >= 1, "tree_like: empty piece");
    require(is_irreducible(pieces[i].matrix),
            "tree_like: piece " + std::to_string(i) + " is not irreducible");
  }
  // label graph checks
  {
    std::vector<std::vector<Entry>> lrows(labels_n);
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (const GlueMap& g : glue) {
      require(g.from < labels_n && g.to < labels_n, "tree_like: glue label out of range");
      require(seen.insert({g.from, g.to}).second, "tree_like: duplicate label edge");
      lrows[g.from].push_back({static_cast<Vertex>(g.to), 1.0});
      std::set<Vertex> dom;
      std::set<Vertex> img;
      for (auto [a, b] : g.pairs) {
        require(a < pieces[g.from].matrix.vertex_count(),
                "tree_like: glue (" + std::to_string(g.from) + "," + std::to_string(g.to) +
                    ") domain vertex " + std::to_string(a) + " outside its piece");
        require(b < pieces[g.to].matrix.vertex_count(),
                "tree_like: glue (" + std::to_string(g.from) + "," + std::to_string(g.to) +
                    ") image vertex " + std::to_string(b) + " outside its piece");
        require(dom.insert(a).second && img.insert(b).second, "tree_like: glue map not injective");
      }
    }
    if (!glue.empty()) {
      require(is_irreducible(RateMatrix(lrows)), "tree_like: label graph not irreducible");
    }
  }

  TreeLikeModel out;
  std::vector<std::size_t> node_parent;
  std::vector<std::vector<std::optional<std::size_t>>> node_child;  // by glue index
  out.node_label.push_back(root_label);
  out.node_depth.push_back(0);
  node_parent.push_back(0);
  node_child.emplace_back(glue.size());
  for (std::size_t s = 0; s < out.node_label.size(); ++s) {
    if (out.node_depth[s] == depth) continue;
    for (std::size_t e = 0; e < glue.size(); ++e) {
      if (glue[e].from != out.node_label[s]) continue;
      const std::size_t c = out.node_label.size();
      out.node_label.push_back(glue[e].to);
      out.node_depth.push_back(out.node_depth[s] + 1);
      node_parent.push_back(s);
      node_child.emplace_back(glue.size());
      node_child[s][e] = c;
    }
  }
  out.tree_nodes = out.node_label.size();

  std::vector<std::size_t> offset(out.tree_nodes + 1, 0);
  for (std::size_t s = 0; s < out.tree_nodes; ++s) {
    offset[s + 1] = offset[s] + pieces[out.node_label[s]].matrix.vertex_count();
  }
  const std::size_t slots = offset.back();
  std::vector<std::size_t> uf(slots);
  std::iota(uf.begin(), uf.end(), 0);
  for (std::size_t s = 0; s < out.tree_nodes; ++s) {
    for (std::size_t e = 0; e < glue.size(); ++e) {
      if (!node_child[s][e]) continue;
      const std::size_t c = *node_child[s][e];
      for (auto [a, b] : glue[e].pairs) {
        const std::size_t ra = find_root(uf, offset[s] + a);
        const std::size_t rb = find_root(uf, offset[c] + b);
        if (ra != rb) uf[std::max(ra, rb)] = std::min(ra, rb);
      }
    }
  }
  std::vector<Vertex> cls(slots);
  std::vector<std::size_t> first_slot;
  std::map<std::size_t, Vertex> rep_to_class;
  for (std::size_t i = 0; i < slots; ++i) {
    const std::size_t r = find_root(uf, i);
    auto [it, fresh] = rep_to_class.emplace(r, static_cast<Vertex>(first_slot.size()));
    if (fresh) first_slot.push_back(i);
    cls[i] = it->second;
  }
  const std::size_t n = first_slot.size();
  out.merge_multiplicity.assign(n, 0);
  for (std::size_t i = 0; i < slots; ++i) ++out.merge_multiplicity[cls[i]];

  std::vector<std::size_t> slot_node(slots);
  for (std::size_t s = 0; s < out.tree_nodes; ++s) {
    for (std::size_t i = offset[s]; i < offset[s + 1]; ++i) slot_node[i] = s;
  }

  std::map<std::pair<Vertex, Vertex>, double> rates;
  for (std::size_t s = 0; s < out.tree_nodes; ++s) {
    const RateMatrix& k = pieces[out.node_label[s]].matrix;
    for (Vertex u = 0; u < k.vertex_count(); ++u) {
      for (const Entry& e : k.row(u)) {
        const auto key = std::make_pair(cls[offset[s] + u], cls[offset[s] + e.target]);
        auto [it, fresh] = rates.emplace(key, e.rate);
        if (!fresh && it->second != e.rate) {
          throw ContractViolation("tree_like: conflicting rates " + std::to_string(it->second) +
                                  " and " + std::to_string(e.rate) + " on merged pair (" +
                                  std::to_string(key.first) + "," + std::to_string(key.second) + ")");
        }
      }
    }
  }
  Rows rows(n);
  for (auto [key, r] : rates) add_edge(rows, key.first, key.second, r);

  std::vector<std::string> labels(n);
  std::vector<bool> boundary(n, false);
  for (Vertex x = 0; x < n; ++x) {
    const std::size_t i = first_slot[x];
    const std::size_t s = slot_node[i];
    labels[x] = "node=" + std::to_string(s) + " label=" + std::to_string(out.node_label[s] + 1) +
                " v=" + std::to_string(i - offset[s]);
  }
  for (std::size_t s = 0; s < out.tree_nodes; ++s) {
    if (out.node_depth[s] != depth) continue;
    // a vertex loses mass if the next copy would add rate to its row
    for (const GlueMap& g : glue) {
      if (g.from != out.node_label[s]) continue;
      std::map<Vertex, Vertex> image;  // child piece vertex -> window vertex
      for (auto [a, b] : g.pairs) image[b] = cls[offset[s] + a];
      const RateMatrix& child = pieces[g.to].matrix;
      for (auto [b, v] : image) {
        for (const Entry& e : child.row(b)) {
          auto it = image.find(e.target);
          if (it == image.end()) {
            boundary[v] = true;
            continue;
          }
          auto r = rates.find({v, it->second});
          if (r == rates.end() || r->second != e.rate) boundary[v] = true;
        }
      }
    }
  }

  // subtree shifts for every node carrying the root label
  auto shift = [&](std::size_t t, std::size_t s) -> std::optional<std::size_t> {
    std::vector<std::size_t> path;
    for (std::size_t u = s; u != 0; u = node_parent[u]) {
      const std::size_t p = node_parent[u];
      for (std::size_t e = 0; e < glue.size(); ++e) {
        if (node_child[p][e] == u) {
          path.push_back(e);
          break;
        }
      }
    }
    std::size_t cur = t;
    for (auto it = path.rbegin(); it != path.rend(); ++it) {
      if (!node_child[cur][*it]) return std::nullopt;
      cur = *node_child[cur][*it];
    }
    return cur;
  };
  for (std::size_t t = 0; t < out.tree_nodes; ++t) {
    if (out.node_label[t] != root_label) continue;
    out.y_set.push_back(cls[offset[t] + x0]);
    std::vector<std::optional<Vertex>> map(n);
    for (Vertex x = 0; x < n; ++x) {
      const std::size_t i = first_slot[x];
      const std::size_t s = slot_node[i];
      if (auto img = shift(t, s)) map[x] = cls[offset[*img] + (i - offset[s])];
    }
    out.copy_maps.push_back(std::move(map));
  }

  nlohmann::json gl = nlohmann::json::array();
  for (const GlueMap& g : glue) gl.push_back({{"from", g.from}, {"to", g.to}, {"pairs", g.pairs}});
  out.model = finish(rows, cls[offset[0] + x0], labels, boundary, "periodic_tree_like",
                     {{"labels", labels_n}, {"root_label", root_label}, {"depth", depth},
                      {"x0", x0}, {"glue", gl}});
  return out;
}

TreeLikeModel build_example_tree_like(std::size_t depth) {
  auto path = [](std::size_t n) {
    Rows rows(n);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      add_edge(rows, static_cast<Vertex>(i), static_cast<Vertex>(i + 1), 1.0);
      add_edge(rows, static_cast<Vertex>(i + 1), static_cast<Vertex>(i), 1.0);
    }
    return PieceSpec{RateMatrix(rows)};
  };
  // labels 1, 2, 3 are indices 0, 1, 2
  std::vector<PieceSpec> pieces = {path(2), path(3), path(2)};
  std::vector<GlueMap> glue = {
      {2, 0, {{1, 0}}},  // 3 -> 1
      {2, 1, {{1, 0}}},  // 3 -> 2
      {0, 1, {{1, 0}}},  // 1 -> 2
      {1, 2, {{2, 0}}},  // 2 -> 3
  };
  TreeLikeModel m = build_periodic_tree_like(pieces, glue, 2, depth, 0);
  m.model.constructor = "example_tree_like";
  m.model.parameters = {{"depth", depth}};
  return m;
}

ProjectionReport verify_projection(const BrwModel& source, const BrwModel& target,
                                   const std::vector<Vertex>& g, std::size_t horizon) {
  const std::size_t n = source.vertex_count();
  const std::size_t m = target.vertex_count();
  require(g.size() == n, "verify_projection: map size differs from source window");
  std::vector<bool> hit(m, false);
  for (Vertex y : g) {
    require(y < m, "verify_projection: map image outside target window");
    hit[y] = true;
  }
  for (std::size_t y = 0; y < m; ++y) {
    require(hit[y], "verify_projection: map not surjective (missing " + std::to_string(y) + ")");
  }

  ProjectionReport rep;
  std::vector<bool> bad_row(n, false);
  for (Vertex x = 0; x < n; ++x) {
    std::map<Vertex, double> fiber;
    for (const Entry& e : source.matrix.row(x)) fiber[g[e.target]] += e.rate;
    for (const Entry& e : target.matrix.row(g[x])) fiber.try_emplace(e.target, 0.0);
    for (auto [y, sum] : fiber) {
      const double want = target.matrix.rate(g[x], y);
      if (std::abs(sum - want) > 1e-12 * std::max(1.0, std::abs(want))) {
        rep.violations.push_back({x, y, sum, want, static_cast<bool>(source.boundary[x])});
        bad_row[x] = true;
      }
    }
  }
  rep.valid = std::none_of(rep.violations.begin(), rep.violations.end(),
                           [](const FiberViolation& v) { return !v.on_boundary; });
  rep.boundary_rows_reported = static_cast<std::size_t>(std::count_if(
      rep.violations.begin(), rep.violations.end(), [](const FiberViolation& v) { return v.on_boundary; }));

  // steps needed to reach a violating row
  constexpr std::size_t kFar = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> dist(n, kFar);
  std::deque<Vertex> queue;
  for (Vertex x = 0; x < n; ++x) {
    if (bad_row[x]) {
      dist[x] = 0;
      queue.push_back(x);
    }
  }
  const auto rev = source.matrix.reverse_adjacency();
  while (!queue.empty()) {
    const Vertex v = queue.front();
    queue.pop_front();
    for (Vertex u : rev[v]) {
      if (dist[u] == kFar) {
        dist[u] = dist[v] + 1;
        queue.push_back(u);
      }
    }
  }
  const auto src = log_generation_masses_all(source.matrix, horizon);
  const auto tgt = log_generation_masses_all(target.matrix, horizon);
  for (std::size_t step = 1; step <= horizon; ++step) {
    for (Vertex x = 0; x < n; ++x) {
      if (dist[x] != kFar && dist[x] < step) continue;
      ++rep.mass_checks;
      const double a = src[step][x];
      const double b = tgt[step][g[x]];
      double err = 0.0;
      if (std::isinf(a) || std::isinf(b)) {
        err = (a == b) ? 0.0 : 1.0;
      } else {
        err = std::abs(std::expm1(a - b));
      }
      rep.max_mass_relative_error = std::max(rep.max_mass_relative_error, err);
      if (err > 1e-9) ++rep.mass_failures;
    }
  }
  if (rep.mass_failures > 0) rep.valid = false;
  return rep;
}

namespace {

std::size_t get_size(const nlohmann::json& p, const char* key, std::optional<std::size_t> def = {}) {
  if (!p.contains(key)) {
    if (def) return *def;
    throw ContractViolation(std::string("model parameter '") + key + "' is required");
  }
  const auto& v = p.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw ContractViolation(std::string("model parameter '") + key + "' must be a nonnegative integer");
  }
  return v.get<std::size_t>();
}

double get_real(const nlohmann::json& p, const char* key, std::optional<double> def = {}) {
  if (!p.contains(key)) {
    if (def) return *def;
    throw ContractViolation(std::string("model parameter '") + key + "' is required");
  }
  const auto& v = p.at(key);
  if (!v.is_number()) throw ContractViolation(std::string("model parameter '") + key + "' must be a number");
  return v.get<double>();
}

}  // namespace

BrwModel make_model(const std::string& name, const nlohmann::json& p) {
  if (!p.is_object()) throw ContractViolation("model parameters must be a JSON object");
  if (name == "single_site") return build_single_site(get_real(p, "k", 1.0));
  if (name == "complete") return build_complete(get_size(p, "m"));
  if (name == "tree") return build_regular_tree(get_size(p, "d", 3), get_size(p, "depth", 8));
  if (name == "tree_radial") return build_regular_tree_radial(get_size(p, "d", 3), get_size(p, "depth", 40));
  if (name == "tree_with_lines") {
    return build_tree_with_lines(get_size(p, "d", 4), get_size(p, "tree_depth", 3),
                                 get_size(p, "line_depth", 8));
  }
  if (name == "tree_with_lines_radial") {
    return build_tree_with_lines_radial(get_size(p, "d", 4), get_size(p, "tree_depth", 40),
                                        get_size(p, "line_depth", 40));
  }
  if (name == "line_with_loop") return build_line_with_loop(get_size(p, "d", 4), get_size(p, "depth", 400));
  if (name == "star") return build_star_of_lines(get_size(p, "d", 4), get_size(p, "depth", 40));
  if (name == "star_radial") return build_star_radial(get_size(p, "d", 4), get_size(p, "depth", 40));
  if (name == "bpve") {
    const std::size_t len = get_size(p, "length", 200);
    return build_bpve(std::vector<double>(len, get_real(p, "k", 2.0)), len);
  }
  if (name == "bpve_remark") {
    const std::size_t len = get_size(p, "length", 200);
    return build_bpve(remark_rates(len), len);
  }
  if (name == "oscillating") {
    const std::size_t len = get_size(p, "length", 1920);
    return build_bpve(build_oscillating_sequence(len).rates, len);
  }
  if (name == "feedback_line") {
    const std::size_t len = get_size(p, "length", 200);
    const auto rates = build_oscillating_sequence(std::max<std::size_t>(len, 2)).rates;
    const double delta = *std::min_element(rates.begin(), rates.begin() + static_cast<long>(len));
    return build_feedback_line(rates, geometric_epsilon(rates, delta, len + 1), len).model;
  }
  if (name == "example_finally") {
    const bool reducible = p.contains("reducible") && p.at("reducible").get<bool>();
    return build_example_finally(get_size(p, "half_length", 200), reducible).model;
  }
  if (name == "example_tree_like" || name == "periodic_tree_like") {
    return build_example_tree_like(get_size(p, "depth", 6)).model;
  }
  if (name == "shrinking_loops") return build_shrinking_loops(get_size(p, "length", 10));
  throw ContractViolation("unknown model '" + name + "'");
}

std::vector<std::pair<std::string, std::string>> zoo_catalog() {
  return {
      {"single_site", "k (loop rate, default 1)"},
      {"complete", "m (vertices)"},
      {"tree", "d, depth"},
      {"tree_radial", "d, depth (distance quotient of tree)"},
      {"tree_with_lines", "d, tree_depth, line_depth"},
      {"tree_with_lines_radial", "d, tree_depth, line_depth"},
      {"line_with_loop", "d, depth (window [-depth, depth], loop d at 0)"},
      {"star", "d, depth"},
      {"star_radial", "d, depth"},
      {"bpve", "k (constant rate), length"},
      {"bpve_remark", "length (k_n = (1+1/(n+1))^2)"},
      {"oscillating", "length (rates 1/2 in long stretches)"},
      {"feedback_line", "length (oscillating rates, geometric return rates)"},
      {"example_finally", "half_length, reducible (bool)"},
      {"example_tree_like", "depth (three-label periodic tree-like instance)"},
      {"shrinking_loops", "length (loops 2^-(n+1))"},
  };
}

}  // namespace brwlab
