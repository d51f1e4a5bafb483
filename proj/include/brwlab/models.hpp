#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "brwlab/rate_matrix.hpp"
#include "json.hpp"

namespace brwlab {

/// A rate matrix on a finite window plus the root, per-vertex labels,
/// truncation-frontier flags and the constructor call that produced it.
struct BrwModel {
  RateMatrix matrix;
  Vertex root = 0;
  std::vector<std::string> labels;
  std::vector<bool> boundary;
  std::string constructor;
  nlohmann::json parameters = nlohmann::json::object();

  std::size_t vertex_count() const { return matrix.vertex_count(); }
  std::vector<Vertex> interior() const;
  nlohmann::json provenance() const;
};

BrwModel build_single_site(double loop_rate);
/// Adjacency rates on K_m (no loops).
BrwModel build_complete(std::size_t m);
BrwModel build_regular_tree(std::size_t d, std::size_t depth);
/// Quotient of the regular tree by distance from the root.
BrwModel build_regular_tree_radial(std::size_t d, std::size_t depth);
BrwModel build_tree_with_lines(std::size_t d, std::size_t tree_depth, std::size_t line_depth);
/// Quotient of the tree-with-lines by (tree depth, line offset).
BrwModel build_tree_with_lines_radial(std::size_t d, std::size_t tree_depth,
                                      std::size_t line_depth);
/// Line window [-depth, depth] with loop k_00 = d and unit nearest-neighbour rates.
BrwModel build_line_with_loop(std::size_t d, std::size_t depth);
BrwModel build_star_of_lines(std::size_t d, std::size_t line_depth);
/// Quotient of the star by distance from the origin: 0 -> 1 at rate d.
BrwModel build_star_radial(std::size_t d, std::size_t line_depth);
/// Oriented path 0 -> 1 -> ... -> length with k_{n,n+1} = rates[n].
BrwModel build_bpve(const std::vector<double>& rates, std::size_t length);
/// k_{n,n+1} = 1 - 2^{-(n+1)}, k_{nn} = 2^{-(n+1)} on 0..length.
BrwModel build_shrinking_loops(std::size_t length);

/// Rates k_n = (1 + 1/(n+1))^2, n = 0..length-1.
std::vector<double> remark_rates(std::size_t length);

struct OscillatingSequence {
  std::vector<double> rates;          // k_0 .. k_{length-1}, each 1 or 2
  std::vector<std::size_t> checkpoints;  // c_1, c_2, ... (c_1 = 1)
};

/// Long alternating stretches of 1s and 2s; rates cover at least target_length
/// indices and checkpoints run until one reaches target_length.
OscillatingSequence build_oscillating_sequence(std::size_t target_length);

/// Geometric return rates eps_i = q^{i+2} delta^{i+1} / prod_{j<i} k_j.
std::vector<double> geometric_epsilon(const std::vector<double>& rates, double delta,
                                      std::size_t count, double q = 0.25);

struct FeedbackLine {
  BrwModel model;
  double beta = 0.0;
  double delta = 0.0;
};

/// Path 0..length with k_{n,n+1} = rates[n] and k_{n,0} = eps[n].
FeedbackLine build_feedback_line(const std::vector<double>& rates,
                                 const std::vector<double>& epsilon, std::size_t length);

struct ExampleFinally {
  BrwModel model;
  std::vector<double> forward;   // k_{n,n+1}
  std::vector<double> backward;  // k_{-n,-n-1} = 3 - k_{n,n+1}
  double beta_plus = 0.0;
  double beta_minus = 0.0;
  bool reducible = false;
  /// Window index of site n in [-half_length, half_length].
  Vertex index_of(long n) const;
};

/// Two-sided window with forward rates from the oscillating sequence. Empty
/// epsilon vectors give the reducible variant.
ExampleFinally build_example_finally(std::size_t half_length,
                                     const std::vector<double>& epsilon_plus,
                                     const std::vector<double>& epsilon_minus);
/// Default schedule: geometric epsilon with q = 1/4 on both sides.
ExampleFinally build_example_finally(std::size_t half_length, bool reducible = false);

struct PieceSpec {
  RateMatrix matrix;  // must be irreducible
};

/// Glue map for label edge (from, to): pairs (a, phi(a)) with a in B_from,
/// phi(a) in B_to.
struct GlueMap {
  std::size_t from = 0;
  std::size_t to = 0;
  std::vector<std::pair<Vertex, Vertex>> pairs;
};

struct TreeLikeModel {
  BrwModel model;
  std::size_t tree_nodes = 0;
  std::vector<std::size_t> node_depth;
  std::vector<std::size_t> node_label;
  /// Number of piece vertices merged into each model vertex.
  std::vector<std::size_t> merge_multiplicity;
  /// Copies of x0 inside every piece labelled root_label.
  std::vector<Vertex> y_set;
  /// For each element of y_set, the subtree shift as a partial map on the
  /// window (nullopt where the image falls outside the window).
  std::vector<std::vector<std::optional<Vertex>>> copy_maps;
};

/// Unfolds the label graph from root_label to the given tree depth and glues
/// copies of the pieces by vertex identification.
TreeLikeModel build_periodic_tree_like(const std::vector<PieceSpec>& pieces,
                                       const std::vector<GlueMap>& glue, std::size_t root_label,
                                       std::size_t depth, Vertex x0 = 0);

/// Three labels {1,2,3} (indices 0,1,2), root label 3, label edges
/// 3->1, 3->2, 1->2, 2->3, pieces of two and three vertices.
TreeLikeModel build_example_tree_like(std::size_t depth);

struct FiberViolation {
  Vertex x = 0;
  Vertex y = 0;  // target-model vertex
  double fiber_sum = 0.0;
  double target_rate = 0.0;
  bool on_boundary = false;
};

struct ProjectionReport {
  bool valid = false;  // no violation on non-boundary source rows
  std::vector<FiberViolation> violations;
  std::size_t boundary_rows_reported = 0;
  std::size_t mass_checks = 0;
  std::size_t mass_failures = 0;
  double max_mass_relative_error = 0.0;
};

/// Checks sum_{z in g^{-1}(y)} k_{xz} = k~_{g(x)y} (tolerance 1e-12) and the
/// induced identity T^n_x = T~^n_{g(x)} for n <= horizon on vertices whose
/// n-step neighbourhood avoids violating rows.
ProjectionReport verify_projection(const BrwModel& source, const BrwModel& target,
                                   const std::vector<Vertex>& g, std::size_t horizon = 20);

/// Regular tree -> radial quotient, tree-with-lines -> radial quotient,
/// star -> radial quotient, complete -> single site (depth-ordered ids).
std::vector<Vertex> regular_tree_radial_map(std::size_t d, std::size_t depth);
std::vector<Vertex> tree_with_lines_radial_map(std::size_t d, std::size_t tree_depth,
                                               std::size_t line_depth);
std::vector<Vertex> star_radial_map(std::size_t d, std::size_t line_depth);

/// Builds a zoo model from a constructor name and JSON parameters.
BrwModel make_model(const std::string& constructor, const nlohmann::json& parameters);
/// Names accepted by make_model, with a one-line parameter summary each.
std::vector<std::pair<std::string, std::string>> zoo_catalog();

}  // namespace brwlab
