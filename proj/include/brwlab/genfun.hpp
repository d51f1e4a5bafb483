#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "brwlab/models.hpp"

namespace brwlab {

/// A point z in [0,1]^X with the iteration that produced it.
struct GenFunVector {
  std::vector<double> values;
  std::size_t iteration_count = 0;
  double sup_norm_delta = 0.0;
  bool converged = true;
  bool slow_convergence = false;  // geometric progress stalled near criticality
};

/// G(z)(x) = 1 / (1 + lambda * sum_y k_xy (1 - z(y))).
GenFunVector apply_G(const RateMatrix& k, double lambda, const GenFunVector& z);
std::vector<double> apply_G(const RateMatrix& k, double lambda, const std::vector<double>& z);

/// Same map written for the deficit w = 1 - z: w -> lambda K w / (1 + lambda K w).
std::vector<double> apply_G_deficit(const RateMatrix& k, double lambda, const std::vector<double>& w);

inline constexpr double kExtinctionTolerance = 1e-12;
inline constexpr std::size_t kDefaultMaxIterations = 1'000'000;

/// q-bar = lim G^(n)(0), iterated until the sup-norm step is below tol.
GenFunVector extinction_probabilities(const RateMatrix& k, double lambda,
                                      double tol = kExtinctionTolerance,
                                      std::size_t max_iter = kDefaultMaxIterations);

struct SubinvariantVerdict {
  bool holds = false;
  bool g_below_q = false;
  bool q_x_below_one = false;
  double worst_margin = 0.0;  // min over y of q(y) - G(q)(y)
  Vertex worst_vertex = 0;
  /// Whether q >= q-bar entrywise (checked only when the verdict holds).
  std::optional<bool> dominates_qbar;
  std::string diagnostic;
};

inline constexpr double kSubinvariantTolerance = 1e-12;

/// Checks G(q) <= q (tolerance 1e-12, evaluated on 1 - q) and q(x) < 1.
SubinvariantVerdict check_subinvariant(const RateMatrix& k, double lambda,
                                       const std::vector<double>& q, Vertex x,
                                       bool compare_with_qbar = true);

struct LinearWitnessVerdict {
  bool holds = false;       // strong form on every checked row
  bool linear_holds = false;  // lambda K v >= v on every checked row
  std::vector<double> margins;  // lambda Kv(y) - v(y)/(1 - v(y)); NaN on excluded rows
  std::vector<double> linear_margins;
  double min_margin = 0.0;
  Vertex worst_vertex = 0;
  std::vector<Vertex> excluded_rows;  // boundary rows, reported not judged
  std::string diagnostic;
};

/// Margins lambda Kv - v/(1-v) on non-boundary rows. Verdict true iff v(x) > 0
/// and every margin >= -1e-12.
LinearWitnessVerdict check_linear_witness(const BrwModel& model, double lambda,
                                          const std::vector<double>& v, Vertex x);

/// v(n) = t / (rho^n prod_{i<n} k_i) with t = (1 - rho/lambda) / M, M the
/// window maximum of 1/(rho^n prod k_i). Length rates.size() + 1.
std::vector<double> bpve_witness(const std::vector<double>& rates, double lambda, double rho);

struct MomentVectors {
  std::size_t generation = 0;
  std::vector<double> order1;  // m_{n,x}
  std::vector<double> order2;  // m^(2)_{n,x}
  std::vector<std::optional<double>> xi;  // (m2 - m) / m^2, absent where m^2 is 0 or subnormal
  /// max relative |xi - xi'| over vertices, xi' = 2 + sum_y lambda k_xy xi_{n-1,y} m_{n-1,y}^2 / m_{n,x}^2.
  double xi_crosscheck_residual = 0.0;
};

/// Moments of the generation-n population from one particle at each vertex:
/// m_n = lambda K m_{n-1}, m2_n - m_n = lambda K (m2_{n-1} - m_{n-1}) + 2 m_n^2.
/// Entries 0..n (generation 0 is the starting particle).
std::vector<MomentVectors> moment_recursion(const RateMatrix& k, double lambda, std::size_t n);

/// G^(n)(s 1)(x), evaluated in deficit form at 1 - s = w.
std::vector<double> iterate_G_deficit(const RateMatrix& k, double lambda, double w, std::size_t n);

struct SurvivalWitness {
  double t = 0.0;
  double delta = 0.0;   // lambda * smallest positive rate
  double m_const = 0.0;  // M = 2 sum_{k<N} (1/delta)^k
  double m_prime = 0.0;  // sup row sum
  std::size_t n_bound = 0;
  std::size_t sup_nx = 0;
  double worst_margin = 0.0;  // min over x of (w_x - t)/t, w_x = 1 - G^(n_x)((1-t) 1)(x)
  Vertex worst_vertex = 0;
};

/// t = 2 eps / (M (lambda M')^{2N}) and the check hat-G_x(1-t) <= 1-t on every
/// non-boundary vertex, with n_x the first n where T^n_x >= (K_w - eps)^n.
SurvivalWitness survival_t_witness(const BrwModel& model, double lambda, double epsilon,
                                   std::size_t n_bound, std::optional<double> kw_reference = {});

struct LambdaBracket {
  double lower = 0.0;
  double upper = 0.0;
  bool degenerate = false;  // no certificate at lambda_hi
  std::string lower_label = "no certificate found";
  std::vector<double> certificate;  // q with G(q) <= q, q(x) < 1 at `upper`
  std::string certificate_route;
  std::vector<std::string> transcript;
};

/// Bisection for the smallest lambda with a certified survival witness on
/// the window (a sub-BRW, so the upper edge bounds lambda_w of the full model).
LambdaBracket bracket_lambda_w(const RateMatrix& k, Vertex x, double lambda_lo, double lambda_hi,
                               double tol = 1e-3);

/// Survival certificate at a single lambda, if one can be found.
std::optional<std::vector<double>> survival_certificate(const RateMatrix& k, double lambda, Vertex x,
                                                        std::string* route = nullptr);

}  // namespace brwlab
