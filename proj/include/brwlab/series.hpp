#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "brwlab/rate_matrix.hpp"

namespace brwlab {

struct SparseRow {
  std::vector<Vertex> index;  // sorted
  std::vector<double> value;
};

struct SeriesOptions {
  bool keep_step_weights = true;
};

/// n-step weights k^(n)_{x.}, generation masses T^n_x and (optionally)
/// first-passage weights phi^(n)_{xy} from a fixed source, for n = 0..horizon.
///
/// Rows are stored rescaled: k^(n)_{xy} = step_rows[n].value * exp(log_scale[n])
/// with the largest entry of each row equal to 1, so nth roots stay accurate at
/// horizons where the raw weights would overflow. Masses and target weights are
/// kept as natural logarithms (-inf for zero).
struct SeriesTable {
  Vertex source = 0;
  std::optional<Vertex> target;
  std::size_t horizon = 0;
  std::size_t requested_horizon = 0;
  /// First n at which a non-finite weight appeared; the table stops at n-1.
  std::optional<std::size_t> overflow_at;

  std::vector<SparseRow> step_rows;  // empty unless keep_step_weights
  std::vector<double> log_scale;
  std::vector<double> log_generation_mass;
  std::vector<double> log_target_weight;  // log k^(n)_{x,y}, y = target or source
  std::vector<double> log_first_passage;  // empty without a target

  Vertex root_target() const { return target.value_or(source); }

  double log_step_weight(std::size_t n, Vertex y) const;
  double step_weight(std::size_t n, Vertex y) const;
  double generation_mass(std::size_t n) const;
  double target_weight(std::size_t n) const;
  double first_passage(std::size_t n) const;

  /// (T^n_x)^{1/n} and (k^(n)_{xy})^{1/n}; n >= 1.
  double generation_mass_root(std::size_t n) const;
  double target_weight_root(std::size_t n) const;
};

SeriesTable build_series_table(const RateMatrix& k, Vertex source, std::optional<Vertex> target,
                               std::size_t horizon, SeriesOptions options = {});

/// log T^n_x for every vertex at once (backward iteration T^n = K T^{n-1}).
/// Result is indexed [n][x] for n = 0..horizon.
std::vector<std::vector<double>> log_generation_masses_all(const RateMatrix& k,
                                                           std::size_t horizon);

struct SeriesEvaluation {
  double lambda = 0.0;
  double partial_sum = 0.0;
  std::size_t terms_used = 0;
  double last_term_magnitude = 0.0;
  bool converged = false;
};

inline constexpr double kSeriesTolerance = 1e-12;

/// H(x,y|lambda) with y = table target (or source).
SeriesEvaluation evaluate_H(const SeriesTable& table, double lambda,
                            double tolerance = kSeriesTolerance);
SeriesEvaluation evaluate_Theta(const SeriesTable& table, double lambda,
                                double tolerance = kSeriesTolerance);
/// Phi(x,y|lambda); the table must carry first-passage weights.
SeriesEvaluation evaluate_Phi(const SeriesTable& table, double lambda,
                              double tolerance = kSeriesTolerance);

/// Power series sum_n exp(log_coeff[n]) lambda^n over the stored coefficients.
SeriesEvaluation evaluate_log_series(const std::vector<double>& log_coeff, double lambda,
                                     double tolerance = kSeriesTolerance);

struct RootEstimate {
  double liminf_estimate = 0.0;
  double limsup_estimate = 0.0;
  std::size_t window_lo = 0;
  std::size_t window_hi = 0;
  bool oscillation_flag = false;
};

struct RootWindow {
  std::size_t lo = 0;
  std::size_t hi = 0;
};

inline constexpr double kDefaultSpreadThreshold = 0.1;

/// K_s(x,y): nth roots of the target weights over the window (default: upper
/// half of the horizon). Only nonzero terms enter; all-zero gives 0.
RootEstimate estimate_Ks(const SeriesTable& table, std::optional<RootWindow> window = {},
                         double spread_threshold = kDefaultSpreadThreshold);
/// K_w(x): nth roots of the generation masses over the window.
RootEstimate estimate_Kw(const SeriesTable& table, std::optional<RootWindow> window = {},
                         double spread_threshold = kDefaultSpreadThreshold);
/// Same reduction over an arbitrary log sequence indexed by n.
RootEstimate estimate_roots(const std::vector<double>& log_values, std::size_t horizon,
                            std::optional<RootWindow> window, double spread_threshold);

struct IdentityResidual {
  std::string name;
  std::optional<double> residual;  // relative, floor 1; empty when skipped
  std::string diagnostic;
};

struct IdentityReport {
  double lambda = 0.0;
  Vertex x = 0;
  Vertex y = 0;
  std::vector<IdentityResidual> residuals;

  double max_residual() const;
  std::size_t skipped() const;
  bool all_within(double tolerance) const;
};

inline constexpr double kIdentityTolerance = 1e-6;

/// Evaluates the five relations between H, Theta and Phi at (x, y, lambda)
/// using horizon-N tables. Identities involving a non-converged series are
/// skipped with a diagnostic.
IdentityReport check_series_identities(const RateMatrix& k, double lambda, Vertex x, Vertex y,
                                       std::size_t horizon);

/// Asymptotic model log c_n ~ a + slope*n + power*log(n) fitted on the
/// nonzero coefficients of the upper half of a series, used to extrapolate
/// the unseen tail.
struct TailFit {
  bool polynomial = false;  // no nonzero coefficient in the fit window
  bool ok = false;
  double intercept = 0.0;
  double slope = 0.0;
  double power = 0.0;
  std::size_t period = 1;
  std::size_t last_index = 0;
  std::size_t points = 0;

  /// exp(-slope); +inf for polynomials.
  double radius() const;
  /// Fitted sum over indices beyond last_index; +inf at or past the radius.
  double tail(double lambda) const;
};

TailFit fit_series_tail(const std::vector<double>& log_coeff);

struct LambdaSResult {
  double value = 0.0;
  double radius_estimate = 0.0;
  bool radius_limited = false;    // Phi stays below 1 up to the radius
  bool interval_limited = false;  // Phi below 1 over the whole interval
  bool within_uncertainty = false;
  double phi_at_value = 0.0;
  double tail_uncertainty = 0.0;
  std::size_t horizon = 0;
};

/// lambda_s(x) = max{lambda >= 0 : Phi(x,x|lambda) <= 1} on [lo, hi], by
/// bisection to `tolerance`. Phi is the horizon-N partial sum plus a fitted
/// tail; lambda beyond the fitted radius counts as Phi > 1. Throws
/// SeriesUnreliable when the tail cannot be fitted.
LambdaSResult lambda_s_from_phi(const RateMatrix& k, Vertex x, double lo, double hi,
                                std::size_t horizon, double tolerance = 1e-6);

}  // namespace brwlab
