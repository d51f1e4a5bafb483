#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "brwlab/genfun.hpp"
#include "brwlab/models.hpp"
#include "brwlab/series.hpp"
#include "brwlab/simulate.hpp"
#include "json.hpp"

namespace brwlab {

struct U2Result {
  double infimum = 0.0;
  /// Rates shrink toward the window edge: the minimum over the inner half of
  /// the vertices exceeds the overall minimum.
  bool shrinking = false;
};

/// inf{k_xy : k_xy > 0} over the window.
U2Result check_U2(const BrwModel& model);

/// min{n <= N : T^n_x >= (K_w_reference - eps)^n}, nullopt when not found.
std::optional<std::size_t> compute_nx_epsilon(const BrwModel& model, Vertex x, double epsilon,
                                              double kw_reference, std::size_t horizon);

struct ConditionReport {
  double epsilon = 0.0;
  std::size_t horizon = 0;
  double kw_reference = 0.0;
  double u2_infimum = 0.0;
  std::vector<std::optional<std::size_t>> nx;  // per vertex; boundary vertices left empty
  std::optional<std::size_t> u1_sup;           // over non-boundary vertices
  std::size_t not_found = 0;
  Vertex first_not_found = 0;
  bool bounded() const { return u1_sup.has_value(); }
  /// Window-relative verdict text.
  std::string verdict() const;
};

inline constexpr std::size_t kDefaultU1Horizon = 64;

/// n_x(eps) for every non-boundary vertex. K_w reference defaults to the
/// root's liminf estimate over the same horizon.
ConditionReport check_U1(const BrwModel& model, double epsilon, std::size_t horizon = kDefaultU1Horizon,
                         std::optional<double> kw_reference = {});

struct MappingViolation {
  std::size_t map_index = 0;
  Vertex x = 0;
  Vertex z = 0;
  double source_rate = 0.0;
  double image_rate = 0.0;
  std::string what;
};

struct MappingReport {
  bool holds = false;
  bool reach_ok = false;
  std::size_t max_distance_to_y = 0;
  std::vector<Vertex> unreachable;  // vertices farther than n0 from Y
  std::vector<MappingViolation> violations;
  std::size_t pairs_checked = 0;
};

/// (i) every vertex reaches Y within n0 steps; (ii) each map is injective,
/// sends x0 to its y and dominates rates on every pair where both images are
/// inside the window (maps may be partial).
MappingReport check_mapping_hypotheses(const BrwModel& model, const std::vector<Vertex>& y_set, Vertex x0,
                                       const std::vector<std::vector<std::optional<Vertex>>>& maps,
                                       std::size_t n0);

/// Identity-extended shift n -> n + s on a path window, as partial maps.
std::vector<std::optional<Vertex>> shift_map(std::size_t vertex_count, std::size_t s);

struct ApgsReport {
  std::vector<double> kappa;
  double balance_residual = 0.0;
  std::vector<std::size_t> ball_sizes;  // |B(x0, n)|, n = 0..N
  std::vector<double> c_sequence;       // max kappa(y)/kappa(x0) over B(x0, n)
  std::vector<double> ball_roots;       // |B(x0,n)|^{1/n}, n >= 1
  std::vector<double> c_roots;          // c_n^{1/n}, n >= 1
  bool ball_root_trends_to_one = false;
  bool c_root_trends_to_one = false;
};

ApgsReport check_apgs(const BrwModel& model, const std::vector<double>& kappa, Vertex x0, std::size_t horizon);

struct OrderingCheck {
  std::string relation;
  double lhs = 0.0;
  double rhs = 0.0;
  double margin = 0.0;  // rhs - lhs
  bool holds = false;
};

struct SweepRow {
  double lambda = 0.0;
  double q_bar = 1.0;
  bool q_bar_converged = true;
  std::optional<SurvivalEstimate> mc;
};

struct ReportOptions {
  std::size_t horizon = 200;  // series horizon for K_s, K_w, Phi
  double bracket_tol = 1e-3;
  bool simulate = false;
  EstimateConfig mc;
  std::vector<double> epsilons = {0.5, 0.25, 0.1};
  std::size_t u1_horizon = kDefaultU1Horizon;
  double gap_threshold = 0.2;
};

struct CriticalParameterReport {
  nlohmann::json provenance;
  Vertex x = 0;
  RootEstimate ks;
  RootEstimate kw;
  std::optional<LambdaSResult> lambda_s;
  std::string lambda_s_error;
  std::optional<LambdaBracket> lambda_w;
  U2Result u2;
  std::vector<ConditionReport> u1;
  std::vector<OrderingCheck> ordering;
  /// 1/K_w(x) sits at least gap_threshold below the certified lambda_w evidence.
  bool gap_flag = false;
  double gap = 0.0;
  std::vector<SweepRow> sweep;

  nlohmann::json to_json() const;
  std::string sweep_csv() const;
};

inline constexpr int kReportSchemaVersion = 1;
inline constexpr const char* kSweepCsvHeader = "lambda,q_bar,mc_point,wilson_lo,wilson_hi,censored";

/// Per-lambda q-bar and (optionally) Monte Carlo estimate from x.
std::vector<SweepRow> sweep(const BrwModel& model, Vertex x, const std::vector<double>& grid,
                            bool simulate, const EstimateConfig& mc);
std::string sweep_csv(const std::vector<SweepRow>& rows);

CriticalParameterReport assemble_report(const BrwModel& model, Vertex x, const std::vector<double>& lambda_grid,
                                        const ReportOptions& options = {});

}  // namespace brwlab
