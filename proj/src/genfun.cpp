#include "brwlab/genfun.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "brwlab/errors.hpp"
#include "brwlab/series.hpp"

namespace brwlab {
namespace {

// Survival is certified only when the witness keeps q(x) this far below 1.
constexpr double kCertificationMargin = 1e-6;

void check_lambda(double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ContractViolation("lambda must be a finite value >= 0");
}

void check_unit_box(const std::vector<double>& z, std::size_t n, const char* what) {
  if (z.size() != n) throw ContractViolation(std::string(what) + ": vector length differs from window");
  for (double a : z) {
    if (!(a >= 0.0 && a <= 1.0)) throw ContractViolation(std::string(what) + ": entries must lie in [0,1]");
  }
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

}  // namespace

std::vector<double> apply_G(const RateMatrix& k, double lambda, const std::vector<double>& z) {
  check_lambda(lambda);
  check_unit_box(z, k.vertex_count(), "apply_G");
  std::vector<double> out(z.size());
  for (Vertex x = 0; x < z.size(); ++x) {
    double s = 0.0;
    for (const Entry& e : k.row(x)) s += e.rate * (1.0 - z[e.target]);
    out[x] = 1.0 / (1.0 + lambda * s);
  }
  return out;
}

GenFunVector apply_G(const RateMatrix& k, double lambda, const GenFunVector& z) {
  GenFunVector out;
  out.values = apply_G(k, lambda, z.values);
  out.iteration_count = z.iteration_count + 1;
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    out.sup_norm_delta = std::max(out.sup_norm_delta, std::abs(out.values[i] - z.values[i]));
  }
  return out;
}

std::vector<double> apply_G_deficit(const RateMatrix& k, double lambda, const std::vector<double>& w) {
  check_lambda(lambda);
  std::vector<double> kw = k.apply(w);
  for (double& a : kw) {
    const double u = lambda * a;
    a = u / (1.0 + u);
  }
  return kw;
}

GenFunVector extinction_probabilities(const RateMatrix& k, double lambda, double tol,
                                      std::size_t max_iter) {
  check_lambda(lambda);
  if (!(tol > 0.0)) throw ContractViolation("extinction_probabilities: tol must be > 0");
  const std::size_t n = k.vertex_count();
  GenFunVector cur;
  cur.values.assign(n, 0.0);
  cur.converged = false;
  double prev_delta = std::numeric_limits<double>::infinity();
  std::size_t stalled = 0;
  for (std::size_t it = 0; it < max_iter; ++it) {
    std::vector<double> next = apply_G(k, lambda, cur.values);
    double delta = 0.0;
    for (std::size_t i = 0; i < n; ++i) delta = std::max(delta, std::abs(next[i] - cur.values[i]));
    cur.sup_norm_delta = delta;
    if (delta < tol) {
      // the returned point is the one whose image moved less than tol
      cur.converged = true;
      return cur;
    }
    if (it > 1000 && delta > (1.0 - 1e-4) * prev_delta) ++stalled;
    prev_delta = delta;
    cur.values = std::move(next);
    cur.iteration_count = it + 1;
  }
  cur.slow_convergence = stalled > max_iter / 2;
  return cur;
}

SubinvariantVerdict check_subinvariant(const RateMatrix& k, double lambda, const std::vector<double>& q,
                                       Vertex x, bool compare_with_qbar) {
  check_lambda(lambda);
  check_unit_box(q, k.vertex_count(), "check_subinvariant");
  if (x >= k.vertex_count()) throw ContractViolation("check_subinvariant: vertex outside window");
  SubinvariantVerdict v;
  std::vector<double> w(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) w[i] = 1.0 - q[i];
  // G(q) <= q  <=>  1 - G(q) >= 1 - q
  const std::vector<double> gw = apply_G_deficit(k, lambda, w);
  v.worst_margin = std::numeric_limits<double>::infinity();
  for (Vertex y = 0; y < q.size(); ++y) {
    const double margin = gw[y] - w[y];
    if (margin < v.worst_margin) {
      v.worst_margin = margin;
      v.worst_vertex = y;
    }
  }
  v.g_below_q = v.worst_margin >= -kSubinvariantTolerance;
  v.q_x_below_one = q[x] < 1.0;
  v.holds = v.g_below_q && v.q_x_below_one;
  if (!v.g_below_q) {
    v.diagnostic = "G(q) > q at vertex " + std::to_string(v.worst_vertex) + " by " + fmt(-v.worst_margin);
  } else if (!v.q_x_below_one) {
    v.diagnostic = "q(x) = 1";
  }
  if (v.holds && compare_with_qbar) {
    const GenFunVector qbar = extinction_probabilities(k, lambda);
    bool dom = true;
    for (std::size_t i = 0; i < q.size(); ++i) {
      if (q[i] < qbar.values[i] - 1e-9) dom = false;
    }
    v.dominates_qbar = dom;
  }
  return v;
}

LinearWitnessVerdict check_linear_witness(const BrwModel& model, double lambda, const std::vector<double>& v,
                                          Vertex x) {
  check_lambda(lambda);
  const RateMatrix& k = model.matrix;
  const std::size_t n = k.vertex_count();
  if (v.size() != n) throw ContractViolation("check_linear_witness: vector length differs from window");
  if (x >= n) throw ContractViolation("check_linear_witness: vertex outside window");
  for (double a : v) {
    if (!(a >= 0.0 && a < 1.0)) throw ContractViolation("check_linear_witness: entries must lie in [0,1)");
  }
  LinearWitnessVerdict out;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  out.margins.assign(n, nan);
  out.linear_margins.assign(n, nan);
  out.min_margin = std::numeric_limits<double>::infinity();
  out.linear_holds = true;
  const std::vector<double> kv = k.apply(v);
  for (Vertex y = 0; y < n; ++y) {
    if (model.boundary[y]) {
      out.excluded_rows.push_back(y);
      continue;
    }
    const double lkv = lambda * kv[y];
    out.margins[y] = lkv - v[y] / (1.0 - v[y]);
    out.linear_margins[y] = lkv - v[y];
    if (out.linear_margins[y] < -kSubinvariantTolerance) out.linear_holds = false;
    if (out.margins[y] < out.min_margin) {
      out.min_margin = out.margins[y];
      out.worst_vertex = y;
    }
  }
  if (!(v[x] > 0.0)) {
    out.diagnostic = "v(x) = 0";
    return out;
  }
  out.holds = out.min_margin >= -kSubinvariantTolerance;
  if (!out.holds) {
    out.diagnostic = "margin " + fmt(out.min_margin) + " at vertex " + std::to_string(out.worst_vertex);
  }
  return out;
}

std::vector<double> bpve_witness(const std::vector<double>& rates, double lambda, double rho) {
  if (!(rho > 0.0) || !(lambda > rho)) throw ContractViolation("bpve_witness: need lambda > rho > 0");
  if (rates.empty()) throw ContractViolation("bpve_witness: empty rate sequence");
  const std::size_t n = rates.size() + 1;
  std::vector<double> log_a(n);
  double log_prod = 0.0;
  const double log_rho = std::log(rho);
  for (std::size_t i = 0; i < n; ++i) {
    log_a[i] = -static_cast<double>(i) * log_rho - log_prod;
    if (i < rates.size()) {
      if (!(rates[i] > 0.0)) throw ContractViolation("bpve_witness: rates must be > 0");
      log_prod += std::log(rates[i]);
    }
  }
  const auto top = std::max_element(log_a.begin(), log_a.end());
  const auto at = static_cast<std::size_t>(top - log_a.begin());
  if (!std::isfinite(*top)) {
    throw NumericFailure("bpve_witness: 1/(rho^n prod k_i) not finite at index " + std::to_string(at));
  }
  if (at == n - 1 && n > 1 && log_a[n - 1] > log_a[n - 2]) {
    throw NumericFailure("bpve_witness: 1/(rho^n prod k_i) still growing at window end, index " +
                         std::to_string(at) + "; M unbounded over the window");
  }
  const double log_t = std::log1p(-rho / lambda) - *top;
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = std::exp(log_t + log_a[i]);
  return v;
}

std::vector<MomentVectors> moment_recursion(const RateMatrix& k, double lambda, std::size_t n) {
  check_lambda(lambda);
  if (n < 1) throw ContractViolation("moment_recursion: n must be >= 1");
  const std::size_t size = k.vertex_count();
  std::vector<MomentVectors> out;
  MomentVectors g0;
  g0.order1.assign(size, 1.0);
  g0.order2.assign(size, 1.0);
  g0.xi.assign(size, 0.0);
  out.push_back(g0);
  std::vector<double> d_prev(size, 0.0);  // m2 - m
  for (std::size_t gen = 1; gen <= n; ++gen) {
    const MomentVectors& prev = out.back();
    MomentVectors cur;
    cur.generation = gen;
    cur.order1 = k.apply(prev.order1);
    for (double& a : cur.order1) a *= lambda;
    std::vector<double> d = k.apply(d_prev);
    std::vector<double> xi_weighted(size, 0.0);  // sum_y k_xy xi_{n-1,y} m_{n-1,y}^2
    for (Vertex x = 0; x < size; ++x) {
      for (const Entry& e : k.row(x)) {
        if (prev.xi[e.target]) {
          xi_weighted[x] += e.rate * *prev.xi[e.target] * prev.order1[e.target] * prev.order1[e.target];
        }
      }
    }
    cur.order2.resize(size);
    cur.xi.resize(size);
    for (Vertex x = 0; x < size; ++x) {
      const double m = cur.order1[x];
      d[x] = lambda * d[x] + 2.0 * m * m;
      cur.order2[x] = d[x] + m;
      if (std::isnormal(m * m)) {
        cur.xi[x] = d[x] / (m * m);
        const double alt = 2.0 + lambda * xi_weighted[x] / (m * m);
        cur.xi_crosscheck_residual = std::max(cur.xi_crosscheck_residual, std::abs(*cur.xi[x] - alt) / std::max(1.0, std::abs(alt)));
      }
    }
    d_prev = std::move(d);
    out.push_back(std::move(cur));
  }
  return out;
}

std::vector<double> iterate_G_deficit(const RateMatrix& k, double lambda, double w, std::size_t n) {
  std::vector<double> cur(k.vertex_count(), w);
  for (std::size_t i = 0; i < n; ++i) cur = apply_G_deficit(k, lambda, cur);
  return cur;
}

SurvivalWitness survival_t_witness(const BrwModel& model, double lambda, double epsilon,
                                   std::size_t n_bound, std::optional<double> kw_reference) {
  check_lambda(lambda);
  if (!(epsilon > 0.0)) throw ContractViolation("survival_t_witness: epsilon must be > 0");
  if (n_bound < 1) throw ContractViolation("survival_t_witness: N_bound must be >= 1");
  const RateMatrix& k = model.matrix;
  const double min_rate = k.min_positive_rate();
  if (!(min_rate > 0.0)) throw ContractViolation("survival_t_witness: (U2) fails, no positive rate");
  const double kw = kw_reference ? *kw_reference : estimate_Kw(build_series_table(k, model.root, std::nullopt,
                                                                                 std::max<std::size_t>(2 * n_bound, 64),
                                                                                 {.keep_step_weights = false}))
                                                       .liminf_estimate;
  if (!(lambda * (kw - epsilon) > 1.0 + epsilon)) {
    throw ContractViolation("survival_t_witness: lambda (K_w - eps) = " + fmt(lambda * (kw - epsilon)) +
                            " must exceed 1 + eps");
  }
  SurvivalWitness out;
  out.n_bound = n_bound;
  out.delta = lambda * min_rate;
  out.m_prime = k.max_row_sum();

  const auto masses = log_generation_masses_all(k, n_bound);
  const double log_target = std::log(kw - epsilon);
  const std::vector<Vertex> interior = model.interior();
  std::vector<std::size_t> nx(k.vertex_count(), 0);
  for (Vertex x : interior) {
    for (std::size_t step = 1; step <= n_bound; ++step) {
      if (masses[step][x] >= static_cast<double>(step) * log_target - 1e-12) {
        nx[x] = step;
        break;
      }
    }
    if (nx[x] == 0) {
      throw ContractViolation("survival_t_witness: N_bound " + std::to_string(n_bound) +
                              " is below n_x(eps) at vertex " + std::to_string(x));
    }
    out.sup_nx = std::max(out.sup_nx, nx[x]);
  }
  if (interior.empty()) throw ContractViolation("survival_t_witness: model has no interior vertex");

  const std::size_t big_n = out.sup_nx;
  double m_const = 0.0;
  for (std::size_t i = 0; i < big_n; ++i) m_const += std::pow(1.0 / out.delta, static_cast<double>(i));
  out.m_const = 2.0 * m_const;
  const double log_t = std::log(2.0 * epsilon) - std::log(out.m_const) -
                       2.0 * static_cast<double>(big_n) * std::log(lambda * out.m_prime);
  out.t = std::min(std::exp(log_t), 1.0);
  if (!(out.t > 0.0)) {
    throw WitnessFailure("survival_t_witness: t underflows (log t = " + fmt(log_t) + ")", model.root, 0.0);
  }

  // hat-G_x(1 - t) <= 1 - t  <=>  deficit after n_x steps >= t
  std::vector<double> w(k.vertex_count(), out.t);
  out.worst_margin = std::numeric_limits<double>::infinity();
  for (std::size_t step = 1; step <= big_n; ++step) {
    w = apply_G_deficit(k, lambda, w);
    for (Vertex x : interior) {
      if (nx[x] != step) continue;
      const double margin = (w[x] - out.t) / out.t;
      if (margin < out.worst_margin) {
        out.worst_margin = margin;
        out.worst_vertex = x;
      }
    }
  }
  if (out.worst_margin < -1e-12) {
    throw WitnessFailure("survival_t_witness: hat-G_x(1-t) > 1-t at vertex " + std::to_string(out.worst_vertex) +
                             " (relative margin " + fmt(out.worst_margin) + ")",
                         out.worst_vertex, out.worst_margin);
  }
  return out;
}

namespace {

// Collatz-Wielandt route: u from power iteration of K + I, rho' = min Ku/u on
// the support of u; then q = 1 - s u with s = 1 - 1/(lambda rho').
std::optional<std::vector<double>> perron_certificate(const RateMatrix& k, double lambda, Vertex x) {
  const std::size_t n = k.vertex_count();
  std::vector<double> u(n, 1.0);
  for (int it = 0; it < 20000; ++it) {
    std::vector<double> next = k.apply(u);
    double top = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      next[i] += u[i];
      top = std::max(top, next[i]);
    }
    if (top == 0.0) return std::nullopt;
    double change = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      next[i] /= top;
      if (next[i] < 1e-250) next[i] = 0.0;
      change = std::max(change, std::abs(next[i] - u[i]));
    }
    u = std::move(next);
    if (change < 1e-14) break;
  }
  if (!(u[x] > 0.0)) return std::nullopt;
  const std::vector<double> ku = k.apply(u);
  double rho = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    if (u[i] > 0.0) rho = std::min(rho, ku[i] / u[i]);
  }
  if (!(lambda * rho > 1.0)) return std::nullopt;
  const double s = (1.0 - 1.0 / (lambda * rho)) * (1.0 - 1e-9);
  if (!(s * u[x] > kCertificationMargin)) return std::nullopt;
  std::vector<double> q(n);
  for (std::size_t i = 0; i < n; ++i) q[i] = 1.0 - s * u[i];
  return q;
}

// q-bar route: converged q-bar(x) < 1 - margin, deficit shrunk so the
// iteration's one-sided error is absorbed by concavity of G in deficit form.
std::optional<std::vector<double>> qbar_certificate(const RateMatrix& k, double lambda, Vertex x) {
  const GenFunVector qbar = extinction_probabilities(k, lambda, 1e-13, 20000);
  if (!(qbar.values[x] < 1.0 - kCertificationMargin)) return std::nullopt;
  for (double eta : {1e-6, 1e-4, 1e-2, 0.1, 0.5}) {
    std::vector<double> q(qbar.values.size());
    for (std::size_t i = 0; i < q.size(); ++i) q[i] = 1.0 - (1.0 - eta) * (1.0 - qbar.values[i]);
    if (!(q[x] < 1.0 - kCertificationMargin)) break;
    if (check_subinvariant(k, lambda, q, x, false).holds) return q;
  }
  return std::nullopt;
}

}  // namespace

std::optional<std::vector<double>> survival_certificate(const RateMatrix& k, double lambda, Vertex x,
                                                        std::string* route) {
  check_lambda(lambda);
  if (x >= k.vertex_count()) throw ContractViolation("survival_certificate: vertex outside window");
  if (lambda == 0.0) return std::nullopt;
  if (auto q = perron_certificate(k, lambda, x)) {
    if (check_subinvariant(k, lambda, *q, x, false).holds) {
      if (route) *route = "perron";
      return q;
    }
  }
  if (auto q = qbar_certificate(k, lambda, x)) {
    if (route) *route = "qbar";
    return q;
  }
  return std::nullopt;
}

LambdaBracket bracket_lambda_w(const RateMatrix& k, Vertex x, double lambda_lo, double lambda_hi, double tol) {
  if (!(lambda_lo >= 0.0) || !(lambda_lo < lambda_hi)) {
    throw ContractViolation("bracket_lambda_w: need 0 <= lambda_lo < lambda_hi");
  }
  if (!(tol > 0.0)) throw ContractViolation("bracket_lambda_w: tol must be > 0");
  LambdaBracket b;
  std::string route;
  auto hi_cert = survival_certificate(k, lambda_hi, x, &route);
  b.transcript.push_back("lambda=" + fmt(lambda_hi) + (hi_cert ? " certified (" + route + ")" : " no certificate"));
  if (!hi_cert) {
    b.degenerate = true;
    b.lower = lambda_hi;
    b.upper = lambda_hi;
    return b;
  }
  std::string lo_route;
  auto lo_cert = survival_certificate(k, lambda_lo, x, &lo_route);
  b.transcript.push_back("lambda=" + fmt(lambda_lo) + (lo_cert ? " certified (" + lo_route + ")" : " no certificate"));
  if (lo_cert) {
    b.lower = b.upper = lambda_lo;
    b.lower_label = "certified at lambda_lo";
    b.certificate = std::move(*lo_cert);
    b.certificate_route = lo_route;
    return b;
  }
  double lo = lambda_lo;
  double hi = lambda_hi;
  std::vector<double> cert = std::move(*hi_cert);
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    std::string r;
    auto c = survival_certificate(k, mid, x, &r);
    b.transcript.push_back("lambda=" + fmt(mid) + (c ? " certified (" + r + ")" : " no certificate"));
    if (c) {
      hi = mid;
      cert = std::move(*c);
      route = r;
    } else {
      lo = mid;
    }
  }
  b.lower = lo;
  b.upper = hi;
  b.certificate = std::move(cert);
  b.certificate_route = route;
  return b;
}

}  // namespace brwlab
