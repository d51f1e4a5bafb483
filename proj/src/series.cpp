#include "brwlab/series.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <utility>

#include "brwlab/errors.hpp"

namespace brwlab {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kInf = std::numeric_limits<double>::infinity();

double safe_log(double v) { return v > 0.0 ? std::log(v) : kNegInf; }

// Rescales `v` so its largest entry is 1 and returns log of the factor;
// -inf for the zero vector, NaN on non-finite input.
double normalize(std::vector<double>& v) {
  double m = 0.0;
  for (double a : v) {
    if (!std::isfinite(a)) return std::numeric_limits<double>::quiet_NaN();
    m = std::max(m, a);
  }
  if (m == 0.0) return kNegInf;
  const double inv = 1.0 / m;
  for (double& a : v) a *= inv;
  return std::log(m);
}

SparseRow to_sparse(const std::vector<double>& v) {
  SparseRow row;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] != 0.0) {
      row.index.push_back(static_cast<Vertex>(i));
      row.value.push_back(v[i]);
    }
  }
  return row;
}

void check_vertex(const RateMatrix& k, Vertex v, const char* what) {
  if (v >= k.vertex_count()) {
    throw ContractViolation(std::string(what) + " vertex " + std::to_string(v) +
                            " outside window of " + std::to_string(k.vertex_count()));
  }
}

// gcd of the gaps between nonzero indices (1 when fewer than two).
std::size_t detect_period(const std::vector<double>& log_coeff, std::size_t from) {
  std::size_t first = 0;
  bool have_first = false;
  std::size_t g = 0;
  for (std::size_t n = from; n < log_coeff.size(); ++n) {
    if (!std::isfinite(log_coeff[n])) continue;
    if (!have_first) {
      first = n;
      have_first = true;
    } else {
      g = std::gcd(g, n - first);
    }
  }
  return g == 0 ? 1 : g;
}

}  // namespace

double SeriesTable::log_step_weight(std::size_t n, Vertex y) const {
  if (step_rows.empty()) throw ContractViolation("series table: step weights were not kept");
  if (n > horizon) throw ContractViolation("series table: n beyond horizon");
  const SparseRow& row = step_rows[n];
  auto it = std::lower_bound(row.index.begin(), row.index.end(), y);
  if (it == row.index.end() || *it != y) return kNegInf;
  return std::log(row.value[static_cast<std::size_t>(it - row.index.begin())]) + log_scale[n];
}

double SeriesTable::step_weight(std::size_t n, Vertex y) const {
  return std::exp(log_step_weight(n, y));
}

double SeriesTable::generation_mass(std::size_t n) const {
  return std::exp(log_generation_mass.at(n));
}

double SeriesTable::target_weight(std::size_t n) const { return std::exp(log_target_weight.at(n)); }

double SeriesTable::first_passage(std::size_t n) const {
  if (log_first_passage.empty()) throw ContractViolation("series table: no first-passage target");
  return std::exp(log_first_passage.at(n));
}

double SeriesTable::generation_mass_root(std::size_t n) const {
  if (n == 0) throw ContractViolation("nth root needs n >= 1");
  return std::exp(log_generation_mass.at(n) / static_cast<double>(n));
}

double SeriesTable::target_weight_root(std::size_t n) const {
  if (n == 0) throw ContractViolation("nth root needs n >= 1");
  return std::exp(log_target_weight.at(n) / static_cast<double>(n));
}

SeriesTable build_series_table(const RateMatrix& k, Vertex source, std::optional<Vertex> target,
                               std::size_t horizon, SeriesOptions options) {
  if (horizon < 1) throw ContractViolation("series table: horizon must be >= 1");
  check_vertex(k, source, "source");
  if (target) check_vertex(k, *target, "target");

  const std::size_t n_vertices = k.vertex_count();
  const Vertex watched = target.value_or(source);

  SeriesTable table;
  table.source = source;
  table.target = target;
  table.requested_horizon = horizon;

  std::vector<double> cur(n_vertices, 0.0);
  cur[source] = 1.0;
  table.log_scale.push_back(0.0);
  table.log_generation_mass.push_back(0.0);
  table.log_target_weight.push_back(watched == source ? 0.0 : kNegInf);
  if (options.keep_step_weights) table.step_rows.push_back(to_sparse(cur));

  std::vector<double> passage;
  double passage_scale = 0.0;
  if (target) {
    passage.assign(n_vertices, 0.0);
    passage[source] = 1.0;
    table.log_first_passage.push_back(kNegInf);
  }

  std::size_t n = 1;
  for (; n <= horizon; ++n) {
    std::vector<double> next = k.left_apply(cur);
    const double log_factor = normalize(next);
    if (std::isnan(log_factor)) {
      table.overflow_at = n;
      break;
    }
    const double scale = table.log_scale.back() + log_factor;
    if (!std::isfinite(scale) && scale != kNegInf) {
      table.overflow_at = n;
      break;
    }

    double log_passage = kNegInf;
    if (target) {
      if (n > 1) passage[*target] = 0.0;
      std::vector<double> step = k.left_apply(passage);
      log_passage = safe_log(step[*target]) + passage_scale;
      const double pf = normalize(step);
      if (std::isnan(pf)) {
        table.overflow_at = n;
        break;
      }
      passage_scale = (pf == kNegInf) ? kNegInf : passage_scale + pf;
      passage = std::move(step);
      if (passage_scale == kNegInf) std::fill(passage.begin(), passage.end(), 0.0);
    }

    double sum = 0.0;
    for (double a : next) sum += a;
    table.log_scale.push_back(scale);
    table.log_generation_mass.push_back(safe_log(sum) + scale);
    table.log_target_weight.push_back(safe_log(next[watched]) + scale);
    if (target) table.log_first_passage.push_back(log_passage);
    if (options.keep_step_weights) table.step_rows.push_back(to_sparse(next));
    cur = std::move(next);
  }
  table.horizon = n - 1;
  return table;
}

std::vector<std::vector<double>> log_generation_masses_all(const RateMatrix& k,
                                                           std::size_t horizon) {
  const std::size_t n_vertices = k.vertex_count();
  std::vector<std::vector<double>> out;
  out.reserve(horizon + 1);
  std::vector<double> t(n_vertices, 1.0);
  double scale = 0.0;
  out.emplace_back(n_vertices, 0.0);
  for (std::size_t n = 1; n <= horizon; ++n) {
    t = k.apply(t);
    const double f = normalize(t);
    if (std::isnan(f)) throw NumericFailure("generation masses overflowed at n=" + std::to_string(n));
    scale = (f == kNegInf) ? kNegInf : scale + f;
    std::vector<double> row(n_vertices);
    for (std::size_t x = 0; x < n_vertices; ++x) row[x] = safe_log(t[x]) + scale;
    out.push_back(std::move(row));
    if (scale == kNegInf) std::fill(t.begin(), t.end(), 0.0);
  }
  return out;
}

SeriesEvaluation evaluate_log_series(const std::vector<double>& log_coeff, double lambda,
                                     double tolerance) {
  if (!(lambda >= 0.0)) throw ContractViolation("series evaluation: lambda must be >= 0");
  SeriesEvaluation ev;
  ev.lambda = lambda;
  ev.terms_used = log_coeff.size();
  if (log_coeff.empty()) {
    ev.converged = true;
    return ev;
  }
  const std::size_t last = log_coeff.size() - 1;
  const std::size_t period = detect_period(log_coeff, 0);
  const double log_lambda = std::log(lambda);
  std::vector<double> terms(log_coeff.size(), 0.0);
  for (std::size_t n = 0; n <= last; ++n) {
    if (!std::isfinite(log_coeff[n])) continue;
    if (n == 0) {
      terms[n] = std::exp(log_coeff[0]);
    } else if (lambda > 0.0) {
      terms[n] = std::exp(log_coeff[n] + static_cast<double>(n) * log_lambda);
    }
  }
  double sum = 0.0;
  for (double t : terms) sum += t;
  double tail = 0.0;
  const std::size_t from = last + 1 > period ? last + 1 - period : 0;
  for (std::size_t n = from; n <= last; ++n) tail = std::max(tail, terms[n]);
  ev.partial_sum = sum;
  ev.last_term_magnitude = tail;
  ev.converged = tail < tolerance;
  return ev;
}

SeriesEvaluation evaluate_H(const SeriesTable& table, double lambda, double tolerance) {
  return evaluate_log_series(table.log_target_weight, lambda, tolerance);
}

SeriesEvaluation evaluate_Theta(const SeriesTable& table, double lambda, double tolerance) {
  return evaluate_log_series(table.log_generation_mass, lambda, tolerance);
}

SeriesEvaluation evaluate_Phi(const SeriesTable& table, double lambda, double tolerance) {
  if (table.log_first_passage.empty()) {
    throw ContractViolation("evaluate_Phi: table was built without a target");
  }
  return evaluate_log_series(table.log_first_passage, lambda, tolerance);
}

RootEstimate estimate_roots(const std::vector<double>& log_values, std::size_t horizon,
                            std::optional<RootWindow> window, double spread_threshold) {
  RootWindow w = window.value_or(RootWindow{std::max<std::size_t>(1, horizon / 2), horizon});
  if (w.lo < 1 || w.lo > w.hi || w.hi > horizon || w.hi >= log_values.size()) {
    throw ContractViolation("root estimate: window [" + std::to_string(w.lo) + "," +
                            std::to_string(w.hi) + "] invalid for horizon " +
                            std::to_string(horizon));
  }
  if (horizon < 2 * w.lo) {
    throw ContractViolation("root estimate: horizon must be at least twice the window start");
  }
  RootEstimate est;
  est.window_lo = w.lo;
  est.window_hi = w.hi;
  double lo = kInf;
  double hi = 0.0;
  bool any = false;
  for (std::size_t n = w.lo; n <= w.hi; ++n) {
    if (!std::isfinite(log_values[n])) continue;
    const double root = std::exp(log_values[n] / static_cast<double>(n));
    lo = std::min(lo, root);
    hi = std::max(hi, root);
    any = true;
  }
  if (!any) return est;
  est.liminf_estimate = lo;
  est.limsup_estimate = hi;
  est.oscillation_flag = (hi - lo) > spread_threshold;
  return est;
}

RootEstimate estimate_Ks(const SeriesTable& table, std::optional<RootWindow> window,
                         double spread_threshold) {
  return estimate_roots(table.log_target_weight, table.horizon, window, spread_threshold);
}

RootEstimate estimate_Kw(const SeriesTable& table, std::optional<RootWindow> window,
                         double spread_threshold) {
  return estimate_roots(table.log_generation_mass, table.horizon, window, spread_threshold);
}

double IdentityReport::max_residual() const {
  double m = 0.0;
  for (const auto& r : residuals) {
    if (r.residual) m = std::max(m, *r.residual);
  }
  return m;
}

std::size_t IdentityReport::skipped() const {
  return static_cast<std::size_t>(std::count_if(residuals.begin(), residuals.end(),
                                                [](const auto& r) { return !r.residual; }));
}

bool IdentityReport::all_within(double tolerance) const {
  return std::all_of(residuals.begin(), residuals.end(), [&](const IdentityResidual& r) {
    return !r.residual || *r.residual <= tolerance;
  });
}

IdentityReport check_series_identities(const RateMatrix& k, double lambda, Vertex x, Vertex y,
                                       std::size_t horizon) {
  check_vertex(k, x, "identity");
  check_vertex(k, y, "identity");
  if (!(lambda >= 0.0)) throw ContractViolation("identities: lambda must be >= 0");

  std::map<std::pair<Vertex, Vertex>, SeriesTable> cache;
  auto table = [&](Vertex s, Vertex t) -> const SeriesTable& {
    auto key = std::make_pair(s, t);
    auto it = cache.find(key);
    if (it == cache.end()) {
      it = cache.emplace(key, build_series_table(k, s, t, horizon, {.keep_step_weights = false}))
               .first;
    }
    return it->second;
  };

  IdentityReport report;
  report.lambda = lambda;
  report.x = x;
  report.y = y;
  const double delta_xy = x == y ? 1.0 : 0.0;

  struct Value {
    double v;
    bool ok;
  };
  auto H = [&](Vertex s, Vertex t) {
    auto e = evaluate_H(table(s, t), lambda);
    return Value{e.partial_sum, e.converged};
  };
  auto Theta = [&](Vertex s) {
    auto e = evaluate_Theta(table(s, s), lambda);
    return Value{e.partial_sum, e.converged};
  };
  auto Phi = [&](Vertex s, Vertex t) {
    auto e = evaluate_Phi(table(s, t), lambda);
    return Value{e.partial_sum, e.converged};
  };
  auto record = [&](std::string name, bool ok, double lhs, double rhs, const std::string& why) {
    IdentityResidual r{std::move(name), std::nullopt, {}};
    if (ok && std::isfinite(lhs) && std::isfinite(rhs)) {
      r.residual = std::abs(lhs - rhs) / std::max({1.0, std::abs(lhs), std::abs(rhs)});
    } else {
      r.diagnostic = why;
    }
    report.residuals.push_back(std::move(r));
  };
  const char* divergent = "series not converged at this lambda";

  {
    Value lhs = H(x, y);
    bool ok = lhs.ok;
    double rhs = delta_xy;
    for (const Entry& e : k.row(x)) {
      Value h = H(e.target, y);
      ok = ok && h.ok;
      rhs += lambda * e.rate * h.v;
    }
    record("H(x,y) = delta + lambda sum_w k_xw H(w,y)", ok, lhs.v, rhs, divergent);
  }
  {
    Value lhs = Theta(x);
    bool ok = lhs.ok;
    double rhs = 1.0;
    for (const Entry& e : k.row(x)) {
      Value t = Theta(e.target);
      ok = ok && t.ok;
      rhs += lambda * e.rate * t.v;
    }
    record("Theta(x) = 1 + lambda sum_w k_xw Theta(w)", ok, lhs.v, rhs, divergent);
  }
  {
    Value hxy = H(x, y);
    Value phi = Phi(x, y);
    Value hyy = H(y, y);
    record("H(x,y) = delta + Phi(x,y) H(y,y)", hxy.ok && phi.ok && hyy.ok, hxy.v,
           delta_xy + phi.v * hyy.v, divergent);
  }
  {
    Value hxx = H(x, x);
    Value phi = Phi(x, x);
    const bool ok = hxx.ok && phi.ok && phi.v < 1.0;
    record("H(x,x) = 1 / (1 - Phi(x,x))", ok, hxx.v, ok ? 1.0 / (1.0 - phi.v) : 0.0,
           phi.v >= 1.0 ? "Phi(x,x) >= 1" : divergent);
  }
  {
    Value lhs = Phi(x, x);
    bool ok = lhs.ok;
    double rhs = 0.0;
    for (const Entry& e : k.row(x)) {
      if (e.target == x) {
        rhs += lambda * e.rate;
        continue;
      }
      Value p = Phi(e.target, x);
      ok = ok && p.ok;
      rhs += lambda * e.rate * p.v;
    }
    record("Phi(x,x) = lambda sum_{w!=x} k_xw Phi(w,x) + lambda k_xx", ok, lhs.v, rhs,
           divergent);
  }
  return report;
}

double TailFit::radius() const {
  if (polynomial) return kInf;
  return std::exp(-slope);
}

double TailFit::tail(double lambda) const {
  if (polynomial || lambda <= 0.0) return 0.0;
  if (!ok) return kInf;
  const double log_lambda = std::log(lambda);
  const double growth = slope + log_lambda;
  if (growth >= 0.0) return kInf;
  double sum = 0.0;
  const auto p = static_cast<double>(period);
  double prev = kInf;
  for (std::size_t step = 1; step <= 4'000'000; ++step) {
    const double n = static_cast<double>(last_index) + p * static_cast<double>(step);
    const double term = std::exp(intercept + growth * n + power * std::log(n));
    sum += term;
    if (term < 1e-18 * std::max(1.0, sum) && term <= prev) break;
    prev = term;
  }
  return sum;
}

TailFit fit_series_tail(const std::vector<double>& log_coeff) {
  TailFit fit;
  if (log_coeff.size() < 2) {
    fit.polynomial = true;
    fit.ok = true;
    return fit;
  }
  const std::size_t horizon = log_coeff.size() - 1;
  const std::size_t from = std::max<std::size_t>(1, horizon / 2);
  fit.period = detect_period(log_coeff, 1);

  std::size_t last = 0;
  for (std::size_t n = horizon; n >= from; --n) {
    if (std::isfinite(log_coeff[n])) {
      last = n;
      break;
    }
    if (n == from) break;
  }
  if (last == 0) {
    fit.polynomial = true;
    fit.ok = true;
    return fit;
  }
  fit.last_index = last;

  // least squares on the residue class of the last nonzero index
  std::vector<std::array<double, 3>> rows;
  std::vector<double> rhs;
  for (std::size_t n = from; n <= horizon; ++n) {
    if (!std::isfinite(log_coeff[n])) continue;
    if ((last - n) % fit.period != 0) continue;
    const auto nd = static_cast<double>(n);
    rows.push_back({1.0, nd, std::log(nd)});
    rhs.push_back(log_coeff[n]);
  }
  fit.points = rows.size();
  const std::size_t cols = rows.size() >= 3 ? 3 : rows.size();
  if (cols < 2) return fit;

  // normal equations, solved by Gaussian elimination with partial pivoting;
  // n is centred to keep the system well conditioned.
  double mean_n = 0.0;
  double mean_log = 0.0;
  for (const auto& r : rows) {
    mean_n += r[1];
    mean_log += r[2];
  }
  mean_n /= static_cast<double>(rows.size());
  mean_log /= static_cast<double>(rows.size());
  double a[3][4] = {};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double basis[3] = {1.0, rows[i][1] - mean_n, rows[i][2] - mean_log};
    for (std::size_t r = 0; r < cols; ++r) {
      for (std::size_t c = 0; c < cols; ++c) a[r][c] += basis[r] * basis[c];
      a[r][3] += basis[r] * rhs[i];
    }
  }
  for (std::size_t c = 0; c < cols; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < cols; ++r) {
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    }
    if (std::abs(a[piv][c]) < 1e-300) return fit;
    if (piv != c) {
      for (std::size_t j = 0; j < 4; ++j) std::swap(a[c][j], a[piv][j]);
    }
    for (std::size_t r = 0; r < cols; ++r) {
      if (r == c) continue;
      const double f = a[r][c] / a[c][c];
      for (std::size_t j = c; j < 4; ++j) a[r][j] -= f * a[c][j];
    }
  }
  double coef[3] = {0.0, 0.0, 0.0};
  for (std::size_t c = 0; c < cols; ++c) coef[c] = a[c][3] / a[c][c];
  fit.slope = coef[1];
  fit.power = cols == 3 ? coef[2] : 0.0;
  fit.intercept = coef[0] - fit.slope * mean_n - fit.power * mean_log;
  fit.ok = std::isfinite(fit.slope) && std::isfinite(fit.power) && std::isfinite(fit.intercept);
  return fit;
}

LambdaSResult lambda_s_from_phi(const RateMatrix& k, Vertex x, double lo, double hi,
                                std::size_t horizon, double tolerance) {
  if (!(lo >= 0.0) || !(hi > lo)) {
    throw ContractViolation("lambda_s_from_phi: need 0 <= lo < hi");
  }
  const SeriesTable table = build_series_table(k, x, x, horizon, {.keep_step_weights = false});
  const std::vector<double>& coeff = table.log_first_passage;
  const TailFit fit = fit_series_tail(coeff);

  if (!fit.ok) {
    // largest lambda at which the plain partial sum is converged
    double a = lo;
    double b = hi;
    if (!evaluate_log_series(coeff, a).converged) {
      throw SeriesUnreliable("Phi(x,x|.) not evaluable on the interval", lo);
    }
    for (int i = 0; i < 60 && b - a > tolerance; ++i) {
      const double mid = 0.5 * (a + b);
      (evaluate_log_series(coeff, mid).converged ? a : b) = mid;
    }
    throw SeriesUnreliable("Phi(x,x|.) tail cannot be extrapolated from horizon " +
                               std::to_string(table.horizon),
                           a);
  }

  const double radius = fit.radius();
  enum class Side { below, above, ambiguous };
  struct Probe {
    Side side;
    double value;
    double uncertainty;
  };
  auto probe = [&](double lambda) -> Probe {
    if (lambda >= radius) return {Side::above, kInf, 0.0};
    const double partial = evaluate_log_series(coeff, lambda).partial_sum;
    const double tail = fit.tail(lambda);
    const double value = partial + tail;
    const double unc = tail + 1e-12;
    if (value - unc > 1.0) return {Side::above, value, unc};
    if (value + unc <= 1.0) return {Side::below, value, unc};
    return {Side::ambiguous, value, unc};
  };

  LambdaSResult result;
  result.radius_estimate = radius;
  result.horizon = table.horizon;

  Probe at_lo = probe(lo);
  if (at_lo.side == Side::above) {
    throw ContractViolation("lambda_s_from_phi: Phi(x,x|lo) > 1, interval starts above lambda_s");
  }
  Probe at_hi = probe(hi);
  if (at_hi.side == Side::below) {
    result.value = hi;
    result.interval_limited = true;
    result.phi_at_value = at_hi.value;
    result.tail_uncertainty = at_hi.uncertainty;
    return result;
  }
  double a = lo;
  double b = hi;
  Probe last_below = at_lo;
  while (b - a > tolerance) {
    const double mid = 0.5 * (a + b);
    Probe p = probe(mid);
    if (p.side == Side::ambiguous) {
      result.value = mid;
      result.within_uncertainty = true;
      result.phi_at_value = p.value;
      result.tail_uncertainty = p.uncertainty;
      return result;
    }
    if (p.side == Side::below) {
      a = mid;
      last_below = p;
    } else {
      b = mid;
    }
  }
  result.value = 0.5 * (a + b);
  result.phi_at_value = last_below.value;
  result.tail_uncertainty = last_below.uncertainty;
  result.radius_limited = std::isfinite(radius) && b >= radius - tolerance &&
                          last_below.value + last_below.uncertainty < 1.0 - 1e-3;
  return result;
}

}  // namespace brwlab
