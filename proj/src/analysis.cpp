#include "brwlab/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <limits>
#include <map>
#include <set>

#include "brwlab/errors.hpp"

namespace brwlab {
namespace {

constexpr std::size_t kFar = std::numeric_limits<std::size_t>::max();

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

nlohmann::json finite_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

}  // namespace

U2Result check_U2(const BrwModel& model) {
  const RateMatrix& k = model.matrix;
  U2Result r;
  r.infimum = k.min_positive_rate();
  if (!(r.infimum > 0.0)) throw ContractViolation("check_U2: model has no positive rate");
  const auto dist = bfs_distances(k, model.root);
  std::size_t far = 0;
  for (std::size_t d : dist) {
    if (d != kFar) far = std::max(far, d);
  }
  double inner = std::numeric_limits<double>::infinity();
  for (Vertex x = 0; x < k.vertex_count(); ++x) {
    if (dist[x] == kFar || 2 * dist[x] > far) continue;
    for (const Entry& e : k.row(x)) inner = std::min(inner, e.rate);
  }
  r.shrinking = std::isfinite(inner) && inner > r.infimum;
  return r;
}

std::optional<std::size_t> compute_nx_epsilon(const BrwModel& model, Vertex x, double epsilon, double kw_reference,
                                              std::size_t horizon) {
  if (!(epsilon > 0.0)) throw ContractViolation("compute_nx_epsilon: epsilon must be > 0");
  if (horizon < 1) throw ContractViolation("compute_nx_epsilon: horizon must be >= 1");
  if (x >= model.vertex_count()) throw ContractViolation("compute_nx_epsilon: vertex outside window");
  const SeriesTable t = build_series_table(model.matrix, x, std::nullopt, horizon, {.keep_step_weights = false});
  const double base = kw_reference - epsilon;
  for (std::size_t n = 1; n <= t.horizon; ++n) {
    if (base <= 0.0) return n;
    if (t.log_generation_mass[n] >= static_cast<double>(n) * std::log(base) - 1e-12) return n;
  }
  return std::nullopt;
}

std::string ConditionReport::verdict() const {
  if (u1_sup) {
    return "(U1) bounded by " + std::to_string(*u1_sup) + " on this window (eps=" + num(epsilon) +
           ", horizon " + std::to_string(horizon) + ")";
  }
  return "(U1) not bounded within horizon " + std::to_string(horizon) + " on this window (eps=" + num(epsilon) +
         ", " + std::to_string(not_found) + " vertices without n_x, first " + std::to_string(first_not_found) + ")";
}

ConditionReport check_U1(const BrwModel& model, double epsilon, std::size_t horizon,
                         std::optional<double> kw_reference) {
  if (!(epsilon > 0.0)) throw ContractViolation("check_U1: epsilon must be > 0");
  if (horizon < 1) throw ContractViolation("check_U1: horizon must be >= 1");
  ConditionReport rep;
  rep.epsilon = epsilon;
  rep.horizon = horizon;
  rep.u2_infimum = model.matrix.min_positive_rate();
  if (kw_reference) {
    rep.kw_reference = *kw_reference;
  } else {
    const SeriesTable t = build_series_table(model.matrix, model.root, std::nullopt, horizon,
                                             {.keep_step_weights = false});
    rep.kw_reference = estimate_Kw(t).liminf_estimate;
  }
  const auto masses = log_generation_masses_all(model.matrix, horizon);
  const double base = rep.kw_reference - epsilon;
  rep.nx.assign(model.vertex_count(), std::nullopt);
  std::size_t sup = 0;
  for (Vertex x = 0; x < model.vertex_count(); ++x) {
    if (model.boundary[x]) continue;
    for (std::size_t n = 1; n <= horizon; ++n) {
      if (base <= 0.0 || masses[n][x] >= static_cast<double>(n) * std::log(base) - 1e-12) {
        rep.nx[x] = n;
        break;
      }
    }
    if (rep.nx[x]) {
      sup = std::max(sup, *rep.nx[x]);
    } else {
      if (rep.not_found == 0) rep.first_not_found = x;
      ++rep.not_found;
    }
  }
  if (rep.not_found == 0) rep.u1_sup = sup;
  return rep;
}

MappingReport check_mapping_hypotheses(const BrwModel& model, const std::vector<Vertex>& y_set, Vertex x0,
                                       const std::vector<std::vector<std::optional<Vertex>>>& maps,
                                       std::size_t n0) {
  const RateMatrix& k = model.matrix;
  const std::size_t n = k.vertex_count();
  if (y_set.empty()) throw ContractViolation("check_mapping_hypotheses: Y is empty");
  if (maps.size() != y_set.size()) throw ContractViolation("check_mapping_hypotheses: need one map per y in Y");
  if (x0 >= n) throw ContractViolation("check_mapping_hypotheses: x0 outside window");
  MappingReport rep;

  // (i) distance from every vertex to Y along positive rates
  std::vector<std::size_t> dist(n, kFar);
  std::deque<Vertex> queue;
  for (Vertex y : y_set) {
    if (y >= n) throw ContractViolation("check_mapping_hypotheses: Y vertex outside window");
    dist[y] = 0;
    queue.push_back(y);
  }
  const auto rev = k.reverse_adjacency();
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
  for (Vertex x = 0; x < n; ++x) {
    if (dist[x] == kFar || dist[x] > n0) {
      rep.unreachable.push_back(x);
    } else {
      rep.max_distance_to_y = std::max(rep.max_distance_to_y, dist[x]);
    }
  }
  rep.reach_ok = rep.unreachable.empty();

  // (ii) injectivity, phi(x0) = y, rate domination
  for (std::size_t m = 0; m < maps.size(); ++m) {
    const auto& phi = maps[m];
    if (phi.size() != n) throw ContractViolation("check_mapping_hypotheses: map size differs from window");
    if (!phi[x0] || *phi[x0] != y_set[m]) {
      rep.violations.push_back({m, x0, x0, 0.0, 0.0, "phi(x0) != y"});
    }
    std::map<Vertex, Vertex> preimage;
    for (Vertex x = 0; x < n; ++x) {
      if (!phi[x]) continue;
      if (*phi[x] >= n) throw ContractViolation("check_mapping_hypotheses: map image outside window");
      auto [it, fresh] = preimage.emplace(*phi[x], x);
      if (!fresh) rep.violations.push_back({m, it->second, x, 0.0, 0.0, "not injective"});
    }
    for (Vertex x = 0; x < n; ++x) {
      if (!phi[x]) continue;
      for (const Entry& e : k.row(x)) {
        if (!phi[e.target]) continue;
        ++rep.pairs_checked;
        const double image = k.rate(*phi[x], *phi[e.target]);
        if (image < e.rate - 1e-12) rep.violations.push_back({m, x, e.target, e.rate, image, "rate not dominated"});
      }
    }
  }
  rep.holds = rep.reach_ok && rep.violations.empty();
  return rep;
}

std::vector<std::optional<Vertex>> shift_map(std::size_t vertex_count, std::size_t s) {
  std::vector<std::optional<Vertex>> m(vertex_count);
  for (std::size_t x = 0; x + s < vertex_count; ++x) m[x] = static_cast<Vertex>(x + s);
  return m;
}

ApgsReport check_apgs(const BrwModel& model, const std::vector<double>& kappa, Vertex x0, std::size_t horizon) {
  const RateMatrix& k = model.matrix;
  const std::size_t n = k.vertex_count();
  if (kappa.size() != n) throw ContractViolation("check_apgs: kappa length differs from window");
  for (double a : kappa) {
    if (!(a > 0.0 && a <= 1.0)) throw ContractViolation("check_apgs: kappa entries must lie in (0,1]");
  }
  if (x0 >= n) throw ContractViolation("check_apgs: x0 outside window");
  if (horizon < 2) throw ContractViolation("check_apgs: horizon must be >= 2");
  ApgsReport r;
  r.kappa = kappa;
  for (Vertex x = 0; x < n; ++x) {
    for (const Entry& e : k.row(x)) {
      const double back = k.rate(e.target, x);
      r.balance_residual = std::max(r.balance_residual, std::abs(kappa[x] * e.rate - kappa[e.target] * back));
    }
  }
  const auto dist = bfs_distances(k, x0);
  r.ball_sizes.assign(horizon + 1, 0);
  r.c_sequence.assign(horizon + 1, 0.0);
  std::vector<double> best(horizon + 1, 0.0);
  for (Vertex y = 0; y < n; ++y) {
    if (dist[y] == kFar || dist[y] > horizon) continue;
    ++r.ball_sizes[dist[y]];
    best[dist[y]] = std::max(best[dist[y]], kappa[y] / kappa[x0]);
  }
  for (std::size_t i = 1; i <= horizon; ++i) {
    r.ball_sizes[i] += r.ball_sizes[i - 1];
    best[i] = std::max(best[i], best[i - 1]);
  }
  r.c_sequence = best;
  for (std::size_t i = 1; i <= horizon; ++i) {
    r.ball_roots.push_back(std::pow(static_cast<double>(r.ball_sizes[i]), 1.0 / static_cast<double>(i)));
    r.c_roots.push_back(std::pow(std::max(best[i], 1.0), 1.0 / static_cast<double>(i)));
  }
  auto trends = [&](const std::vector<double>& s) {
    const std::size_t from = s.size() / 2;
    for (std::size_t i = from + 1; i < s.size(); ++i) {
      if (s[i] > s[i - 1] + 1e-12) return false;
    }
    return s.back() < 1.2;
  };
  r.ball_root_trends_to_one = trends(r.ball_roots);
  r.c_root_trends_to_one = trends(r.c_roots);
  return r;
}

std::vector<SweepRow> sweep(const BrwModel& model, Vertex x, const std::vector<double>& grid, bool simulate,
                            const EstimateConfig& mc) {
  if (grid.empty()) throw ContractViolation("sweep: lambda grid is empty");
  if (x >= model.vertex_count()) throw ContractViolation("sweep: vertex outside window");
  const std::size_t nnz = std::max<std::size_t>(1, model.matrix.nonzero_count());
  const std::size_t max_iter = std::clamp<std::size_t>(200'000'000 / nnz, 1000, kDefaultMaxIterations);
  std::vector<SweepRow> rows;
  for (double lambda : grid) {
    if (!(lambda >= 0.0)) throw ContractViolation("sweep: lambda values must be >= 0");
    SweepRow row;
    row.lambda = lambda;
    const GenFunVector q = extinction_probabilities(model.matrix, lambda, kExtinctionTolerance, max_iter);
    row.q_bar = q.values[x];
    row.q_bar_converged = q.converged;
    if (simulate) row.mc = estimate_survival(model, lambda, x, mc);
    rows.push_back(row);
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = std::string(kSweepCsvHeader) + "\r\n";
  for (const SweepRow& r : rows) {
    out += num(r.lambda) + "," + num(r.q_bar);
    if (r.mc) {
      out += "," + num(r.mc->point) + "," + num(r.mc->wilson_lo) + "," + num(r.mc->wilson_hi) + "," +
             num(r.mc->censored_fraction);
    } else {
      out += ",,,,";
    }
    out += "\r\n";
  }
  return out;
}

std::string CriticalParameterReport::sweep_csv() const { return brwlab::sweep_csv(sweep); }

CriticalParameterReport assemble_report(const BrwModel& model, Vertex x, const std::vector<double>& lambda_grid,
                                        const ReportOptions& opt) {
  if (lambda_grid.empty()) throw ContractViolation("assemble_report: lambda grid is empty");
  if (x >= model.vertex_count()) throw ContractViolation("assemble_report: vertex outside window");
  const RateMatrix& k = model.matrix;
  CriticalParameterReport rep;
  rep.provenance = model.provenance();
  rep.x = x;

  const SeriesTable table = build_series_table(k, x, x, opt.horizon, {.keep_step_weights = false});
  rep.ks = estimate_Ks(table);
  rep.kw = estimate_Kw(table);

  const double ks = rep.ks.limsup_estimate;
  const double kw = rep.kw.liminf_estimate;
  const double inv_kw = kw > 0.0 ? 1.0 / kw : std::numeric_limits<double>::infinity();
  const double inv_ks = ks > 0.0 ? 1.0 / ks : std::numeric_limits<double>::infinity();

  const double phi_hi = std::isfinite(inv_ks) ? 2.0 * inv_ks : 1e3;
  try {
    rep.lambda_s = lambda_s_from_phi(k, x, 0.0, phi_hi, opt.horizon);
  } catch (const SeriesUnreliable& e) {
    rep.lambda_s_error = std::string(e.what()) + " (largest reliable lambda " + num(e.largest_reliable_lambda()) + ")";
  } catch (const ContractViolation& e) {
    rep.lambda_s_error = e.what();
  }

  // smallest certified lambda found by doubling from 1/K_w, then bisection
  double hi = std::isfinite(inv_kw) ? inv_kw : 1.0;
  bool found = false;
  for (int i = 0; i < 12; ++i) {
    if (survival_certificate(k, hi, x)) {
      found = true;
      break;
    }
    hi *= 2.0;
  }
  if (found) {
    rep.lambda_w = bracket_lambda_w(k, x, 0.0, hi, opt.bracket_tol);
  } else {
    LambdaBracket b;
    b.degenerate = true;
    b.lower = b.upper = hi;
    rep.lambda_w = b;
  }

  rep.u2 = U2Result{k.min_positive_rate(), false};
  if (rep.u2.infimum > 0.0) rep.u2 = check_U2(model);
  for (double eps : opt.epsilons) rep.u1.push_back(check_U1(model, eps, opt.u1_horizon));

  auto add = [&](std::string rel, double lhs, double rhs, double slack = 1e-9) {
    const bool ok = lhs <= rhs + slack;
    rep.ordering.push_back({std::move(rel), lhs, rhs, rhs - lhs, ok});
  };
  add("K_s(x,x) <= K_w(x) [limsup estimates, +0.05]", ks, rep.kw.limsup_estimate + 0.05);
  if (rep.lambda_w && !rep.lambda_w->degenerate) {
    add("1/K_w(x) <= lambda_w(x) upper (certified)", inv_kw, rep.lambda_w->upper);
    // the lower edge is uncertified evidence; near criticality the q-bar certificate
    // needs a deficit of 1e-6, which moves the edge by up to ~1e-5 in lambda
    if (rep.lambda_s) {
      add("lambda_w(x) lower (evidence) <= lambda_s(x) [+max(bracket tol, 1e-5)]", rep.lambda_w->lower,
          rep.lambda_s->value, std::max(opt.bracket_tol, 1e-5));
    }
    rep.gap = rep.lambda_w->lower - inv_kw;
    rep.gap_flag = rep.gap >= opt.gap_threshold;
  }
  if (rep.lambda_s) add("lambda_s(x) <= 1/K_s(x,x) [+1e-3]", rep.lambda_s->value, inv_ks + 1e-3);

  rep.sweep = sweep(model, x, lambda_grid, opt.simulate, opt.mc);
  return rep;
}

nlohmann::json CriticalParameterReport::to_json() const {
  using nlohmann::json;
  auto root_json = [](const RootEstimate& r) {
    return json{{"liminf", r.liminf_estimate},
                {"limsup", r.limsup_estimate},
                {"window", {r.window_lo, r.window_hi}},
                {"oscillation", r.oscillation_flag}};
  };
  json j;
  j["schema_version"] = kReportSchemaVersion;
  j["model"] = provenance;
  j["vertex"] = x;
  j["K_s"] = root_json(ks);
  j["K_w"] = root_json(kw);
  if (lambda_s) {
    j["lambda_s"] = {{"value", lambda_s->value},
                     {"radius_estimate", finite_or_null(lambda_s->radius_estimate)},
                     {"radius_limited", lambda_s->radius_limited},
                     {"interval_limited", lambda_s->interval_limited},
                     {"within_uncertainty", lambda_s->within_uncertainty},
                     {"phi_at_value", finite_or_null(lambda_s->phi_at_value)},
                     {"horizon", lambda_s->horizon}};
  } else {
    j["lambda_s"] = {{"error", lambda_s_error}};
  }
  if (lambda_w) {
    j["lambda_w"] = {{"upper", lambda_w->upper},
                     {"upper_label", lambda_w->degenerate ? "no certificate found" : "certified on window (sub-BRW)"},
                     {"lower", lambda_w->lower},
                     {"lower_label", lambda_w->lower_label},
                     {"degenerate", lambda_w->degenerate},
                     {"certificate_route", lambda_w->certificate_route}};
  }
  j["inverse_K_w"] = finite_or_null(kw.liminf_estimate > 0.0 ? 1.0 / kw.liminf_estimate
                                                             : std::numeric_limits<double>::infinity());
  j["gap"] = {{"lambda_w_lower_minus_inverse_K_w", gap}, {"flag", gap_flag}};
  j["U2"] = {{"infimum", u2.infimum}, {"shrinking", u2.shrinking}};
  j["U1"] = json::array();
  for (const ConditionReport& c : u1) {
    j["U1"].push_back({{"epsilon", c.epsilon},
                       {"horizon", c.horizon},
                       {"K_w_reference", c.kw_reference},
                       {"sup_nx", c.u1_sup ? json(*c.u1_sup) : json(nullptr)},
                       {"verdict", c.verdict()}});
  }
  j["ordering"] = json::array();
  for (const OrderingCheck& o : ordering) {
    j["ordering"].push_back(
        {{"relation", o.relation}, {"lhs", finite_or_null(o.lhs)}, {"rhs", finite_or_null(o.rhs)},
         {"margin", finite_or_null(o.margin)}, {"holds", o.holds}});
  }
  j["sweep"] = json::array();
  for (const SweepRow& r : sweep) {
    json row = {{"lambda", r.lambda}, {"q_bar", r.q_bar}, {"q_bar_converged", r.q_bar_converged}};
    if (r.mc) {
      row["mc"] = {{"trials", r.mc->trials},        {"survivors", r.mc->survivors},
                   {"point", r.mc->point},          {"wilson_lo", r.mc->wilson_lo},
                   {"wilson_hi", r.mc->wilson_hi},  {"censored_fraction", r.mc->censored_fraction},
                   {"cap_hits", r.mc->cap_hits}};
    }
    j["sweep"].push_back(row);
  }
  return j;
}

}  // namespace brwlab
