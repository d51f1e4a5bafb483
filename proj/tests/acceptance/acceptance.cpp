// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "brwlab/analysis.hpp"
#include "brwlab/cli.hpp"
#include "brwlab/genfun.hpp"
#include "brwlab/models.hpp"
#include "brwlab/series.hpp"
#include "brwlab/simulate.hpp"
#include "oracles.hpp"

using namespace brwlab;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

double log_prod(const std::vector<double>& k, std::size_t n) {
  double s = 0.0;
  for (std::size_t j = 0; j < n; ++j) s += std::log(k[j]);
  return s;
}

// Example 4.3 first-passage function at the root (coefficient-corrected form).
double tree_with_lines_phi(double d, double lambda) {
  return 1.0 - (d - 2.0) / (2.0 * (d - 1.0)) * std::sqrt(1.0 - 4.0 * lambda * lambda) -
         d / (2.0 * (d - 1.0)) * std::sqrt(1.0 - 4.0 * d * lambda * lambda);
}

void scalar_ground_truth(Outcome& o) {
  const BrwModel s = build_single_site(1.0);
  const GenFunVector q = extinction_probabilities(s.matrix, 2.0);
  o.detail << "q_bar=" << q.values[0] << " ";
  o.require(q.converged && std::abs(q.values[0] - 0.5) <= 1e-10, "q_bar within 1e-10 of 0.5");
  EstimateConfig cfg;
  cfg.trials = 10000;
  cfg.horizon = 50.0;
  cfg.population_cap = 100000;
  cfg.master_seed = 20240601;
  const SurvivalEstimate e = estimate_survival(s, 2.0, 0, cfg);
  o.detail << "mc=" << e.point << " CI [" << e.wilson_lo << ", " << e.wilson_hi << "] ";
  o.require(e.wilson_lo <= 0.5 && 0.5 <= e.wilson_hi, "0.5 inside the Wilson interval");
}

void star_closed_form(Outcome& o) {
  const BrwModel star = build_star_of_lines(4, 40);
  const SeriesTable t = build_series_table(star.matrix, star.root, star.root, 80);
  double worst = 0.0;
  for (double lambda : {0.1, 0.2, 0.3, 0.4}) {
    const double closed = 4.0 * (1.0 - std::sqrt(1.0 - 4.0 * lambda * lambda)) / 2.0;
    worst = std::max(worst, std::abs(evaluate_Phi(t, lambda).partial_sum - closed));
  }
  o.detail << "max|Phi - closed|=" << worst << " ";
  o.require(worst <= 1e-6, "Phi within 1e-6");
  const LambdaSResult r = lambda_s_from_phi(star.matrix, star.root, 0.0, 1.0, 80);
  o.detail << "lambda_s=" << r.value << " ";
  o.require(std::abs(r.value - std::sqrt(3.0) / 4.0) <= 1e-4, "lambda_s within 1e-4 of sqrt(3)/4");
}

void tree_with_lines(Outcome& o) {
  const double d = 4.0;
  const BrwModel twl = build_tree_with_lines_radial(4, 40, 40);
  const SeriesTable t = build_series_table(twl.matrix, twl.root, twl.root, 80);
  double worst = 0.0;
  for (double lambda : {0.05, 0.1, 0.15, 0.2}) {
    worst = std::max(worst, std::abs(evaluate_Phi(t, lambda).partial_sum - tree_with_lines_phi(d, lambda)));
  }
  o.detail << "max|Phi - formula|=" << worst << " ";
  o.require(worst <= 1e-6, "Phi series matches the formula");
  const LambdaSResult r = lambda_s_from_phi(twl.matrix, twl.root, 0.0, 1.0, 80);
  const double want = 1.0 / (2.0 * std::sqrt(d));
  o.detail << "lambda_s=" << r.value << " (formula " << want << ") ";
  o.require(std::abs(r.value - want) <= 1e-3, "lambda_s within 1e-3");
  // the formula's own root on [0, 1/(2 sqrt d)] agrees
  o.require(tree_with_lines_phi(d, want) <= 1.0, "formula Phi <= 1 at 1/(2 sqrt d)");

  const BrwModel line = build_line_with_loop(4, 400);
  const SeriesTable tl = build_series_table(line.matrix, line.root, line.root, 400);
  const double ks = estimate_Ks(tl).limsup_estimate;
  const double kw = estimate_Kw(tl).liminf_estimate;
  o.detail << "projected K_s=" << ks << " K_w=" << kw << " ";
  o.require(std::abs(ks - kw) <= 0.05, "projected K_s and K_w within 0.05");
}

void projection_transport(Outcome& o) {
  double worst = 0.0;
  for (std::size_t m : {3, 4, 5}) {
    const BrwModel src = build_complete(m);
    const BrwModel dst = build_single_site(static_cast<double>(m - 1));
    const std::vector<Vertex> g(m, 0);
    const ProjectionReport r = verify_projection(src, dst, g);
    o.require(r.valid && r.violations.empty() && r.mass_failures == 0, "projection K_" + std::to_string(m));
    for (double lambda : {0.6, 1.0}) {
      const auto qx = extinction_probabilities(src.matrix, lambda).values;
      const auto qy = extinction_probabilities(dst.matrix, lambda).values;
      for (std::size_t x = 0; x < m; ++x) worst = std::max(worst, std::abs(qx[x] - qy[g[x]]));
    }
  }
  o.detail << "max|q_X - q_Y o g|=" << worst << " ";
  o.require(worst <= 1e-9, "extinction probabilities transported within 1e-9");
}

void series_identities(Outcome& o) {
  std::mt19937_64 rng(606);
  double worst = 0.0;
  std::size_t skipped = 0;
  for (int rep = 0; rep < 20; ++rep) {
    const RateMatrix k = oracle::random_irreducible(6, rng);
    const SeriesTable t = build_series_table(k, 0, 0, 200);
    const double radius = 1.0 / estimate_Ks(t).limsup_estimate;
    const Vertex y = static_cast<Vertex>(rep % 6);
    const IdentityReport r = check_series_identities(k, 0.5 * radius, 0, y, 200);
    worst = std::max(worst, r.max_residual());
    skipped += r.skipped();
    o.require(r.residuals.size() == 5, "five identities evaluated");
  }
  o.detail << "max residual=" << worst << " skipped=" << skipped << " ";
  o.require(worst <= 1e-6 && skipped == 0, "all residuals <= 1e-6");
}

std::vector<long double> iterate_dense(const oracle::Dense& a, long double lambda, long double s, std::size_t n) {
  std::vector<long double> z(a.size(), s);
  for (std::size_t it = 0; it < n; ++it) {
    std::vector<long double> next(a.size());
    for (std::size_t x = 0; x < a.size(); ++x) {
      long double acc = 0.0L;
      for (std::size_t y = 0; y < a.size(); ++y) acc += static_cast<long double>(a[x][y]) * (1.0L - z[y]);
      next[x] = 1.0L / (1.0L + lambda * acc);
    }
    z = next;
  }
  return z;
}

void moments(Outcome& o) {
  std::mt19937_64 rng(77);
  double worst = 0.0;
  bool xi_ok = true;
  for (int rep = 0; rep < 10; ++rep) {
    const RateMatrix k = oracle::random_irreducible(5, rng);
    const oracle::Dense a = oracle::dense(k);
    const double lambda = 0.25 + 0.05 * rep;
    const auto mom = moment_recursion(k, lambda, 5);
    const long double h = 1e-5L;
    for (std::size_t n = 1; n <= 5; ++n) {
      const auto up = iterate_dense(a, lambda, 1.0L + h, n);
      const auto mid = iterate_dense(a, lambda, 1.0L, n);
      const auto dn = iterate_dense(a, lambda, 1.0L - h, n);
      for (std::size_t x = 0; x < 5; ++x) {
        const double d1 = static_cast<double>((up[x] - dn[x]) / (2.0L * h));
        const double d2 = static_cast<double>((up[x] - 2.0L * mid[x] + dn[x]) / (h * h));
        worst = std::max(worst, std::abs(mom[n].order1[x] - d1) / std::abs(d1));
        worst = std::max(worst, std::abs(mom[n].order2[x] - (d2 + d1)) / std::abs(d2 + d1));
      }
    }
    for (std::size_t x = 0; x < 5; ++x) xi_ok = xi_ok && mom[1].xi[x] && *mom[1].xi[x] == 2.0;
  }
  o.detail << "max relative error=" << worst << " ";
  o.require(worst <= 1e-4, "moments within 1e-4 of finite differences");
  o.require(xi_ok, "xi_1 = 2 exactly");
}

void bpve_witnesses(Outcome& o) {
  const std::size_t len = 100001;
  const auto rates = remark_rates(len);
  const BrwModel line = build_bpve(rates, len);
  std::vector<double> v(len + 1);
  for (std::size_t n = 0; n <= len; ++n) v[n] = 1.0 / (static_cast<double>(n) + 2.0);
  const LinearWitnessVerdict r = check_linear_witness(line, 1.0, v, 0);
  bool positive = true;
  for (std::size_t n = 0; n <= 100000; ++n) positive = positive && r.margins[n] > 0.0;
  o.detail << "remark min margin=" << r.min_margin << " ";
  o.require(r.holds && positive, "remark margins strictly positive for n <= 1e5");

  const std::size_t window = 10000;
  const BrwModel c = build_bpve(std::vector<double>(window, 2.0), window);
  const auto w = bpve_witness(std::vector<double>(window, 2.0), 0.75, 0.6);
  const LinearWitnessVerdict rc = check_linear_witness(c, 0.75, w, 0);
  o.detail << "constant-rate min margin=" << rc.min_margin << " ";
  o.require(rc.holds, "constant-rate witness passes");
}

void oscillation(Outcome& o) {
  const OscillatingSequence seq = build_oscillating_sequence(1920);
  o.require(seq.checkpoints.size() >= 8 && seq.checkpoints[7] == 1920, "checkpoint c_8 = 1920");
  double lo = 1e9, hi = 0.0;
  for (std::size_t n = 1; n <= 1920; ++n) {
    const double root = std::exp(log_prod(seq.rates, n) / static_cast<double>(n));
    lo = std::min(lo, root);
    hi = std::max(hi, root);
  }
  o.detail << "root range [" << lo << ", " << hi << "] ";
  o.require(lo <= 1.3 && hi >= 1.7, "min <= 1.3 and max >= 1.7");

  // the geometric schedule leaves the normal double range near n = 440
  const auto all_eps = geometric_epsilon(seq.rates, 1.0, 1921);
  std::size_t window = 0;
  while (window + 1 < all_eps.size() && std::isnormal(all_eps[window + 1])) ++window;
  const std::vector<double> eps(all_eps.begin(), all_eps.begin() + static_cast<long>(window) + 1);
  const FeedbackLine f = build_feedback_line(seq.rates, eps, window);
  const SeriesTable t = build_series_table(f.model.matrix, 0, std::nullopt, window);
  bool sandwich = true;
  for (std::size_t n = 1; n <= t.horizon; ++n) {
    const double lp = log_prod(seq.rates, n);
    sandwich = sandwich && t.log_generation_mass[n] >= lp - 1e-9 &&
               t.log_generation_mass[n] <= lp - std::log1p(-f.beta) + 1e-9;
  }
  o.detail << "beta=" << f.beta << " window=" << window << " ";
  o.require(t.horizon == window, "full window evaluated");
  o.require(sandwich, "feedback sandwich");
}

void example_finally(Outcome& o) {
  const ExampleFinally ex = build_example_finally(200);
  bool product = true;
  for (std::size_t n = 0; n < 200; ++n) product = product && ex.forward[n] * ex.backward[n] == 2.0;
  o.require(product, "product identity");

  const ExampleFinally red = build_example_finally(200, true);
  const SeriesTable tr = build_series_table(red.model.matrix, red.model.root, std::nullopt, 200);
  bool growth = true;
  for (std::size_t n = 1; n <= 200; ++n) {
    growth = growth && tr.log_generation_mass[n] >= (1.0 + 0.5 * static_cast<double>(n)) * std::log(2.0) - 1e-9;
  }
  o.require(growth, "sum_i k^(n)_{0,i} >= 2^{1+n/2}");

  const CriticalParameterReport r = assemble_report(ex.model, ex.model.root, {1.0});
  o.detail << "K_w(0)=" << r.kw.liminf_estimate << " gap=" << r.gap << " ";
  o.require(r.kw.liminf_estimate >= std::sqrt(2.0) - 0.05, "K_w(0) >= sqrt 2 - 0.05");
  o.require(r.gap_flag && r.gap >= 0.2, "gap flagged");
}

void conditions(Outcome& o) {
  const std::vector<BrwModel> adjacency{build_complete(4),          build_regular_tree(3, 4),
                                        build_tree_with_lines(4, 2, 5), build_star_of_lines(4, 10),
                                        build_regular_tree_radial(3, 10), build_star_radial(4, 10)};
  for (const BrwModel& m : adjacency) {
    const double infimum = check_U2(m).infimum;
    o.require(infimum == 1.0, "(U2) = 1 on " + m.constructor);
  }
  const ConditionReport single = check_U1(build_single_site(1.0), 0.5);
  const TreeLikeModel tl = build_example_tree_like(6);
  const ConditionReport periodic = check_U1(tl.model, 0.5);
  const ConditionReport lines = check_U1(build_tree_with_lines(4, 3, 30), 0.5);
  const ConditionReport star = check_U1(build_star_of_lines(6, 80), 0.5);
  o.detail << "single: " << single.verdict() << "; tree-like: " << periodic.verdict() << "; lines: "
           << lines.verdict() << "; star: " << star.verdict() << " ";
  o.require(single.bounded(), "single site bounded");
  o.require(periodic.bounded(), "periodic tree-like bounded");
  const std::string nb = "not bounded within horizon 64";
  o.require(lines.verdict().find(nb) != std::string::npos, "tree-with-lines not bounded");
  o.require(star.verdict().find(nb) != std::string::npos, "star-of-lines not bounded");
}

void determinism(Outcome& o) {
  RunConfig cfg;
  cfg.command = "sweep";
  cfg.model = "tree_radial";
  cfg.parameters = {{"d", 3}, {"depth", 12}};
  cfg.lambdas = {0.3, 0.4, 0.5};
  cfg.trials = 2000;
  cfg.horizon = 20.0;
  cfg.cap = 5000;
  cfg.seed = 99;
  std::vector<std::string> outputs;
  for (unsigned threads : {1u, 4u, 8u}) {
    cfg.threads = threads;
    std::ostringstream out, err;
    o.require(cmd_sweep(cfg, out, err) == kExitOk, "sweep exit status");
    outputs.push_back(out.str());
  }
  o.detail << outputs[0].size() << " bytes ";
  o.require(outputs[0] == outputs[1] && outputs[0] == outputs[2], "identical CSV for 1, 4, 8 threads");
}

void tree_bracket(Outcome& o) {
  std::vector<double> uppers;
  for (std::size_t depth : {8, 12, 16}) {
    const BrwModel t = build_regular_tree_radial(3, depth);
    const LambdaBracket b = bracket_lambda_w(t.matrix, t.root, 0.2, 1.0, 1e-4);
    o.require(!b.degenerate, "certificate at depth " + std::to_string(depth));
    o.require(check_subinvariant(t.matrix, b.upper, b.certificate, t.root).holds,
              "certificate revalidates at depth " + std::to_string(depth));
    uppers.push_back(b.upper);
    o.detail << "depth " << depth << ": " << b.upper << " ";
  }
  o.require(uppers[2] >= 1.0 / 3.0 && uppers[2] <= 0.45, "depth-16 bound in [1/3, 0.45]");
  o.require(uppers[0] > uppers[1] && uppers[1] > uppers[2], "bounds decrease with depth");

  // the radial window is an exact quotient of the full tree window
  const BrwModel full = build_regular_tree(3, 8);
  const BrwModel rad = build_regular_tree_radial(3, 8);
  o.require(verify_projection(full, rad, regular_tree_radial_map(3, 8)).valid, "radial quotient of the depth-8 tree");
  const auto qf = extinction_probabilities(full.matrix, uppers[0] + 0.01).values[full.root];
  const auto qr = extinction_probabilities(rad.matrix, uppers[0] + 0.01).values[rad.root];
  o.require(std::abs(qf - qr) <= 1e-9, "root extinction probability agrees with the full depth-8 tree");
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<void(Outcome&)> run;
    double time_limit = 0.0;  // seconds, 0 for none
  };
  const std::vector<Criterion> criteria{
      {"1 scalar ground truth", scalar_ground_truth, 5.0},
      {"2 star closed form", star_closed_form, 10.0},
      {"3 tree with lines", tree_with_lines},
      {"4 projection transport", projection_transport, 1.0},
      {"5 series identities", series_identities, 10.0},
      {"6 moment recursion", moments},
      {"7 BPVE witnesses", bpve_witnesses, 5.0},
      {"8 oscillation detection", oscillation},
      {"9 lambda_w above 1/K_w", example_finally},
      {"10 condition checkers", conditions},
      {"11 determinism", determinism},
      {"12 lambda_w bracket on T_3", tree_bracket, 60.0},
  };
  int failures = 0;
  for (const Criterion& c : criteria) {
    Outcome o;
    const auto start = std::chrono::steady_clock::now();
    try {
      c.run(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "[exception: " << e.what() << "] ";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.time_limit > 0.0) o.require(secs < c.time_limit, "runtime under " + std::to_string(c.time_limit) + " s");
    std::printf("%s %s (%.2fs): %s\n", o.pass ? "PASS" : "FAIL", c.name, secs, o.detail.str().c_str());
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
