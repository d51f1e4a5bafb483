#include "brwlab/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>

#include "CLI11.hpp"
#include "brwlab/analysis.hpp"
#include "brwlab/errors.hpp"
#include "brwlab/genfun.hpp"
#include "brwlab/series.hpp"
#include "brwlab/simulate.hpp"

namespace brwlab {
namespace {

constexpr const char* kCsvHelp =
    "Sweep CSV columns (RFC 4180): lambda,q_bar,mc_point,wilson_lo,wilson_hi,censored\n"
    "  q_bar      extinction probability from the start vertex (fixed-point iteration)\n"
    "  mc_point   Monte Carlo survival frequency (alive at horizon or population cap reached)\n"
    "  wilson_*   95% Wilson interval of mc_point\n"
    "  censored   share of trials still alive at the horizon without reaching the cap\n"
    "Exit status: 0 success, 1 check or module failure, 2 usage or configuration error.\n"
    "Environment: BRWLAB_THREADS caps the number of simulation threads.";

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write '" + path + "'");
  out << text;
}

std::string with_extension(const std::string& path, const std::string& ext) {
  const auto slash = path.find_last_of('/');
  const auto dot = path.find_last_of('.');
  if (dot != std::string::npos && (slash == std::string::npos || dot > slash)) return path.substr(0, dot) + ext;
  return path + ext;
}

nlohmann::json parse_param_value(const std::string& text) {
  if (text == "true") return true;
  if (text == "false") return false;
  try {
    std::size_t used = 0;
    const long long v = std::stoll(text, &used);
    if (used == text.size()) return v;
  } catch (...) {
  }
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size()) return v;
  } catch (...) {
  }
  return text;
}

template <class F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ContractViolation& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitCheckFailed;
  }
}

struct CheckLine {
  std::string name;
  bool pass = false;
  std::string detail;
};

double log_product(const std::vector<double>& k, std::size_t n) {
  double s = 0.0;
  for (std::size_t j = 0; j < n; ++j) s += std::log(k[j]);
  return s;
}

// log(exp(a) + exp(b))
double log_add(double a, double b) {
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

std::vector<CheckLine> verify_model(const BrwModel& model) {
  std::vector<CheckLine> out;
  auto add = [&](std::string name, bool pass, std::string detail = {}) {
    out.push_back({std::move(name), pass, std::move(detail)});
  };
  auto str = [](double v) {
    std::ostringstream os;
    os.precision(8);
    os << v;
    return os.str();
  };
  const RateMatrix& k = model.matrix;
  const Vertex root = model.root;
  const nlohmann::json& p = model.parameters;
  const std::size_t horizon = 200;

  const SeriesTable table = build_series_table(k, root, root, horizon);
  const RootEstimate ks = estimate_Ks(table);
  const RootEstimate kw = estimate_Kw(table);
  add("K_s(x,x) <= K_w(x) + 0.05", ks.limsup_estimate <= kw.limsup_estimate + 0.05,
      "K_s=" + str(ks.limsup_estimate) + " K_w=" + str(kw.limsup_estimate));

  {
    bool ok = true;
    for (std::size_t n = 0; n <= table.horizon && ok; ++n) {
      if (table.log_first_passage[n] > table.log_target_weight[n] + 1e-9) ok = false;
    }
    add("first passage <= n-step weight", ok);
  }
  if (table.horizon >= 8) {
    // Chapman-Kolmogorov on k^(n+m)_{x,y} for a few (n, m)
    double worst = 0.0;
    for (auto [n, m] : {std::pair<std::size_t, std::size_t>{3, 5}, {2, 6}, {4, 4}}) {
      for (std::size_t i = 0; i < table.step_rows[n + m].index.size(); i += 7) {
        const Vertex y = table.step_rows[n + m].index[i];
        double sum = 0.0;
        const SparseRow& row = table.step_rows[n];
        for (std::size_t j = 0; j < row.index.size(); ++j) {
          const SeriesTable tw = build_series_table(k, row.index[j], std::nullopt, m);
          sum += table.step_weight(n, row.index[j]) * tw.step_weight(m, y);
        }
        const double direct = table.step_weight(n + m, y);
        worst = std::max(worst, std::abs(sum - direct) / std::max(direct, 1e-300));
        if (i > 50) break;
      }
    }
    add("Chapman-Kolmogorov", worst <= 1e-9, "max relative error " + str(worst));
  }
  if (ks.limsup_estimate > 0.0) {
    const double lambda = 0.5 / ks.limsup_estimate;
    const IdentityReport ir = check_series_identities(k, lambda, root, root, horizon);
    add("series identities at lambda=" + str(lambda), ir.all_within(kIdentityTolerance),
        "max residual " + str(ir.max_residual()) + ", skipped " + std::to_string(ir.skipped()));
  }
  try {
    const U2Result u2 = check_U2(model);
    add("(U2) infimum > 0", u2.infimum > 0.0, "delta=" + str(u2.infimum));
  } catch (const std::exception& e) {
    add("(U2) infimum > 0", false, e.what());
  }
  {
    const auto mom = moment_recursion(k, 0.5, 3);
    bool ok = true;
    for (std::size_t x = 0; x < k.vertex_count(); ++x) {
      if (mom[1].xi[x] && *mom[1].xi[x] != 2.0) ok = false;
    }
    add("xi_1 = 2", ok);
    double worst = 0.0;
    for (const auto& m : mom) worst = std::max(worst, m.xi_crosscheck_residual);
    add("xi recursion cross-check", worst <= 1e-9, "residual " + str(worst));
  }
  {
    const double lambda = kw.liminf_estimate > 0.0 ? 1.5 / kw.liminf_estimate : 1.0;
    const GenFunVector q = extinction_probabilities(k, lambda, 1e-12, 200000);
    const auto g = apply_G(k, lambda, q.values);
    double res = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) res = std::max(res, std::abs(g[i] - q.values[i]));
    add("q-bar fixed point residual at lambda=" + str(lambda), q.converged && res <= 1e-12, "residual " + str(res));
  }

  const std::string& c = model.constructor;
  auto projection_check = [&](const std::string& name, const BrwModel& target, const std::vector<Vertex>& g) {
    const ProjectionReport pr = verify_projection(model, target, g, 12);
    add(name, pr.valid,
        std::to_string(pr.violations.size()) + " fiber violations (" + std::to_string(pr.boundary_rows_reported) +
            " on boundary rows), " + std::to_string(pr.mass_failures) + " mass failures of " +
            std::to_string(pr.mass_checks));
  };
  if (c == "complete") {
    const std::size_t m = p.at("m").get<std::size_t>();
    projection_check("projection onto single site", build_single_site(static_cast<double>(m - 1)),
                     std::vector<Vertex>(m, 0));
  }
  if (c == "tree") {
    const std::size_t d = p.at("d").get<std::size_t>();
    const std::size_t depth = p.at("depth").get<std::size_t>();
    projection_check("projection onto radial quotient", build_regular_tree_radial(d, depth),
                     regular_tree_radial_map(d, depth));
  }
  if (c == "tree_with_lines") {
    const std::size_t d = p.at("d").get<std::size_t>();
    const std::size_t td = p.at("tree_depth").get<std::size_t>();
    const std::size_t ld = p.at("line_depth").get<std::size_t>();
    projection_check("projection onto radial quotient", build_tree_with_lines_radial(d, td, ld),
                     tree_with_lines_radial_map(d, td, ld));
  }
  if (c == "star" || c == "star_radial") {
    const std::size_t d = p.at("d").get<std::size_t>();
    const std::size_t depth = p.at("depth").get<std::size_t>();
    if (c == "star") projection_check("projection onto radial quotient", build_star_radial(d, depth), star_radial_map(d, depth));
    const SeriesTable t = build_series_table(k, root, root, std::min<std::size_t>(80, 2 * depth));
    // the window sees the closed form's power series up to its horizon:
    // d(1-sqrt(1-4x))/2 = d sum_{m>=1} C_{m-1} x^m with x = lambda^2
    double worst = 0.0, tail = 0.0;
    for (double lambda : {0.1, 0.2, 0.3, 0.4}) {
      const double x = lambda * lambda;
      const double closed = static_cast<double>(d) * (1.0 - std::sqrt(1.0 - 4.0 * x)) / 2.0;
      double partial = 0.0, term = x;  // term = C_{m-1} x^m
      for (std::size_t m = 1; 2 * m <= t.horizon; ++m) {
        partial += term;
        term *= x * 2.0 * static_cast<double>(2 * m - 1) / static_cast<double>(m + 1);
      }
      partial *= static_cast<double>(d);
      worst = std::max(worst, std::abs(evaluate_Phi(t, lambda).partial_sum - partial) / std::max(1.0, partial));
      tail = std::max(tail, closed - partial);
    }
    add("Phi(0,0) closed form d(1-sqrt(1-4 lambda^2))/2 through the horizon", worst <= 1e-9,
        "max difference " + str(worst) + ", closed-form tail beyond horizon " + str(tail));
  }
  if (c == "tree_with_lines_radial") {
    const std::size_t d = p.at("d").get<std::size_t>();
    const double want = 1.0 / (2.0 * std::sqrt(static_cast<double>(d)));
    try {
      const LambdaSResult r = lambda_s_from_phi(k, root, 0.0, 1.0, 80);
      add("lambda_s = 1/(2 sqrt d)", std::abs(r.value - want) <= 1e-3, "got " + str(r.value) + ", want " + str(want));
    } catch (const std::exception& e) {
      add("lambda_s = 1/(2 sqrt d)", false, e.what());
    }
  }
  if (c == "example_finally") {
    const std::size_t h = p.at("half_length").get<std::size_t>();
    const ExampleFinally ex = build_example_finally(h, p.at("reducible").get<bool>());
    bool prod_ok = true;
    for (std::size_t n = 0; n < h; ++n) prod_ok = prod_ok && ex.forward[n] * ex.backward[n] == 2.0;
    add("k(-n,-n-1) k(n,n+1) = 2", prod_ok);
    const ExampleFinally red = build_example_finally(h, true);
    const std::size_t top = std::min<std::size_t>(200, h);
    const SeriesTable tr = build_series_table(red.model.matrix, red.model.root, std::nullopt, top);
    bool growth_ok = true;
    for (std::size_t n = 1; n <= top; ++n) {
      const double bound = (1.0 + 0.5 * static_cast<double>(n)) * std::log(2.0);
      if (tr.log_generation_mass[n] < bound - 1e-9) growth_ok = false;
    }
    add("sum_i k^(n)_{0,i} >= 2^{1+n/2} (reducible variant)", growth_ok);
    if (!ex.reducible) {
      const SeriesTable ti = build_series_table(k, root, std::nullopt, top);
      bool ok = true;
      const double beta = ex.beta_plus + ex.beta_minus;
      for (std::size_t n = 1; n <= top; ++n) {
        const double lo = log_add(log_product(ex.forward, n), log_product(ex.backward, n));
        const double t = ti.log_generation_mass[n];
        if (t < lo - 1e-9 || t > lo - std::log1p(-beta) + 1e-9) ok = false;
      }
      add("sandwich prod <= T^n_0 <= prod/(1-beta+-beta-)", ok);
    }
  }
  if (c == "feedback_line") {
    const std::size_t len = p.at("length").get<std::size_t>();
    const double beta = p.at("beta").get<double>();
    const double delta = p.at("delta").get<double>();
    const auto rates = build_oscillating_sequence(std::max<std::size_t>(len, 2)).rates;
    bool sandwich = true;
    bool monotone = true;
    double prev = 0.0;
    for (std::size_t n = 1; n <= len; ++n) {
      const double lp = log_product(rates, n);
      const double t = table.log_generation_mass[std::min(n, table.horizon)];
      if (n > table.horizon) break;
      if (t < lp - 1e-9 || t > lp - std::log1p(-beta) + 1e-9) sandwich = false;
      const double scaled = t - static_cast<double>(n) * std::log(delta);
      if (scaled < prev - 1e-9) monotone = false;
      prev = scaled;
    }
    add("sandwich prod <= T^n_0 <= prod/(1-beta)", sandwich);
    add("T^n_0 / delta^n nondecreasing", monotone);
  }
  if (c == "bpve" && p.contains("rates")) {
    const auto rates = p.at("rates").get<std::vector<double>>();
    const double kmin = *std::min_element(rates.begin(), rates.end());
    const double lambda = 1.5 / kmin;
    const double rho = 1.2 / kmin;
    try {
      const auto v = bpve_witness(rates, lambda, rho);
      const auto verdict = check_linear_witness(model, lambda, v, root);
      add("BPVE witness v(n)=t/(rho^n prod k)", verdict.holds, verdict.diagnostic);
    } catch (const std::exception& e) {
      add("BPVE witness v(n)=t/(rho^n prod k)", false, e.what());
    }
  }
  if (c == "example_tree_like") {
    const TreeLikeModel tl = build_example_tree_like(p.at("depth").get<std::size_t>());
    const MappingReport mr = check_mapping_hypotheses(tl.model, tl.y_set, tl.model.root, tl.copy_maps,
                                                      tl.model.vertex_count());
    add("mapping hypotheses on copy maps", mr.holds,
        std::to_string(mr.violations.size()) + " violations, max distance to Y " + std::to_string(mr.max_distance_to_y));
    add("irreducible window", is_irreducible(k));
  }
  return out;
}

}  // namespace

std::vector<double> parse_lambda_grid(const std::string& text) {
  std::vector<double> out;
  auto to_num = [&](const std::string& s) {
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (...) {
      throw UsageError("bad number '" + s + "' in lambda grid");
    }
  };
  if (text.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string part; std::getline(ss, part, ':');) parts.push_back(part);
    if (parts.size() != 3) throw UsageError("lambda grid range must be lo:hi:step");
    const double lo = to_num(parts[0]);
    const double hi = to_num(parts[1]);
    const double step = to_num(parts[2]);
    if (!(step > 0.0) || hi < lo) throw UsageError("lambda grid range needs lo <= hi and step > 0");
    const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9));
    for (std::size_t i = 0; i <= count; ++i) out.push_back(lo + static_cast<double>(i) * step);
  } else {
    std::stringstream ss(text);
    for (std::string part; std::getline(ss, part, ',');) out.push_back(to_num(part));
  }
  for (double v : out) {
    if (!(v >= 0.0)) throw UsageError("lambda values must be >= 0");
  }
  return out;
}

BrwModel load_model_spec(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<long>(upto), '\n');
    throw UsageError("spec parse error at line " + std::to_string(line) + ": " + e.what());
  }
  if (!j.is_object()) throw UsageError("spec: top level must be an object");
  if (!j.contains("constructor") || !j["constructor"].is_string()) {
    throw UsageError("spec: field 'constructor' missing or not a string");
  }
  nlohmann::json params = nlohmann::json::object();
  if (j.contains("parameters")) {
    if (!j["parameters"].is_object()) throw UsageError("spec: field 'parameters' must be an object");
    params = j["parameters"];
  }
  if (j.contains("truncation")) {
    if (!j["truncation"].is_object()) throw UsageError("spec: field 'truncation' must be an object");
    for (auto& [key, value] : j["truncation"].items()) params[key] = value;
  }
  try {
    return make_model(j["constructor"].get<std::string>(), params);
  } catch (const ContractViolation& e) {
    throw UsageError(std::string("spec: ") + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("spec: field type error: ") + e.what());
  }
}

BrwModel resolve_model(const RunConfig& config) {
  if (config.model && config.spec_path) throw UsageError("give exactly one of --model and --spec");
  if (!config.model && !config.spec_path) throw UsageError("missing model source: give --model or --spec");
  if (config.spec_path) return load_model_spec(read_file(*config.spec_path));
  nlohmann::json params = config.parameters;
  if (config.depth) {
    const std::string& m = *config.model;
    params[(m == "tree_with_lines" || m == "tree_with_lines_radial") ? "tree_depth" : "depth"] = *config.depth;
    if (m == "bpve" || m == "bpve_remark" || m == "oscillating" || m == "feedback_line" || m == "shrinking_loops") {
      params.erase("depth");
      params["length"] = *config.depth;
    }
    if (m == "example_finally") {
      params.erase("depth");
      params["half_length"] = *config.depth;
    }
  }
  try {
    return make_model(*config.model, params);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("model parameter type error: ") + e.what());
  }
}

int cmd_report(const RunConfig& config, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const BrwModel model = resolve_model(config);
    const std::vector<double> grid = config.lambdas.empty() ? std::vector<double>{1.0} : config.lambdas;
    ReportOptions opt;
    opt.simulate = config.trials > 0 && config.command == "report" && config.lambdas.size() > 0 &&
                   config.parameters.contains("simulate");
    opt.mc = {config.trials, config.horizon, config.cap, config.seed, config.threads};
    if (config.epsilon) opt.epsilons = {*config.epsilon};
    const CriticalParameterReport rep = assemble_report(model, model.root, grid, opt);
    const std::string json = rep.to_json().dump(2) + "\n";
    if (config.out) {
      write_file(*config.out, json);
      write_file(with_extension(*config.out, ".csv"), rep.sweep_csv());
    } else {
      out << json;
    }
    return kExitOk;
  });
}

int cmd_sweep(const RunConfig& config, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (config.lambdas.size() < 2) throw UsageError("sweep needs a lambda grid of at least two points");
    const BrwModel model = resolve_model(config);
    const EstimateConfig mc{config.trials, config.horizon, config.cap, config.seed, config.threads};
    const std::string csv = sweep_csv(sweep(model, model.root, config.lambdas, config.trials > 0, mc));
    if (config.out) {
      write_file(*config.out, csv);
    } else {
      out << csv;
    }
    return kExitOk;
  });
}

int cmd_simulate(const RunConfig& config, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (config.lambdas.size() != 1) throw UsageError("simulate needs exactly one --lambda");
    if (config.trials < 1) throw UsageError("--trials must be >= 1");
    const BrwModel model = resolve_model(config);
    const EstimateConfig mc{config.trials, config.horizon, config.cap, config.seed, config.threads};
    const SurvivalEstimate e = estimate_survival(model, config.lambdas[0], model.root, mc);
    const nlohmann::json j = {{"lambda", config.lambdas[0]},        {"trials", e.trials},
                              {"survivors", e.survivors},          {"point", e.point},
                              {"wilson_lo", e.wilson_lo},          {"wilson_hi", e.wilson_hi},
                              {"censored_fraction", e.censored_fraction}, {"cap_hits", e.cap_hits},
                              {"model", model.provenance()}};
    const std::string text = j.dump(2) + "\n";
    if (config.out) {
      write_file(*config.out, text);
    } else {
      out << text;
    }
    return kExitOk;
  });
}

int cmd_verify(const RunConfig& config, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const BrwModel model = resolve_model(config);
    const auto checks = verify_model(model);
    bool all = true;
    std::ostringstream text;
    for (const CheckLine& c : checks) {
      all = all && c.pass;
      text << (c.pass ? "PASS " : "FAIL ") << c.name;
      if (!c.detail.empty()) text << ": " << c.detail;
      text << "\n";
    }
    if (config.out) {
      write_file(*config.out, text.str());
    } else {
      out << text.str();
    }
    return all ? kExitOk : kExitCheckFailed;
  });
}

int cmd_zoo(const RunConfig&, std::ostream& out, std::ostream&) {
  for (const auto& [name, params] : zoo_catalog()) out << name << "  " << params << "\n";
  return kExitOk;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Critical parameters and survival of branching random walks on finite windows", "brwlab"};
  app.footer(kCsvHelp);
  app.require_subcommand(1);
  RunConfig cfg;
  std::vector<std::string> params;
  std::optional<double> lambda;
  std::optional<std::string> grid;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--model", cfg.model, "zoo model name (see 'zoo')");
    sub->add_option("--param", params, "model parameter key=value (repeatable)");
    sub->add_option("--spec", cfg.spec_path, "model spec JSON file");
    sub->add_option("--lambda", lambda, "single lambda value");
    sub->add_option("--lambda-grid", grid, "comma list or lo:hi:step");
    sub->add_option("--trials", cfg.trials, "Monte Carlo trials");
    sub->add_option("--horizon", cfg.horizon, "simulation time horizon");
    sub->add_option("--cap", cfg.cap, "population cap (reaching it counts as survival)");
    sub->add_option("--seed", cfg.seed, "master seed");
    sub->add_option("--depth", cfg.depth, "truncation depth of the model");
    sub->add_option("--epsilon", cfg.epsilon, "epsilon for the (U1) check");
    sub->add_option("--out", cfg.out, "output path");
    sub->add_option("--threads", cfg.threads, "simulation threads (default BRWLAB_THREADS or all cores)");
  };
  struct Cmd {
    const char* name;
    const char* help;
  };
  for (const Cmd& c : {Cmd{"report", "critical-parameter report (JSON, plus CSV next to --out)"},
                       Cmd{"simulate", "Monte Carlo survival estimate at one lambda"},
                       Cmd{"sweep", "per-lambda q-bar and Monte Carlo CSV"},
                       Cmd{"verify", "run the property checks on one model"},
                       Cmd{"zoo", "list model constructors"}}) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    common(sub);
    sub->footer(kCsvHelp);
  }

  std::vector<std::string> args;
  for (int i = argc - 1; i > 0; --i) args.emplace_back(argv[i]);
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kExitOk;
    }
    err << "error: " << e.what() << "\n" << "run 'brwlab --help' for usage\n";
    return kExitUsage;
  }
  for (CLI::App* sub : app.get_subcommands()) cfg.command = sub->get_name();

  try {
    for (const std::string& kv : params) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos || eq == 0) throw UsageError("--param expects key=value, got '" + kv + "'");
      cfg.parameters[kv.substr(0, eq)] = parse_param_value(kv.substr(eq + 1));
    }
    if (lambda && grid) throw UsageError("give --lambda or --lambda-grid, not both");
    if (lambda) {
      if (!(*lambda >= 0.0)) throw UsageError("lambda must be >= 0");
      cfg.lambdas = {*lambda};
    }
    if (grid) cfg.lambdas = parse_lambda_grid(*grid);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  if (cfg.command == "report") return cmd_report(cfg, out, err);
  if (cfg.command == "simulate") return cmd_simulate(cfg, out, err);
  if (cfg.command == "sweep") return cmd_sweep(cfg, out, err);
  if (cfg.command == "verify") return cmd_verify(cfg, out, err);
  return cmd_zoo(cfg, out, err);
}

}  // namespace brwlab
