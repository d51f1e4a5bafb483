#include <cmath>
#include <numbers>
#include <random>

#include "brwlab/errors.hpp"
#include "brwlab/models.hpp"
#include "brwlab/series.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace brwlab;

TEST_SUITE("core-matrix") {
  TEST_CASE("series table matches dense powers and path enumeration") {
    std::mt19937_64 rng(7);
    for (int rep = 0; rep < 5; ++rep) {
      const RateMatrix k = oracle::random_irreducible(5, rng);
      const auto pw = oracle::powers(k, 8);
      const auto a = oracle::dense(k);
      const SeriesTable t = build_series_table(k, 0, 3, 8);
      for (std::size_t n = 0; n <= 8; ++n) {
        for (Vertex y = 0; y < 5; ++y) CHECK(t.step_weight(n, y) == doctest::Approx(pw[n][0][y]).epsilon(1e-12));
        double mass = 0.0;
        for (double w : pw[n][0]) mass += w;
        CHECK(t.generation_mass(n) == doctest::Approx(mass).epsilon(1e-12));
        CHECK(t.target_weight(n) == doctest::Approx(pw[n][0][3]).epsilon(1e-12));
        CHECK(t.first_passage(n) == doctest::Approx(oracle::first_passage_paths(a, 0, 3, n)).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("star first returns follow the Catalan count") {
    const BrwModel star = build_star_of_lines(4, 30);
    const SeriesTable t = build_series_table(star.matrix, star.root, star.root, 20);
    CHECK(t.first_passage(2) == doctest::Approx(4.0).epsilon(1e-14));
    CHECK(t.first_passage(4) == doctest::Approx(4.0).epsilon(1e-14));
    CHECK(t.first_passage(6) == doctest::Approx(8.0).epsilon(1e-14));
    for (std::size_t m = 1; m <= 10; ++m) {
      CHECK(t.first_passage(2 * m) == doctest::Approx(4.0 * oracle::catalan(m - 1)));
      CHECK(t.first_passage(2 * m - 1) == 0.0);
    }
    // brute force on a short window agrees as well
    const BrwModel small = build_star_of_lines(4, 4);
    const auto a = oracle::dense(small.matrix);
    const SeriesTable ts = build_series_table(small.matrix, small.root, small.root, 8);
    for (std::size_t n = 1; n <= 8; ++n) CHECK(ts.first_passage(n) == doctest::Approx(oracle::first_passage_paths(a, 0, 0, n)).epsilon(1e-14));
  }

  TEST_CASE("overflow truncates the table and records n") {
    // one step from the uniform row sums two entries of 1e308
    const RateMatrix k({{{0, 1e308}, {1, 1e308}}, {{0, 1e308}, {1, 1e308}}});
    const SeriesTable t = build_series_table(k, 0, 0, 10);
    REQUIRE(t.overflow_at.has_value());
    CHECK(*t.overflow_at == 2);
    CHECK(t.horizon == 1);
    CHECK(t.log_generation_mass[1] == doctest::Approx(std::log(2.0) + std::log(1e308)));
  }

  TEST_CASE("deep horizons stay finite through rescaling") {
    const BrwModel tree = build_regular_tree_radial(3, 600);
    const SeriesTable t = build_series_table(tree.matrix, tree.root, tree.root, 500);
    CHECK_FALSE(t.overflow_at.has_value());
    CHECK(std::isfinite(t.log_generation_mass[500]));
    CHECK(t.generation_mass_root(500) == doctest::Approx(3.0).epsilon(0.01));
  }

  TEST_CASE("star Phi closed form") {
    const BrwModel star = build_star_of_lines(4, 40);
    const SeriesTable t = build_series_table(star.matrix, star.root, star.root, 60);
    const double lambda = 0.3;
    const double closed = 4.0 * (1.0 - std::sqrt(1.0 - 4.0 * lambda * lambda)) / 2.0;
    const SeriesEvaluation e = evaluate_Phi(t, lambda);
    CHECK(e.converged);
    CHECK(std::abs(e.partial_sum - closed) <= 1e-6);
  }

  TEST_CASE("H and Theta of a single loop are geometric") {
    const BrwModel s = build_single_site(2.0);
    const SeriesTable t = build_series_table(s.matrix, 0, 0, 200);
    CHECK(evaluate_H(t, 0.25).partial_sum == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(evaluate_Theta(t, 0.25).partial_sum == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(evaluate_Phi(t, 0.25).partial_sum == doctest::Approx(0.5).epsilon(1e-12));
    CHECK_FALSE(evaluate_H(t, 0.6).converged);
  }

  TEST_CASE("series identities on random models") {
    std::mt19937_64 rng(11);
    for (int rep = 0; rep < 5; ++rep) {
      const RateMatrix k = oracle::random_irreducible(6, rng);
      const double rho = oracle::perron_root(oracle::dense(k));
      const IdentityReport r = check_series_identities(k, 0.5 / rho, 0, 2, 200);
      CHECK(r.residuals.size() == 5);
      CHECK(r.skipped() == 0);
      CHECK(r.all_within(1e-6));
    }
  }

  TEST_CASE("identities are skipped, not misreported, past the radius") {
    const BrwModel s = build_single_site(2.0);
    const IdentityReport r = check_series_identities(s.matrix, 0.75, 0, 0, 100);
    CHECK(r.skipped() > 0);
    for (const auto& res : r.residuals) {
      if (!res.residual) CHECK_FALSE(res.diagnostic.empty());
    }
  }

  TEST_CASE("root estimates") {
    const BrwModel s = build_single_site(3.0);
    const SeriesTable t = build_series_table(s.matrix, 0, 0, 40);
    CHECK(estimate_Ks(t).limsup_estimate == doctest::Approx(3.0));
    CHECK(estimate_Kw(t).liminf_estimate == doctest::Approx(3.0));
    CHECK_FALSE(estimate_Kw(t).oscillation_flag);

    // bipartite: odd terms are zero and ignored
    const BrwModel c2 = build_complete(2);
    const SeriesTable tc = build_series_table(c2.matrix, 0, 0, 40);
    CHECK(estimate_Ks(tc).liminf_estimate == doctest::Approx(1.0));

    // nilpotent window: zero returns give zero
    const BrwModel path = build_bpve(std::vector<double>(5, 2.0), 5);
    const SeriesTable tp = build_series_table(path.matrix, 0, 0, 20);
    const RootEstimate ks = estimate_Ks(tp);
    CHECK(ks.limsup_estimate == 0.0);
    CHECK_FALSE(ks.oscillation_flag);

    const BrwModel bp = build_bpve(std::vector<double>(100, 2.0), 100);
    const SeriesTable tb = build_series_table(bp.matrix, 0, std::nullopt, 60);
    CHECK(estimate_Kw(tb).liminf_estimate == doctest::Approx(2.0));
  }

  TEST_CASE("oscillating rates show liminf and limsup apart") {
    const OscillatingSequence seq = build_oscillating_sequence(1920);
    const BrwModel line = build_bpve(seq.rates, 1920);
    const SeriesTable t = build_series_table(line.matrix, 0, std::nullopt, 1920);
    const RootEstimate r = estimate_Kw(t, RootWindow{16, 1920});
    CHECK(r.limsup_estimate - r.liminf_estimate >= 0.3);
    CHECK(r.oscillation_flag);
  }

  TEST_CASE("lambda_s from Phi") {
    const BrwModel star = build_star_radial(4, 40);
    const LambdaSResult r = lambda_s_from_phi(star.matrix, star.root, 0.0, 1.0, 80);
    CHECK(std::abs(r.value - std::sqrt(3.0) / 4.0) <= 1e-4);

    const BrwModel s = build_single_site(2.0);
    const LambdaSResult rs = lambda_s_from_phi(s.matrix, 0, 0.0, 2.0, 100);
    CHECK(rs.value == doctest::Approx(0.5).epsilon(1e-5));

    const BrwModel twl = build_tree_with_lines_radial(4, 40, 40);
    const LambdaSResult rt = lambda_s_from_phi(twl.matrix, twl.root, 0.0, 1.0, 80);
    CHECK(std::abs(rt.value - 0.25) <= 1e-3);
    CHECK(rt.radius_limited);
  }

  TEST_CASE("tail fit recovers a clean geometric series") {
    std::vector<double> logc;
    for (int n = 0; n <= 100; ++n) logc.push_back(std::log(5.0) + n * std::log(0.5) - 1.5 * std::log(n + 1.0));
    const TailFit f = fit_series_tail(logc);
    CHECK(f.ok);
    CHECK(f.radius() == doctest::Approx(2.0).epsilon(1e-3));
  }
}
