#include <cmath>

#include "brwlab/errors.hpp"
#include "brwlab/rate_matrix.hpp"
#include "doctest.h"

using namespace brwlab;

TEST_SUITE("core-matrix") {
  TEST_CASE("row_apply on small matrices") {
    const RateMatrix loop({{{0, 2.0}}});
    CHECK(row_apply(loop, std::vector<double>{1.0}) == std::vector<double>{2.0});

    const RateMatrix chain({{{1, 1.0}}, {}});
    CHECK(row_apply(chain, std::vector<double>{0.0, 3.0}) == std::vector<double>{3.0, 0.0});
    CHECK(row_apply(chain, std::vector<double>{0.0, 0.0}) == std::vector<double>{0.0, 0.0});

    CHECK_THROWS_AS(row_apply(chain, std::vector<double>{1.0}), ContractViolation);
  }

  TEST_CASE("construction rejects bad rates") {
    CHECK_THROWS_AS(RateMatrix({{{0, -1.0}}}), ContractViolation);
    CHECK_THROWS_AS(RateMatrix({{{3, 1.0}}}), ContractViolation);
    CHECK_THROWS_AS(RateMatrix({{{0, 1.0}, {0, 2.0}}}), ContractViolation);
    CHECK_THROWS_AS(RateMatrix({{{0, std::nan("")}}}), ContractViolation);
  }

  TEST_CASE("row sums, rates and extremes") {
    const RateMatrix k({{{1, 0.5}, {2, 1.5}}, {{0, 1.0}}, {}});
    CHECK(k.row_sum(0) == 2.0);
    CHECK(k.row_sum(2) == 0.0);
    CHECK(k.rate(0, 2) == 1.5);
    CHECK(k.rate(2, 0) == 0.0);
    CHECK(k.max_row_sum() == 2.0);
    CHECK(k.min_positive_rate() == 0.5);
    CHECK(k.nonzero_count() == 3);
    const auto left = k.left_apply(std::vector<double>{1.0, 1.0, 1.0});
    CHECK(left == std::vector<double>{1.0, 0.5, 1.5});
  }

  TEST_CASE("irreducibility and distances") {
    const RateMatrix cycle({{{1, 1.0}}, {{2, 1.0}}, {{0, 1.0}}});
    CHECK(is_irreducible(cycle));
    const RateMatrix path({{{1, 1.0}}, {{2, 1.0}}, {}});
    CHECK_FALSE(is_irreducible(path));
    const auto dist = bfs_distances(path, 1);
    CHECK(dist[1] == 0);
    CHECK(dist[2] == 1);
    CHECK(dist[0] == SIZE_MAX);
  }
}
