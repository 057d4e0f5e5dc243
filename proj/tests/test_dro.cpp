#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "oracles.hpp"
#include "wdro/dro.hpp"
#include "wdro/rng.hpp"

using namespace wdro;

namespace {

WassersteinRadius radius(double eps, std::size_t ell) { return {0.0, ell, eps}; }

// Smallest r on a fine grid with worst-case probability <= eta.
double sweep_offset(std::span<const double> s, double eps, double eta, double hi) {
  const int n = 400000;
  for (int i = 0; i <= n; ++i) {
    const double r = hi * i / n;
    if (worst_case_violation_prob(s, r, eps) <= eta) return r;
  }
  return hi;
}

}  // namespace

TEST_CASE("radius: zero beta and zero constant give zero") {
  CHECK(wasserstein_radius(1.0, 2, 0.0).epsilon == 0.0);
  CHECK(wasserstein_radius(0.0, 10, 0.99).epsilon == 0.0);
}

TEST_CASE("radius: ln(1/(1-beta)) = 1 with C=1, l=2 gives 1") {
  CHECK(wasserstein_radius(1.0, 2, 1.0 - std::exp(-1.0)).epsilon == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("radius: beta >= 1 is rejected") {
  CHECK_THROWS(wasserstein_radius(1.0, 5, 1.0));
  CHECK_THROWS(wasserstein_radius(1.0, 5, 1.5));
}

TEST_CASE("radius: strictly decreasing in l, halves when l quadruples") {
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t l = 1; l < 200; ++l) {
    const double e = wasserstein_radius(0.7, l, 0.95).epsilon;
    CHECK(e < prev);
    prev = e;
  }
  const auto r = oracle::check_radius_formula();
  CHECK_MESSAGE(r.passed, r.detail);
}

TEST_CASE("estimate_C: identical samples give zero") {
  CHECK(estimate_C(std::vector<double>{0.0, 0.0, 0.0}) <= 1e-6);
  CHECK(estimate_C(std::vector<double>{2.5, 2.5}) <= 1e-6);
}

TEST_CASE("estimate_C: {-1, 1} matches the dense grid") {
  const std::vector<double> s{-1.0, 1.0};
  CHECK(estimate_C(s) == doctest::Approx(oracle::dense_grid_C(s)).epsilon(1e-4));
}

TEST_CASE("estimate_C: seeded normal sample matches the dense grid") {
  Rng rng(42);
  std::vector<double> s(100);
  for (auto& v : s) v = rng.normal();
  const double C = estimate_C(s);
  CHECK(C > 0.0);
  CHECK(C == doctest::Approx(oracle::dense_grid_C(s)).epsilon(1e-4));
}

TEST_CASE("estimate_C: scale equivariance and large residuals stay finite") {
  Rng rng(7);
  std::vector<double> s(50), big(50);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = rng.normal();
    big[i] = 1e4 * s[i];
  }
  const double c1 = estimate_C(s), c2 = estimate_C(big);
  CHECK(std::isfinite(c2));
  CHECK(c2 == doctest::Approx(1e4 * c1).epsilon(1e-6));
}

TEST_CASE("residual sets reject non-finite values") {
  CHECK_THROWS_WITH(EmpiricalResidualSet(1, {0.1, std::nan("")}), "invalid residual");
  CHECK_THROWS_WITH(estimate_C(std::vector<double>{0.0, std::numeric_limits<double>::infinity()}),
                    "invalid residual");
  CHECK_THROWS(EmpiricalResidualSet(0, {0.1}));
}

TEST_CASE("residual sets are sorted and grouped by depth with gaps") {
  const std::vector<ResidualSample> in{{1, 0.3}, {1, -0.1}, {3, 0.2}, {1, 0.0}};
  const auto sets = group_by_depth(in, 3);
  REQUIRE(sets.size() == 3);
  REQUIRE(sets[0]);
  CHECK(std::is_sorted(sets[0]->samples().begin(), sets[0]->samples().end()));
  CHECK(sets[0]->count() == 3);
  CHECK_FALSE(sets[1]);
  REQUIRE(sets[2]);
  CHECK(sets[2]->depth() == 3);
}

TEST_CASE("worst case: worked examples") {
  CHECK(worst_case_violation_prob(std::vector<double>{-1, -1, -1, -1}, 0.0, 0.0) == 0.0);
  CHECK(worst_case_violation_prob(std::vector<double>{-1, 1}, 0.0, 0.0) == 0.5);
  const std::vector<double> s{-0.1, 0.0, 0.1, 0.2};
  // Moving 0.2 costs 0.05/4 and 0.1 costs 0.15/4: exactly the budget.
  const double lp = oracle::lp_worst_case_violation_prob(s, 0.25, 0.05);
  CHECK(lp == doctest::Approx(0.5).epsilon(1e-8));
  CHECK(worst_case_violation_prob(s, 0.25, 0.05) == doctest::Approx(lp).epsilon(1e-8));
}

TEST_CASE("worst case: piecewise linear in epsilon between breakpoints") {
  const std::vector<double> s{-0.4, -0.2, 0.0};
  // Cheapest move (0.0 -> 0.1) costs 0.1/3; half of it buys half a sample.
  CHECK(worst_case_violation_prob(s, 0.1, 0.05 / 3.0) == doctest::Approx(0.5 / 3.0));
  CHECK(worst_case_violation_prob(s, 0.1, 0.1 / 3.0) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("worst case: greedy equals the LP transport oracle") {
  const auto r = oracle::check_lp_equivalence(11, 200, 20);
  CHECK_MESSAGE(r.passed, r.detail);
}

TEST_CASE("offset: perfect model needs none") {
  const EmpiricalResidualSet set(1, {0.0, 0.0, 0.0, 0.0});
  for (double eta : {0.01, 0.1, 0.5}) CHECK(compute_offset(set, radius(0.0, 4), eta) == 0.0);
}

TEST_CASE("offset: zero radius gives the counting quantile") {
  const EmpiricalResidualSet set(1, {0.1, 0.2, 0.3, 0.4});
  const double r = compute_offset(set, radius(0.0, 4), 0.25);
  CHECK(r == doctest::Approx(0.3).epsilon(1e-8));
  // Exhaustive count at every candidate: only r >= 0.3 leaves <= 1 sample above.
  for (double cand : {0.1, 0.2, 0.3, 0.4}) {
    const auto above = std::count_if(set.samples().begin(), set.samples().end(),
                                     [&](double v) { return v > cand; });
    CHECK((above <= 1) == (cand >= 0.3));
  }
}

TEST_CASE("offset: {0,0,0,0.4}, eta 0.25, eps 0.05 agrees with an r sweep") {
  const EmpiricalResidualSet set(1, {0.0, 0.0, 0.0, 0.4});
  const double r = compute_offset(set, radius(0.05, 4), 0.25);
  const double sweep = sweep_offset(set.samples(), 0.05, 0.25, 1.0);
  CHECK(r == doctest::Approx(sweep).epsilon(1e-5));
  CHECK(worst_case_violation_prob(set.samples(), r + 1e-8, 0.05) <= 0.25 + 1e-9);
  CHECK(worst_case_violation_prob(set.samples(), r - 1e-4, 0.05) > 0.25);
}

TEST_CASE("offset: eta = 0 with a positive radius has no finite answer") {
  const EmpiricalResidualSet set(1, {0.0, 0.1});
  CHECK_THROWS_AS(compute_offset(set, radius(0.01, 2), 0.0), std::domain_error);
}

TEST_CASE("offset: never negative") {
  const EmpiricalResidualSet set(1, {-3.0, -2.0, -1.0});
  CHECK(compute_offset(set, radius(0.0, 3), 0.1) == 0.0);
  CHECK(compute_offset(set, radius(0.2, 3), 0.1) >= 0.0);
}

TEST_CASE("offset: monotone in epsilon and in 1 - eta") {
  const auto r = oracle::check_offset_monotonicity(5, 500);
  CHECK_MESSAGE(r.passed, r.detail);
}

TEST_CASE("offset: a sample at or below the offset does not raise it without a radius") {
  Rng rng(3);
  for (int k = 0; k < 200; ++k) {
    std::vector<double> s(5 + rng.below(40));
    for (auto& v : s) v = rng.normal();
    const double eta = 0.1;
    const double before = compute_offset(EmpiricalResidualSet(1, s), radius(0.0, s.size()), eta);
    s.push_back(std::min(before, rng.normal()));
    const double after = compute_offset(EmpiricalResidualSet(1, s), radius(0.0, s.size()), eta);
    CHECK(after <= before + 1e-9);
  }
}

TEST_CASE("conservative bound: worked examples") {
  const EmpiricalResidualSet s4(1, {0.1, 0.2, 0.3, 0.4});
  CHECK(conservative_offset_bound(s4, radius(0.0, 4), 0.25) == doctest::Approx(0.3));
  CHECK(conservative_offset_bound(s4, radius(0.0, 4), 0.25) ==
        doctest::Approx(empirical_upper_quantile(s4.samples(), 0.25)));
  const EmpiricalResidualSet s1(1, {0.0});
  CHECK(conservative_offset_bound(s1, radius(0.1, 1), 0.1) == doctest::Approx(1.0));
  CHECK_THROWS(conservative_offset_bound(s1, radius(0.1, 1), 0.0));
}

TEST_CASE("conservative bound: never below the exact offset") {
  const auto r = oracle::check_conservative_bound(9, 1000);
  CHECK_MESSAGE(r.passed, r.detail);
}

TEST_CASE("drift inflation: examples and sign grid") {
  const std::vector<AgedResidual> in{{0.1, 3}, {-0.1, 3}, {0.0, 7}};
  const auto out = inflate_residuals_for_drift(in, 0.01);
  CHECK(out[0] == doctest::Approx(0.13));
  CHECK(out[1] == doctest::Approx(-0.13));
  CHECK(out[2] == 0.0);
  const auto r = oracle::check_drift_inflation();
  CHECK_MESSAGE(r.passed, r.detail);
}
