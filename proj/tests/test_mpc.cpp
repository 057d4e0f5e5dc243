#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "wdro/config.hpp"
#include "wdro/mpc.hpp"
#include "wdro/rng.hpp"
#include "wdro/studies.hpp"

using namespace wdro;

TEST_CASE("horizon: examples") {
  CHECK(horizon_for(1, 8) == 1);
  CHECK(horizon_for(64, 8) == 8);
  CHECK(horizon_for(12, 8) == 3);  // round(1.5) = 2 half away from zero
  CHECK(horizon_for(3, 8) == 1);
  CHECK(horizon_for(4, 8) == 2);
  CHECK(horizon_for(5, 12) == 1);
  CHECK(horizon_for(6, 12) == 2);
}

TEST_CASE("horizon: closed form over t in [1, 10 N_target], bounds and monotone") {
  const auto r = oracle::check_horizon_rule(80);
  CHECK_MESSAGE(r.passed, r.detail);
  for (int nt : {1, 8, 12}) {
    int prev = 1;
    for (int t = 1; t <= 200; ++t) {
      const int n = horizon_for(t, nt);
      CHECK(n >= 1);
      CHECK(n <= nt);
      CHECK(n >= prev);
      prev = n;
    }
  }
  CHECK_THROWS(horizon_for(0, 8));
  CHECK_THROWS(horizon_for(1, 0));
}

TEST_CASE("rounding is half away from zero") {
  CHECK(round_half_away(0.5) == 1);
  CHECK(round_half_away(1.5) == 2);
  CHECK(round_half_away(2.5) == 3);
  CHECK(round_half_away(-0.5) == -1);
  CHECK(round_half_away(0.49) == 0);
}

TEST_CASE("bootstrap action: defaults and pass-through") {
  const ExperimentConfig c;
  CHECK(bootstrap_action(std::vector<double>{c.battery.i_safe}) == std::vector<double>{25.0});
  CHECK(bootstrap_action(c.vehicle.bootstrap) == std::vector<double>{0.0, 0.0});
  CHECK(bootstrap_action(std::vector<double>{1.5, -0.25}) == std::vector<double>{1.5, -0.25});
  ExperimentConfig v;
  v.study = Study::vehicle;
  CHECK(make_study(v, 1).bootstrap == std::vector<double>{0.0, 0.0});
  CHECK(make_study(c, 1).bootstrap == std::vector<double>{25.0});
}

TEST_CASE("warm start: shift, repeat the last input, truncate, clip") {
  const std::vector<double> lo{-1.0, -1.0}, hi{1.0, 1.0};
  const std::vector<double> prev{0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
  CHECK(reconcile_warm_start(prev, 2, 3, lo, hi) == std::vector<double>{0.3, 0.4, 0.5, 0.6, 0.5, 0.6});
  CHECK(reconcile_warm_start(prev, 2, 4, lo, hi) ==
        std::vector<double>{0.3, 0.4, 0.5, 0.6, 0.5, 0.6, 0.5, 0.6});
  CHECK(reconcile_warm_start(prev, 2, 1, lo, hi) == std::vector<double>{0.3, 0.4});
  const std::vector<double> wild{5.0, -5.0};
  CHECK(reconcile_warm_start(wild, 2, 2, lo, hi) == std::vector<double>{1.0, -1.0, 1.0, -1.0});
}

namespace {

// One state, one input; the model is an arbitrary fixed network and the
// tests only rely on properties that hold for any model.
struct Fixture {
  NetworkTopology topo;
  ModelSnapshot model;
  Fixture() : topo(make_topo()), model(init_random(topo, 99)) {}
  static NetworkTopology make_topo() {
    NetworkTopology t;
    t.state_dim = 2;
    t.input_dim = 1;
    t.aux_dim = 0;
    return t;
  }

  ControlProblem problem(int horizon, double bound, std::vector<double> offsets) const {
    ControlProblem p;
    p.model = &model;
    p.x0 = {0.2, -0.1};
    p.horizon = horizon;
    p.u_min = {-1.0};
    p.u_max = {1.0};
    p.offsets = std::move(offsets);
    p.bound = bound;
    p.constraint = [](std::span<const double> x, std::span<const double>) { return x[0]; };
    p.cost = [](const TrajectoryView& v) {
      double c = 0.0;
      for (std::size_t k = 0; k < v.horizon; ++k) {
        const double u = v.input(k)[0];
        c += (u - 0.3) * (u - 0.3) + 0.1 * v.state(k)[1];
      }
      return c;
    };
    return p;
  }
};

ESConfig es(std::size_t lambda, std::uint64_t seed, double scale = 0.2) {
  ESConfig c;
  c.lambda = lambda;
  c.mutation_scale = {scale};
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("solve: elitism on an unconstrained problem") {
  Fixture f;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto p = f.problem(3, 1e9, {0.0, 0.0, 0.0});
    Rng rng(seed);
    std::vector<double> warm(3);
    for (auto& u : warm) u = rng.uniform(-1.0, 1.0);
    const auto parent = evaluate_candidate(p, warm, 0);
    const auto best = solve(p, es(30, seed), warm);
    CHECK(best.feasible);
    CHECK(best.cost <= parent.cost);
  }
}

TEST_CASE("solve: inputs stay inside the box") {
  Fixture f;
  const auto p = f.problem(4, 1e9, std::vector<double>(4, 0.0));
  const auto best = solve(p, es(200, 3, 5.0), std::vector<double>(4, 0.9));
  for (double u : best.inputs) {
    CHECK(u >= -1.0);
    CHECK(u <= 1.0);
  }
}

TEST_CASE("solve: all infeasible returns the least total violation of a 50-mutant run") {
  Fixture f;
  const auto p = f.problem(3, -100.0, {0.0, 0.1, 0.2});
  const std::vector<double> warm{0.0, 0.5, -0.5};
  const auto cfg = es(50, 8);
  const auto best = solve(p, cfg, warm);
  CHECK_FALSE(best.feasible);

  // Regenerate the documented mutant stream and scan it.
  Rng rng(cfg.seed);
  std::vector<Candidate> all{evaluate_candidate(p, warm, 0)};
  for (std::size_t m = 0; m < cfg.lambda; ++m) {
    std::vector<double> u(3);
    for (std::size_t i = 0; i < 3; ++i) u[i] = std::clamp(warm[i] + cfg.mutation_scale[0] * rng.normal(), -1.0, 1.0);
    all.push_back(evaluate_candidate(p, u, m + 1));
  }
  double least = all[0].total_violation;
  for (const auto& c : all) {
    CHECK_FALSE(c.feasible);
    least = std::min(least, c.total_violation);
  }
  CHECK(best.total_violation == least);
  const auto it = std::find_if(all.begin(), all.end(), [&](const Candidate& c) { return c.total_violation == least; });
  CHECK(best.index == it->index);
  CHECK(best.inputs == it->inputs);
}

TEST_CASE("solve: larger offsets never lower the optimal cost") {
  Fixture f;
  const std::vector<double> warm{0.0, 0.0, 0.0};
  // A bound that cuts through the reachable range of x0 predictions.
  const auto free = f.problem(3, 1e9, {0.0, 0.0, 0.0});
  std::vector<double> g;
  for (const auto& c : {evaluate_candidate(free, warm), evaluate_candidate(free, std::vector<double>{1, 1, 1}),
                        evaluate_candidate(free, std::vector<double>{-1, -1, -1})})
    g.insert(g.end(), c.constraint.begin(), c.constraint.end());
  const double bound = *std::max_element(g.begin(), g.end());
  double prev = -1e300;
  for (double r : {0.0, 0.001, 0.003, 0.01, 0.03}) {
    const auto best = solve(f.problem(3, bound, {r, r, r}), es(400, 21), warm);
    if (!best.feasible) break;
    CHECK(best.cost >= prev);
    prev = best.cost;
  }
}

TEST_CASE("solve: accepted candidates satisfy g + r <= c at every depth") {
  Fixture f;
  const auto free = f.problem(4, 1e9, std::vector<double>(4, 0.0));
  const auto ref = evaluate_candidate(free, std::vector<double>(4, 0.0));
  const double bound = ref.constraint[0] + 0.02;
  const std::vector<double> r{0.0, 0.005, 0.01, 0.015};
  const auto p = f.problem(4, bound, r);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto best = solve(p, es(300, seed), std::vector<double>(4, 0.0));
    if (!best.feasible) continue;
    const auto again = evaluate_candidate(p, best.inputs);
    for (std::size_t d = 0; d < 4; ++d) CHECK(again.constraint[d] + r[d] <= bound);
  }
}

TEST_CASE("solve: thread count does not change the result") {
  Fixture f;
  const auto p = f.problem(5, 0.3, std::vector<double>(5, 0.01));
  const std::vector<double> warm(5, 0.1);
  auto one = es(1000, 5);
  auto four = one;
  four.threads = 4;
  const auto a = solve(p, one, warm);
  const auto b = solve(p, four, warm);
  CHECK(a.inputs == b.inputs);
  CHECK(a.index == b.index);
  CHECK(a.cost == b.cost);
}

TEST_CASE("solve: bad configuration is rejected") {
  Fixture f;
  const auto p = f.problem(2, 1.0, {0.0, 0.0});
  CHECK_THROWS(solve(p, es(0, 1), std::vector<double>(2, 0.0)));
  CHECK_THROWS(solve(p, es(10, 1, 0.0), std::vector<double>(2, 0.0)));
  CHECK_THROWS(solve(p, es(10, 1), std::vector<double>(3, 0.0)));
  auto q = p;
  q.offsets = {0.0, -0.1};
  CHECK_THROWS(solve(q, es(10, 1), std::vector<double>(2, 0.0)));
}

namespace {

std::vector<std::optional<EmpiricalResidualSet>> sets_of(std::vector<std::vector<double>> per_depth) {
  std::vector<std::optional<EmpiricalResidualSet>> out;
  for (std::size_t d = 0; d < per_depth.size(); ++d) {
    if (per_depth[d].empty()) out.emplace_back(std::nullopt);
    else out.emplace_back(EmpiricalResidualSet(static_cast<int>(d + 1), per_depth[d]));
  }
  return out;
}

}  // namespace

TEST_CASE("offsets: all-zero residuals give zero offsets") {
  const auto sets = sets_of({{0, 0, 0}, {0, 0}, {0}});
  const auto a = assemble_offsets(sets, 3, {0.025, 0.95}, 3.6, 3.0);
  CHECK(a.per_depth == std::vector<double>{0.0, 0.0, 0.0});
  CHECK_FALSE(a.data_gap);
  CHECK(a.warnings.empty());
}

TEST_CASE("offsets: zero radius on 200 samples is the counting quantile") {
  std::vector<double> s(200);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = 0.01 * static_cast<double>((i * 37) % 200);
  const auto a = assemble_offsets(sets_of({s}), 1, {0.025, 0.0}, 10.0, 0.0);
  // Smallest sample with at most 0.025 * 200 = 5 samples above it.
  std::vector<double> sorted = s;
  std::sort(sorted.begin(), sorted.end());
  double want = 0.0;
  for (double q : sorted) {
    if (std::count_if(s.begin(), s.end(), [&](double v) { return v > q; }) <= 5) {
      want = q;
      break;
    }
  }
  CHECK(a.per_depth[0] == doctest::Approx(want).epsilon(1e-8));
  CHECK(a.radii[0].epsilon == 0.0);
}

TEST_CASE("offsets: each depth uses its own C and l") {
  const auto sets = sets_of({{-0.01, 0.0, 0.01, 0.02}, {-0.1, 0.0, 0.1, 0.2, 0.3, 0.05}});
  const auto a = assemble_offsets(sets, 2, {0.1, 0.95}, 100.0, -100.0);
  REQUIRE(a.radii.size() == 2);
  CHECK(a.radii[0].ell == 4);
  CHECK(a.radii[1].ell == 6);
  CHECK(a.radii[0].C == doctest::Approx(estimate_C(sets[0]->samples())));
  CHECK(a.radii[1].C == doctest::Approx(estimate_C(sets[1]->samples())));
  CHECK(a.per_depth[1] > a.per_depth[0]);
}

TEST_CASE("offsets: unattainable offsets are clamped to c - g_min with a warning") {
  const auto sets = sets_of({{0.5, 0.9, 1.2}});
  const auto a = assemble_offsets(sets, 1, {0.025, 0.95}, 3.6, 3.0);
  CHECK(a.per_depth[0] == doctest::Approx(0.6));
  CHECK(a.warnings.size() == 1);
}

TEST_CASE("offsets: missing depth data is reported as a gap") {
  const auto sets = sets_of({{0.1, 0.2}, {}, {0.3}});
  const auto a = assemble_offsets(sets, 3, {0.1, 0.95}, 1.0, 0.0);
  REQUIRE(a.data_gap);
  CHECK(*a.data_gap == 2);
}

TEST_CASE("offsets: one-step mode reuses depth 1 everywhere") {
  const auto sets = sets_of({{0.01, 0.02, -0.01, 0.0}});
  const auto a = assemble_offsets(sets, 4, {0.1, 0.95}, 1.0, 0.0, DepthMode::one_step);
  REQUIRE(a.per_depth.size() == 4);
  for (double r : a.per_depth) CHECK(r == a.per_depth[0]);
  CHECK_FALSE(a.data_gap);
}
