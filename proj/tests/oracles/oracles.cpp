#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "wdro/dro.hpp"
#include "wdro/model.hpp"
#include "wdro/mpc.hpp"
#include "wdro/plants.hpp"
#include "wdro/rng.hpp"

namespace wdro::oracle {

namespace {

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

double simplex_max(const std::vector<double>& A, const std::vector<double>& b,
                   const std::vector<double>& c, std::size_t m, std::size_t n) {
  constexpr double tol = 1e-12;
  const std::size_t cols = n + m + 1;  // structural, slacks, rhs
  std::vector<double> T((m + 1) * cols, 0.0);
  auto at = [&](std::size_t i, std::size_t j) -> double& { return T[i * cols + j]; };
  std::vector<std::size_t> basis(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (b[i] < 0.0) throw std::invalid_argument("simplex_max needs b >= 0");
    for (std::size_t j = 0; j < n; ++j) at(i, j) = A[i * n + j];
    at(i, n + i) = 1.0;
    at(i, cols - 1) = b[i];
    basis[i] = n + i;
  }
  for (std::size_t j = 0; j < n; ++j) at(m, j) = -c[j];

  for (int guard = 0; guard < 100000; ++guard) {
    std::size_t enter = cols;
    for (std::size_t j = 0; j + 1 < cols; ++j) {
      if (at(m, j) < -tol) {
        enter = j;
        break;
      }
    }
    if (enter == cols) return at(m, cols - 1);
    std::size_t leave = m;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < m; ++i) {
      if (at(i, enter) > tol) {
        const double ratio = at(i, cols - 1) / at(i, enter);
        if (ratio < best - tol || (std::abs(ratio - best) <= tol && basis[i] < basis[leave])) {
          best = ratio;
          leave = i;
        }
      }
    }
    if (leave == m) throw std::runtime_error("simplex_max: unbounded");
    const double piv = at(leave, enter);
    for (std::size_t j = 0; j < cols; ++j) at(leave, j) /= piv;
    for (std::size_t i = 0; i <= m; ++i) {
      if (i == leave) continue;
      const double f = at(i, enter);
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < cols; ++j) at(i, j) -= f * at(leave, j);
    }
    basis[leave] = enter;
  }
  throw std::runtime_error("simplex_max: iteration limit");
}

double lp_worst_case_violation_prob(std::span<const double> samples, double r, double eps) {
  constexpr double kPastR = 1e-10;
  const std::size_t l = samples.size();
  const std::size_t dests = l + 1;
  const std::size_t n = l * dests;
  const std::size_t m = l + 1;
  const double w = 1.0 / static_cast<double>(l);
  auto bad = [&](double v) { return v > r ? 1.0 : 0.0; };

  std::vector<double> A(m * n, 0.0), b(m, 0.0), c(n, 0.0);
  double base = 0.0;
  for (std::size_t k = 0; k < l; ++k) {
    base += w * bad(samples[k]);
    for (std::size_t j = 0; j < dests; ++j) {
      // The sup is not attained; a destination delta past r approaches it
      // and, unlike one placed exactly at r, is not free for a sample on r.
      const double dest = j == l ? r + kPastR : samples[j];
      const std::size_t v = k * dests + j;
      A[k * n + v] = 1.0;                          // mass leaving sample k
      A[l * n + v] = std::abs(samples[k] - dest);  // transport budget
      c[v] = bad(dest) - bad(samples[k]);
    }
    b[k] = w;
  }
  b[l] = eps;
  return std::min(1.0, base + simplex_max(A, b, c, m, n));
}

double dense_grid_C(std::span<const double> samples, std::size_t points) {
  const double l = static_cast<double>(samples.size());
  double mean = 0.0;
  for (double v : samples) mean += v;
  mean /= l;
  std::vector<double> d;
  for (double v : samples) d.push_back((v - mean) * (v - mean));
  const double dmax = *std::max_element(d.begin(), d.end());
  double best = std::numeric_limits<double>::infinity();
  const double lo = std::log(1e-6), hi = std::log(1e6);
  for (std::size_t i = 0; i < points; ++i) {
    const double a = std::exp(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1));
    double s = 0.0;
    for (double x : d) s += std::exp(a * (x - dmax));
    const double lse = a * dmax + std::log(s / l);
    best = std::min(best, (1.0 + lse) / (2.0 * a));
  }
  return 2.0 * std::sqrt(best);
}

std::vector<double> fd_gradient(const std::function<double(std::span<const double>)>& f,
                                std::span<const double> x, double h) {
  std::vector<double> p(x.begin(), x.end()), g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    p[i] = x[i] + h;
    const double up = f(p);
    p[i] = x[i] - h;
    const double dn = f(p);
    p[i] = x[i];
    g[i] = (up - dn) / (2.0 * h);
  }
  return g;
}

std::vector<double> fd_jacobian(
    const std::function<std::vector<double>(std::span<const double>)>& f,
    std::span<const double> x, double h) {
  std::vector<double> p(x.begin(), x.end());
  const std::size_t outs = f(p).size();
  std::vector<double> J(outs * x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    p[i] = x[i] + h;
    const auto up = f(p);
    p[i] = x[i] - h;
    const auto dn = f(p);
    p[i] = x[i];
    for (std::size_t o = 0; o < outs; ++o) J[o * x.size() + i] = (up[o] - dn[o]) / (2.0 * h);
  }
  return J;
}

double relative_error(std::span<const double> a, std::span<const double> b, double floor) {
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  return norm2(d) / std::max(norm2(b), floor);
}

// ---- checks -----------------------------------------------------------------

CheckResult check_lp_equivalence(std::uint64_t seed, int instances, int eps_points) {
  CheckResult res{"greedy adversary = LP transport oracle", true, ""};
  Rng rng(seed);
  double worst = 0.0;
  int compared = 0;
  for (int inst = 0; inst < instances; ++inst) {
    const std::size_t l = 1 + rng.below(8);
    std::vector<double> s(l);
    for (auto& v : s) {
      v = rng.uniform(-1.0, 1.0);
      if (rng.uniform() < 0.2) v = std::round(v * 4.0) / 4.0;  // ties and exact hits
    }
    std::sort(s.begin(), s.end());
    const double r = rng.uniform() < 0.2 ? s[rng.below(l)] : rng.uniform(-1.0, 1.0);
    for (int e = 0; e < eps_points; ++e) {
      const double eps = 1.2 * e / (eps_points - 1);
      const double greedy = worst_case_violation_prob(s, r, eps);
      const double lp = lp_worst_case_violation_prob(s, r, eps);
      worst = std::max(worst, std::abs(greedy - lp));
      ++compared;
    }
  }
  res.passed = worst <= 1e-6;
  res.detail = fmt("%.0f comparisons, max |greedy - LP| = %.3g", compared, worst);
  return res;
}

CheckResult check_offset_monotonicity(std::uint64_t seed, int sets) {
  CheckResult res{"offset monotone in epsilon and 1 - eta", true, ""};
  Rng rng(seed);
  int bad = 0;
  const double tol = 1e-8;  // bisection tolerance is 1e-9
  const std::vector<double> etas{0.5, 0.3, 0.2, 0.1, 0.05, 0.025, 0.01, 0.005};
  for (int k = 0; k < sets; ++k) {
    const std::size_t l = 1 + rng.below(60);
    const double scale = std::exp(rng.uniform(-5.0, 1.0));
    std::vector<double> s(l);
    for (auto& v : s) v = scale * rng.normal() + scale * rng.uniform(-1.0, 1.0);
    const EmpiricalResidualSet set(1, s);
    const double eta = etas[rng.below(etas.size())];
    double prev = -1.0;
    for (int e = 0; e <= 10; ++e) {
      const WassersteinRadius rad{0.0, l, scale * 0.05 * e};
      const double off = compute_offset(set, rad, eta);
      if (off < prev - tol) ++bad;
      prev = off;
    }
    const WassersteinRadius rad{0.0, l, scale * rng.uniform(0.0, 0.3)};
    prev = -1.0;
    for (double eta_i : etas) {
      const double off = compute_offset(set, rad, eta_i);
      if (off < prev - tol) ++bad;
      prev = off;
    }
  }
  res.passed = bad == 0;
  res.detail = fmt("%.0f sample sets, %.0f counterexamples", sets, bad);
  return res;
}

CheckResult check_conservative_bound(std::uint64_t seed, int cases) {
  CheckResult res{"quantile + eps/eta bound >= exact offset", true, ""};
  Rng rng(seed);
  int bad = 0;
  for (int k = 0; k < cases; ++k) {
    const std::size_t l = 1 + rng.below(100);
    std::vector<double> s(l);
    for (auto& v : s) v = rng.normal() * 0.1;
    const EmpiricalResidualSet set(1, s);
    const WassersteinRadius rad{0.0, l, rng.uniform(0.0, 0.05)};
    const double eta = rng.uniform(0.005, 0.5);
    if (conservative_offset_bound(set, rad, eta) < compute_offset(set, rad, eta) - 1e-8) ++bad;
  }
  res.passed = bad == 0;
  res.detail = fmt("%.0f cases, %.0f violations of the bound", cases, bad);
  return res;
}

CheckResult check_radius_formula() {
  CheckResult res{"radius formula", true, ""};
  std::string why;
  for (double C : {0.1, 1.0, 3.7}) {
    for (std::size_t l : {1u, 3u, 10u, 250u}) {
      if (wasserstein_radius(C, l, 0.0).epsilon != 0.0) why += " beta=0 gives nonzero;";
      for (double beta : {0.5, 0.95, 0.99}) {
        const double e1 = wasserstein_radius(C, l, beta).epsilon;
        const double e4 = wasserstein_radius(C, 4 * l, beta).epsilon;
        if (std::abs(e4 - 0.5 * e1) > 1e-12 * e1) why += " quadrupling l does not halve;";
        const double want = C * std::sqrt(2.0 / static_cast<double>(l) * std::log(1.0 / (1.0 - beta)));
        if (std::abs(e1 - want) > 1e-12 * want) why += " formula mismatch;";
      }
    }
  }
  if (wasserstein_radius(0.0, 10, 0.99).epsilon != 0.0) why += " C=0 gives nonzero;";
  const double e = wasserstein_radius(1.0, 2, 1.0 - std::exp(-1.0)).epsilon;
  if (std::abs(e - 1.0) > 1e-12) why += " unit example;";
  res.passed = why.empty();
  res.detail = why.empty() ? "beta=0, C=0, l -> 4l halving, closed form" : why;
  return res;
}

CheckResult check_estimate_C(std::uint64_t seed) {
  CheckResult res{"estimate_C = dense alpha grid", true, ""};
  Rng rng(seed);
  std::vector<std::vector<double>> cases{{-1.0, 1.0}, {0.3, -0.2, 0.05, 0.4, 0.41}};
  std::vector<double> normal(100);
  for (auto& v : normal) v = rng.normal();
  cases.push_back(normal);
  double worst = 0.0;
  for (const auto& s : cases) {
    const double got = estimate_C(s);
    const double want = dense_grid_C(s);
    worst = std::max(worst, std::abs(got - want) / want);
  }
  const double zero = estimate_C(std::vector<double>{0.0, 0.0, 0.0});
  res.passed = worst <= 1e-4 && zero <= 1e-6;
  res.detail = fmt("max rel error %.3g over 3 sets; constant set gives %.3g", worst, zero);
  return res;
}

namespace {

NetworkTopology random_topology(Rng& rng) {
  NetworkTopology t;
  t.state_dim = 1 + rng.below(4);
  t.input_dim = 1 + rng.below(2);
  t.aux_dim = rng.below(2);
  t.hidden = 1 + rng.below(10);
  return t;
}

std::vector<double> random_vector(Rng& rng, std::size_t n, double scale) {
  std::vector<double> v(n);
  for (auto& x : v) x = scale * rng.normal();
  return v;
}

}  // namespace

CheckResult check_gradients(std::uint64_t seed, int cases) {
  CheckResult res{"loss gradient = central differences", true, ""};
  Rng rng(seed);
  double worst = 0.0;
  for (int k = 0; k < cases; ++k) {
    const auto topo = random_topology(rng);
    NormalizedBatch batch;
    batch.rows = 1 + rng.below(6);
    batch.n_in = topo.n_in();
    batch.n_out = topo.n_out();
    batch.inputs = random_vector(rng, batch.rows * batch.n_in, 1.0);
    batch.targets = random_vector(rng, batch.rows * batch.n_out, 1.0);
    const auto theta = random_vector(rng, topo.param_count(), 0.7);
    const auto g = batch_gradient(topo, theta, batch);
    const auto fd = fd_gradient(
        [&](std::span<const double> th) { return batch_loss(topo, th, batch); }, theta);
    worst = std::max(worst, relative_error(g, fd, 1e-6));
  }
  res.passed = worst <= 1e-5;
  res.detail = fmt("%.0f random cases, max relative error %.3g", cases, worst);
  return res;
}

CheckResult check_jacobian(std::uint64_t seed, int cases) {
  CheckResult res{"weight Jacobian = central differences", true, ""};
  Rng rng(seed);
  double worst = 0.0;
  for (int k = 0; k < cases; ++k) {
    const auto topo = random_topology(rng);
    const auto input = random_vector(rng, topo.n_in(), 1.0);
    const auto theta = random_vector(rng, topo.param_count(), 0.7);
    const auto J = weight_jacobian(topo, theta, input);
    const auto fd = fd_jacobian(
        [&](std::span<const double> th) {
          const ModelSnapshot snap(topo, {th.begin(), th.end()}, Normalizer::identity(topo));
          std::vector<double> out(topo.n_out());
          snap.forward_normalized(input, out);
          return out;
        },
        theta);
    worst = std::max(worst, relative_error(J, fd, 1e-6));
  }
  res.passed = worst <= 1e-5;
  res.detail = fmt("%.0f random cases, max relative error %.3g", cases, worst);
  return res;
}

CheckResult check_battery_identities() {
  CheckResult res{"battery SOC telescoping and RC decay", true, ""};
  const BatteryParams p;
  const auto ocv = p.ocv();
  double soc_err = 0.0;
  for (double I : {0.0, 5.0, 25.0, 40.0}) {
    BatteryState s;
    s.soc = 0.2;
    const int T = 100;
    for (int k = 0; k < T; ++k) s = battery_step(s, I, p, ocv).next;
    soc_err = std::max(soc_err, std::abs(s.soc - (0.2 + I * T * p.dt / p.Q)));
  }
  double rc_err = 0.0;
  BatteryState s;
  s.soc = 0.5;
  s.v_rc1 = 0.05;
  s.v_rc2 = -0.03;
  const double q1 = 1.0 - p.dt / (p.R1 * p.C1);
  const double q2 = 1.0 - p.dt / (p.R2 * p.C2);
  for (int k = 1; k <= 200; ++k) {
    s = battery_step(s, 0.0, p, ocv).next;
    const double e1 = 0.05 * std::pow(q1, k);
    const double e2 = -0.03 * std::pow(q2, k);
    rc_err = std::max(rc_err, std::abs(s.v_rc1 - e1) / std::abs(e1));
    rc_err = std::max(rc_err, std::abs(s.v_rc2 - e2) / std::abs(e2));
  }
  res.passed = soc_err <= 1e-12 && rc_err <= 1e-12;
  res.detail = fmt("SOC abs error %.3g, RC relative error %.3g", soc_err, rc_err);
  return res;
}

CheckResult check_horizon_rule(int t_max) {
  CheckResult res{"horizon rule = closed form", true, ""};
  int bad = 0, checked = 0;
  for (int nt = 1; nt <= 16; ++nt) {
    for (int t = 1; t <= std::max(t_max, 10 * nt); ++t) {
      // round(t/nt) for positive halves up: floor((2t + nt) / (2 nt)).
      const int want = std::min(nt, (2 * t + nt) / (2 * nt) + 1);
      if (horizon_for(t, nt) != want) ++bad;
      ++checked;
    }
  }
  res.passed = bad == 0;
  res.detail = fmt("%.0f (t, N_target) pairs, %.0f mismatches", checked, bad);
  return res;
}

CheckResult check_drift_inflation() {
  CheckResult res{"drift inflation r + C k sgn(r)", true, ""};
  std::vector<AgedResidual> in;
  std::vector<double> want;
  for (double r : {-0.3, -1e-3, -0.0, 0.0, 1e-3, 0.25, 7.5}) {
    for (int k : {1, 2, 5, 40}) {
      for (double c : {0.0, 0.01, 0.5}) {
        in.push_back({r, k});
        const double sgn = r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
        want.push_back(r + c * k * sgn);
      }
    }
  }
  int bad = 0;
  std::size_t i = 0;
  for (std::size_t base = 0; base < in.size(); base += 3) {
    for (int ci = 0; ci < 3; ++ci) {
      const double c = ci == 0 ? 0.0 : (ci == 1 ? 0.01 : 0.5);
      const auto got = inflate_residuals_for_drift(std::span(in).subspan(base + ci, 1), c);
      if (got[0] != want[i]) ++bad;
      ++i;
    }
  }
  res.passed = bad == 0;
  res.detail = fmt("%.0f grid points over both signs and zero, %.0f mismatches",
                   static_cast<double>(want.size()), bad);
  return res;
}

std::vector<CheckResult> run_verify_suite(std::uint64_t seed) {
  return {check_lp_equivalence(seed),
          check_offset_monotonicity(seed + 1),
          check_conservative_bound(seed + 2),
          check_radius_formula(),
          check_estimate_C(seed + 3),
          check_gradients(seed + 4),
          check_jacobian(seed + 5),
          check_battery_identities(),
          check_horizon_rule(),
          check_drift_inflation()};
}

}  // namespace wdro::oracle
