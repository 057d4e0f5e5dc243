#include "wdro/dro.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace wdro {

namespace {

constexpr double kAlphaMin = 1e-6;
constexpr double kAlphaMax = 1e6;
constexpr int kAlphaGrid = 200;
constexpr double kGoldenRelTol = 1e-8;
constexpr double kOffsetTol = 1e-9;
// Slack when comparing a count-derived probability against eta, so that
// 5/200 <= 0.025 holds despite rounding.
constexpr double kProbSlack = 1e-12;

// (1 + ln(mean_k exp(a d_k^2))) / (2a), evaluated with a log-sum-exp shift.
double c_objective(double alpha, std::span<const double> sq_dev, double max_sq) {
  const double shift = alpha * max_sq;
  double acc = 0.0;
  for (double d2 : sq_dev) acc += std::exp(alpha * d2 - shift);
  const double log_mean = shift + std::log(acc / static_cast<double>(sq_dev.size()));
  return (1.0 + log_mean) / (2.0 * alpha);
}

// Largest number of samples that may sit above r when the risk budget is
// eta, i.e. floor(eta*l) with rounding slack.
std::size_t tolerated_exceedances(double eta, std::size_t ell) {
  return static_cast<std::size_t>(std::floor(eta * static_cast<double>(ell) + 1e-9));
}

}  // namespace

EmpiricalResidualSet::EmpiricalResidualSet(int depth, std::vector<double> samples)
    : depth_(depth), samples_(std::move(samples)) {
  if (depth_ < 1) throw std::invalid_argument("residual depth must be >= 1");
  for (double v : samples_) {
    if (!std::isfinite(v)) throw std::invalid_argument("invalid residual");
  }
  std::sort(samples_.begin(), samples_.end());
}

std::vector<std::optional<EmpiricalResidualSet>> group_by_depth(
    std::span<const ResidualSample> samples, int max_depth) {
  std::vector<std::vector<double>> buckets(static_cast<std::size_t>(std::max(max_depth, 0)));
  for (const auto& s : samples) {
    if (s.depth >= 1 && s.depth <= max_depth) {
      buckets[static_cast<std::size_t>(s.depth - 1)].push_back(s.value);
    }
  }
  std::vector<std::optional<EmpiricalResidualSet>> out(buckets.size());
  for (std::size_t i = 0; i < buckets.size(); ++i) {
    if (!buckets[i].empty()) out[i].emplace(static_cast<int>(i + 1), std::move(buckets[i]));
  }
  return out;
}

void AmbiguityConfig::validate() const {
  if (!(eta >= 0.0 && eta < 1.0)) throw std::invalid_argument("eta must lie in [0, 1)");
  if (!(beta >= 0.0 && beta < 1.0)) throw std::invalid_argument("beta must lie in [0, 1)");
}

double estimate_C(std::span<const double> samples) {
  if (samples.empty()) throw std::invalid_argument("estimate_C needs at least one sample");
  for (double v : samples) {
    if (!std::isfinite(v)) throw std::invalid_argument("invalid residual");
  }
  const double n = static_cast<double>(samples.size());
  const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / n;

  double scale = 0.0;
  for (double v : samples) scale = std::max(scale, std::abs(v - mean));
  // All samples identical: the objective tends to 0 as alpha grows.
  if (scale == 0.0) return 0.0;

  std::vector<double> sq_dev(samples.size());
  double max_sq = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double d = (samples[i] - mean) / scale;  // ||.||_1 of a scalar
    sq_dev[i] = d * d;
    max_sq = std::max(max_sq, sq_dev[i]);
  }

  // Coarse log grid.
  const double log_lo = std::log(kAlphaMin);
  const double log_hi = std::log(kAlphaMax);
  const double step = (log_hi - log_lo) / (kAlphaGrid - 1);
  int best = 0;
  double best_val = std::numeric_limits<double>::infinity();
  for (int i = 0; i < kAlphaGrid; ++i) {
    const double val = c_objective(std::exp(log_lo + step * i), sq_dev, max_sq);
    if (val < best_val) {
      best_val = val;
      best = i;
    }
  }

  // Golden-section in log(alpha) on the bracketing grid cells.
  double a = log_lo + step * std::max(best - 1, 0);
  double b = log_lo + step * std::min(best + 1, kAlphaGrid - 1);
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = b - inv_phi * (b - a);
  double x2 = a + inv_phi * (b - a);
  double f1 = c_objective(std::exp(x1), sq_dev, max_sq);
  double f2 = c_objective(std::exp(x2), sq_dev, max_sq);
  while (std::exp(b - a) - 1.0 > kGoldenRelTol) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = c_objective(std::exp(x1), sq_dev, max_sq);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = c_objective(std::exp(x2), sq_dev, max_sq);
    }
  }
  best_val = std::min({best_val, f1, f2});
  return 2.0 * std::sqrt(std::max(best_val, 0.0)) * scale;
}

WassersteinRadius wasserstein_radius(double C, std::size_t ell, double beta) {
  if (!(beta < 1.0)) throw std::invalid_argument("beta must be < 1 (radius undefined)");
  if (!(beta >= 0.0)) throw std::invalid_argument("beta must be >= 0");
  if (!(C >= 0.0)) throw std::invalid_argument("C must be >= 0");
  if (ell < 1) throw std::invalid_argument("radius needs at least one sample");
  const double log_term = std::log(1.0 / (1.0 - beta));
  return {C, ell, C * std::sqrt(2.0 / static_cast<double>(ell) * log_term)};
}

WassersteinRadius radius_for(const EmpiricalResidualSet& set, double beta) {
  return wasserstein_radius(estimate_C(set.samples()), set.count(), beta);
}

double worst_case_violation_prob(std::span<const double> sorted_samples, double r,
                                 double epsilon) {
  if (sorted_samples.empty()) throw std::invalid_argument("no residual samples");
  if (!(epsilon >= 0.0)) throw std::invalid_argument("epsilon must be >= 0");
  const std::size_t ell = sorted_samples.size();
  const auto first_above = std::upper_bound(sorted_samples.begin(), sorted_samples.end(), r);
  const auto below = static_cast<std::size_t>(first_above - sorted_samples.begin());
  double moved = static_cast<double>(ell - below);
  if (epsilon == 0.0) return moved / static_cast<double>(ell);

  // Budget in units of "whole samples times distance": moving one sample of
  // mass 1/l a distance c costs c/l of the radius.
  double budget = epsilon * static_cast<double>(ell);
  for (std::size_t i = below; i-- > 0;) {
    const double cost = r - sorted_samples[i];
    if (cost <= budget) {
      moved += 1.0;
      budget -= cost;
    } else {
      moved += budget / cost;
      break;
    }
  }
  return std::min(1.0, moved / static_cast<double>(ell));
}

double compute_offset(const EmpiricalResidualSet& set, const WassersteinRadius& radius,
                      double eta) {
  if (set.empty()) throw std::invalid_argument("offset needs at least one residual");
  if (!(eta >= 0.0 && eta < 1.0)) throw std::invalid_argument("eta must lie in [0, 1)");
  const double eps = radius.epsilon;
  if (!(eps >= 0.0)) throw std::invalid_argument("epsilon must be >= 0");
  if (eta == 0.0 && eps > 0.0) {
    throw std::domain_error("robust constraint unsatisfiable with unbounded support assumption");
  }
  const auto samples = set.samples();
  const auto ok = [&](double r) {
    return worst_case_violation_prob(samples, r, eps) <= eta + kProbSlack;
  };
  if (ok(0.0)) return 0.0;

  // At hi every sample is at or below max and each unit of moved mass costs
  // at least eps/eta, so the adversary reaches at most eta.
  double lo = 0.0;
  double hi = std::max(set.max(), 0.0) + (eps > 0.0 ? eps / eta : 0.0);
  if (!ok(hi)) hi = std::nextafter(hi, std::numeric_limits<double>::infinity());
  while (hi - lo > kOffsetTol) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (ok(mid) ? hi : lo) = mid;
  }
  return hi;
}

double empirical_upper_quantile(std::span<const double> sorted_samples, double eta) {
  if (sorted_samples.empty()) throw std::invalid_argument("no residual samples");
  const std::size_t ell = sorted_samples.size();
  const std::size_t k = std::min(tolerated_exceedances(eta, ell), ell - 1);
  return sorted_samples[ell - 1 - k];
}

double conservative_offset_bound(const EmpiricalResidualSet& set,
                                 const WassersteinRadius& radius, double eta) {
  if (set.empty()) throw std::invalid_argument("offset needs at least one residual");
  if (!(eta > 0.0 && eta < 1.0)) throw std::invalid_argument("bound requires eta in (0, 1)");
  const auto s = set.samples();
  const double eps = radius.epsilon;
  if (eps == 0.0) return std::max(0.0, empirical_upper_quantile(s, eta));

  const std::size_t ell = s.size();
  const double l = static_cast<double>(ell);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < ell; ++k) {
    const double residual_risk = eta - static_cast<double>(k) / l;
    if (residual_risk <= 1e-12) break;
    best = std::min(best, s[ell - 1 - k] + eps / residual_risk);
  }
  return std::max(0.0, best);
}

std::vector<double> inflate_residuals_for_drift(std::span<const AgedResidual> residuals,
                                                double c_drift) {
  std::vector<double> out;
  out.reserve(residuals.size());
  for (const auto& r : residuals) {
    const double sgn = (r.value > 0.0) - (r.value < 0.0);
    out.push_back(r.value + c_drift * static_cast<double>(r.age) * sgn);
  }
  return out;
}

}  // namespace wdro
