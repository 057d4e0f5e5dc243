#pragma once

// Wasserstein distributionally robust constraint tightening for scalar
// constraint residuals.
//
// A residual R_d is the constraint-space error of a d-step model prediction.
// For each depth we hold the empirical distribution of R_d, inflate it to a
// type-1 Wasserstein ball of radius epsilon, and find the smallest offset r
// such that every distribution in the ball has P[R_d > r] <= eta. The
// learned-model constraint g + r <= c then holds with probability 1 - eta
// for any residual distribution in the ball.

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace wdro {

struct ResidualSample {
  int depth = 1;
  double value = 0.0;
};

/// Frozen, sorted residual samples for one prediction depth.
class EmpiricalResidualSet {
 public:
  /// Throws std::invalid_argument on non-finite values ("invalid residual")
  /// or depth < 1. An empty set is allowed but cannot produce an offset.
  EmpiricalResidualSet(int depth, std::vector<double> samples);

  int depth() const { return depth_; }
  std::size_t count() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  std::span<const double> samples() const { return samples_; }
  double max() const { return samples_.back(); }

 private:
  int depth_;
  std::vector<double> samples_;
};

/// Groups samples by depth. Entry i holds depth i+1; depths with no samples
/// are std::nullopt (the caller treats that as a data gap).
std::vector<std::optional<EmpiricalResidualSet>> group_by_depth(
    std::span<const ResidualSample> samples, int max_depth);

struct AmbiguityConfig {
  double eta = 0.025;  // allowed violation probability
  double beta = 0.95;  // confidence that the true law lies in the ball

  void validate() const;
};

struct WassersteinRadius {
  double C = 0.0;
  std::size_t ell = 0;
  double epsilon = 0.0;
};

/// Concentration constant of the radius formula:
///   C = 2 inf_{a>0} sqrt( (1/(2a)) (1 + ln((1/l) sum_k exp(a |x_k - mean|^2))) )
/// The search over a runs on a 200-point log grid over [1e-6, 1e6] followed by
/// golden-section refinement. Samples are first divided by their largest
/// absolute deviation s, and the result multiplied by s; C is positively
/// homogeneous of degree one, so this is exact and keeps the grid meaningful
/// for residuals in millivolts as well as metres.
double estimate_C(std::span<const double> samples);

/// epsilon = C sqrt((2/ell) ln(1/(1-beta))).
WassersteinRadius wasserstein_radius(double C, std::size_t ell, double beta);

/// Convenience: C and the radius from one residual set.
WassersteinRadius radius_for(const EmpiricalResidualSet& set, double beta);

/// sup over laws Q with W1(Q, P_hat) <= epsilon of Q[R > r], where P_hat is
/// the empirical law of `sorted_samples` (ascending).
///
/// Exact for scalars: samples already above r count directly; the adversary
/// then spends its budget moving the cheapest remaining samples (largest
/// values, cost r - v per unit mass) just past r, splitting the last one.
double worst_case_violation_prob(std::span<const double> sorted_samples, double r,
                                 double epsilon);

/// Smallest r >= 0 with worst_case_violation_prob(samples, r, eps) <= eta,
/// found by bisection to 1e-9 absolute. Throws std::domain_error for eta = 0
/// with a positive radius (no finite offset exists).
double compute_offset(const EmpiricalResidualSet& set, const WassersteinRadius& radius,
                      double eta);

/// Empirical upper quantile: the smallest sample q with #{x > q} <= eta*l.
double empirical_upper_quantile(std::span<const double> sorted_samples, double eta);

/// Closed-form upper bound on compute_offset:
///   min over k < eta*l of  x_(l-k) + epsilon / (eta - k/l)
/// where x_(l-k) is the (k+1)-th largest sample. Tolerating k empirical
/// exceedances leaves eta - k/l of risk for the adversary, whose every unit
/// of moved mass costs at least x_(l-k)-to-r. With epsilon = 0 it reduces to
/// the empirical (1-eta)-quantile. Clamped at 0 like compute_offset.
double conservative_offset_bound(const EmpiricalResidualSet& set,
                                 const WassersteinRadius& radius, double eta);

struct AgedResidual {
  double value = 0.0;
  int age = 1;  // k = t - j, steps since the residual was observed
};

/// r + c_drift * k * sgn(r); zero residuals are unchanged.
std::vector<double> inflate_residuals_for_drift(std::span<const AgedResidual> residuals,
                                                double c_drift);

}  // namespace wdro
