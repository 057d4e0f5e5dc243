#pragma once

// Ground-truth simulators stepped with the true parameters. The controller
// never sees these equations; it only observes the transitions they produce.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

namespace wdro {

// ---- battery: SOC integrator + two RC pairs + series resistance ----------

/// Open-circuit voltage tabulated on a uniform SOC grid, linearly
/// interpolated, forced nondecreasing.
class OcvCurve {
 public:
  static constexpr int kGridPoints = 201;

  /// LFP-like plateau with knees at both ends:
  ///   base + slope*s - 0.1 exp(-35 s) + 0.1 exp(25 (s - 1))
  static OcvCurve synthetic(double base, double slope);

  explicit OcvCurve(std::vector<double> table);

  /// SOC is clamped to [0, 1] before lookup.
  double operator()(double soc) const;
  const std::vector<double>& table() const { return table_; }

 private:
  std::vector<double> table_;
};

struct BatteryParams {
  double Q = 8280.0;  // charge divisor of the SOC update (A*s per unit SOC)
  double R0 = 0.01;
  double R1 = 0.01;
  double R2 = 0.02;
  double C1 = 2500.0;
  double C2 = 70000.0;
  double dt = 1.0;
  double ocv_base = 3.2;
  double ocv_slope = 0.15;

  OcvCurve ocv() const { return OcvCurve::synthetic(ocv_base, ocv_slope); }
  void validate() const;
};

struct BatteryState {
  double soc = 0.2;
  double v_rc1 = 0.0;
  double v_rc2 = 0.0;
};

struct BatteryStepResult {
  BatteryState next;
  double voltage = 0.0;  // terminal voltage at the pre-update state
  bool soc_clipped = false;
};

/// Forward-Euler ECM update; the terminal voltage is evaluated at time t:
///   V = V_ocv(SOC) + V_RC1 + V_RC2 + I R0.
BatteryStepResult battery_step(const BatteryState& state, double current,
                               const BatteryParams& params, const OcvCurve& ocv);

double battery_voltage(const BatteryState& state, double current, const BatteryParams& params,
                       const OcvCurve& ocv);

// ---- vehicle: kinematic bicycle ------------------------------------------

struct VehicleParams {
  double length = 0.5;
  double dt = 0.2;
};

struct VehicleState {
  double x1 = 5.0;   // m
  double x2 = 10.0;  // m
  double x3 = 0.7853981633974483;  // heading, rad, in (-pi, pi]
  double x4 = 0.5;   // speed, m/s
};

/// u1: acceleration (m/s^2), u2: steering angle (rad).
VehicleState bicycle_step(const VehicleState& state, double u1, double u2,
                          const VehicleParams& params);

// ---- obstacle field -------------------------------------------------------

struct Gaussian {
  double cx = 0.0;
  double cy = 0.0;
  double sigma = 1.0;
  double amplitude = 1.0;
};

struct ObstacleFieldConfig {
  int n_gaussians = 12;
  double amplitude_min = 0.5;
  double amplitude_max = 1.5;
  double sigma_min = 4.0;
  double sigma_max = 12.0;
  double cutoff_quantile = 0.80;
  double extent = 100.0;
  double resolution = 0.25;
  double start_x = 5.0;
  double start_y = 10.0;
  double corridor_width = 3.0;
  int max_attempts = 100;
};

/// Sum-of-Gaussians barrier Z on a square grid; Z <= cutoff is safe.
class ObstacleField {
 public:
  ObstacleField(std::size_t nodes, double resolution, std::vector<double> values, double cutoff);

  static ObstacleField from_gaussians(const std::vector<Gaussian>& gaussians, double extent,
                                      double resolution, double cutoff_quantile);

  std::size_t nodes() const { return nodes_; }
  double resolution() const { return resolution_; }
  double extent() const { return resolution_ * static_cast<double>(nodes_ - 1); }
  double cutoff() const { return cutoff_; }
  double node(std::size_t i, std::size_t j) const { return values_[j * nodes_ + i]; }
  const std::vector<double>& values() const { return values_; }
  const std::vector<Gaussian>& gaussians() const { return gaussians_; }
  std::uint64_t seed() const { return seed_; }
  int attempts() const { return attempts_; }

  bool contains(double x, double y) const;

  /// Bilinear interpolation; nullopt outside the arena (episode end).
  std::optional<double> eval(double x, double y) const;

  /// Bilinear interpolation at the position clamped into the arena; used
  /// for model predictions that overshoot the boundary.
  double eval_clamped(double x, double y) const;

  /// Euclidean distance from an unsafe position to the nearest point of the
  /// safe set (searched over safe grid nodes, refined by bisection along the
  /// connecting segment). Zero when the position is safe.
  double violation_depth(double x, double y) const;

  /// Text grid: "width height resolution cutoff" then `height` rows of
  /// `width` values (row j = y index), %.17g.
  void write_text(const std::filesystem::path& path) const;
  static ObstacleField read_text(const std::filesystem::path& path);

 private:
  friend ObstacleField generate_obstacle_field(std::uint64_t, const ObstacleFieldConfig&);

  std::size_t nodes_;
  double resolution_;
  std::vector<double> values_;
  double cutoff_;
  std::vector<Gaussian> gaussians_;
  std::uint64_t seed_ = 0;
  int attempts_ = 0;
};

/// True when a corridor of the given width connects the start position to
/// the top or right edge of the arena through the safe set.
bool has_corridor(const ObstacleField& field, double start_x, double start_y, double width);

/// Draws Gaussians until the start is safe and a corridor exists; throws
/// std::runtime_error after config.max_attempts draws.
ObstacleField generate_obstacle_field(std::uint64_t seed, const ObstacleFieldConfig& config);

}  // namespace wdro
