#pragma once

// The two case studies: what the controller knows (input box, constraint on
// model predictions, cost, safe first action) and the truth plant it drives.

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wdro/config.hpp"
#include "wdro/model.hpp"
#include "wdro/mpc.hpp"
#include "wdro/plants.hpp"

namespace wdro {

struct StudyDefinition {
  Study study = Study::battery;
  NetworkTopology topology;
  std::vector<double> u_min, u_max;
  std::vector<double> bootstrap;
  std::vector<double> mutation_scale;
  double bound = 0.0;  // c in g <= c
  double g_min = 0.0;
  TransitionConstraint constraint;  // evaluated on (predicted or true) transitions
  CostFunction cost;
  int n_target = 1;
  AmbiguityConfig ambiguity;
  DepthMode depth_mode = DepthMode::per_depth;
  std::vector<std::string> state_names;
  std::vector<std::string> input_names;
  std::shared_ptr<const ObstacleField> field;  // vehicle only
};

struct StepOutcome {
  Transition transition;
  double constraint_value = 0.0;  // true g of this step
  bool violation = false;
  double violation_magnitude = 0.0;  // volts above the limit / metres inside an obstacle
  bool soc_clipped = false;
};

/// Truth plant stepped by the episode loop.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual std::vector<double> state() const = 0;
  /// nullopt when the step ends the episode without a record (the vehicle
  /// left the arena).
  virtual std::optional<StepOutcome> step(std::span<const double> u, int t) = 0;
  virtual int step_limit() const = 0;
};

/// The vehicle field is generated from derive_seed(seed, kFieldTag) unless
/// the config names a field file; paired DRO/baseline runs share it.
StudyDefinition make_study(const ExperimentConfig& config, std::uint64_t seed);

std::unique_ptr<Environment> make_environment(const ExperimentConfig& config,
                                              const StudyDefinition& study);

inline constexpr std::uint64_t kFieldTag = 0xF1E1D;

}  // namespace wdro
