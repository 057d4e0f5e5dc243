#pragma once

// Episode loop (learn, schedule horizon, tighten, solve, step the truth
// plant), seeded batches and the per-run statistics.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "wdro/config.hpp"
#include "wdro/plants.hpp"
#include "wdro/studies.hpp"

namespace wdro {

struct StepRecord {
  int t = 0;
  std::vector<double> state;  // plant state after the step
  std::vector<double> input;
  double constraint_value = 0.0;  // true g: voltage V(t) / Z(x(t+1))
  std::vector<double> offsets;    // r_1..r_N in force (zeros without DRO)
  int horizon = 1;
  bool bootstrap = false;
  bool feasible = true;
  bool violation = false;
  double violation_magnitude = 0.0;
  double solve_ms = 0.0;
  double iter_ms = 0.0;
  // Predicted g at each depth for the applied plan (replay check).
  std::vector<double> predicted_constraint;
};

struct RunLog {
  Study study = Study::battery;
  std::uint64_t seed = 0;
  bool dro_enabled = true;
  double bound = 0.0;
  double soc_target = 0.8;
  double soc_tolerance = 1e-4;
  double dt = 1.0;
  std::vector<std::string> state_names;
  std::vector<std::string> input_names;
  std::vector<StepRecord> records;
  std::vector<std::string> warnings;
  int soc_clip_events = 0;
  int training_divergences = 0;
  std::string end_reason;
  std::shared_ptr<const ObstacleField> field;
};

struct RunMetrics {
  std::uint64_t seed = 0;
  int steps = 0;
  int violations = 0;
  double violation_pct = 0.0;
  double max_constraint = 0.0;  // battery: peak voltage; vehicle: deepest incursion (m)
  double mean_iter_time_s = 0.0;
  std::optional<double> charging_time_min;  // battery, when the SOC target was reached
  double max_soc = 0.0;
  bool failed = false;
  std::string error;

  /// Table cell: charging minutes, "DNF (max SOC x)", or the vehicle's step
  /// count before leaving the arena.
  std::string completion_metric(Study study) const;
};

RunLog run_episode(const ExperimentConfig& config, std::uint64_t seed);

RunMetrics compute_metrics(const RunLog& log);

struct SummaryRow {
  double violation_pct = 0.0;
  double max_constraint = 0.0;
  double mean_iter_time_s = 0.0;
  std::optional<double> completion;  // mean over runs that completed
  int completed = 0;
  int runs = 0;
};

/// Column means over successful runs, matching the tables' averages row.
SummaryRow summarize(const std::vector<RunMetrics>& metrics, Study study);

struct BatchResult {
  Study study = Study::battery;
  bool dro_enabled = true;
  std::vector<RunLog> logs;  // empty entry for failed runs
  std::vector<RunMetrics> metrics;
  SummaryRow summary;
};

/// Independent episodes per seed; a failing run is recorded and the batch
/// continues.
BatchResult run_batch(const ExperimentConfig& config);

}  // namespace wdro
