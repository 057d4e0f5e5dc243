#pragma once

// CSV logs, summary tables and SVG plots. All writers are pure functions of
// their inputs so identical runs give byte-identical files.

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "wdro/config.hpp"
#include "wdro/harness.hpp"

namespace wdro {

/// t, state..., inputs..., constraint_value, offset_depth1..offset_depth<max_horizon>,
/// horizon, feasible_flag, violation_flag, violation_magnitude, solve_ms
std::string run_csv(const RunLog& log, int max_horizon);

inline const std::vector<std::string> kSummaryColumns = {
    "run", "violation_pct", "max_constraint", "mean_iter_time_s", "completion_metric"};

/// One row per seed plus an "averages" row. Wall-clock columns are left
/// blank unless include_timing is set, keeping the file reproducible.
std::string summary_csv(const BatchResult& batch, bool include_timing);

/// run, steps, mean_iter_time_s, mean_solve_ms
std::string timing_csv(const BatchResult& batch);

/// Battery: voltage (with the limit), SOC and current against time.
/// Vehicle: trajectory over the obstacle boundary contour.
std::string run_svg(const RunLog& log);

/// Boundary segments of {Z > cutoff} by marching squares, in metres:
/// x0 y0 x1 y1 per segment.
std::vector<std::array<double, 4>> obstacle_contour(const ObstacleField& field);

std::string run_basename(const RunLog& log);

/// Writes text, throwing std::runtime_error naming the path on failure.
void write_text_file(const std::filesystem::path& path, const std::string& content);

/// Per-run CSV (+ SVG when enabled, + warnings if any), summary.csv,
/// timing.csv and effective_config.ini. Returns the files written.
std::vector<std::filesystem::path> export_batch(const BatchResult& batch,
                                                const ExperimentConfig& config,
                                                const std::filesystem::path& out_dir);

}  // namespace wdro
