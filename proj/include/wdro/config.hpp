#pragma once

// Experiment configuration: a typed schema over a flat-sectioned text file
//
//   # comment
//   [battery]
//   eta = 0.025
//
// Every key is addressed as section.name (the same spelling `--set` uses).
// Unknown keys and ill-typed values raise ConfigError naming the key.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "wdro/dro.hpp"
#include "wdro/model.hpp"
#include "wdro/mpc.hpp"
#include "wdro/plants.hpp"

namespace wdro {

enum class Study { battery, vehicle };

std::string to_string(Study s);
std::string to_string(DepthMode m);

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::runtime_error(key + ": " + what), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

struct BatteryStudyConfig {
  BatteryParams params;
  double soc0 = 0.2;
  double v_rc1_0 = 0.0;
  double v_rc2_0 = 0.0;
  double soc_target = 0.8;
  double soc_tolerance = 1e-4;  // SOC only approaches the target asymptotically
  double v_max = 3.6;
  double i_min = 0.0;
  double i_max = 40.0;
  double i_safe = 25.0;
  int steps = 500;
  double eta = 0.025;
  double beta = 0.95;
  int n_target = 8;
  double g_min = 3.0;  // lowest terminal voltage the plant can reach
  double mutation_fraction = 0.03;  // ES step, fraction of the input range
  DepthMode depth_mode = DepthMode::per_depth;
};

struct VehicleStudyConfig {
  VehicleParams params;
  VehicleState start;
  ObstacleFieldConfig field;
  std::string field_file;  // load this grid instead of generating one
  std::vector<double> u_min{-1.0, -0.75};
  std::vector<double> u_max{1.0, 0.75};
  std::vector<double> bootstrap{0.0, 0.0};
  int max_steps = 1000;
  double eta = 0.005;
  double beta = 0.95;
  int n_target = 12;
  double g_min = 0.0;  // Z is a sum of nonnegative bumps
  double mutation_fraction = 0.25;
  DepthMode depth_mode = DepthMode::one_step;
};

struct ExperimentConfig {
  Study study = Study::battery;
  bool dro_enabled = true;
  std::vector<std::uint64_t> seeds{1, 2, 3};

  std::size_t mutants = 5000;
  int es_iterations = 1;
  unsigned threads = 1;

  std::size_t hidden = 10;
  bool predict_increments = true;
  TrainConfig train;

  std::size_t residual_max_starts = 2000;
  std::size_t residual_window = 0;
  double c_drift = 0.0;

  BatteryStudyConfig battery;
  VehicleStudyConfig vehicle;

  bool timing_in_summary = false;
  bool write_plots = true;

  AmbiguityConfig ambiguity() const;
  int n_target() const;
  DepthMode depth_mode() const;
  double mutation_fraction() const;

  /// Range checks; throws ConfigError naming the first bad key.
  void validate() const;
};

/// Mutant counts and seed list used for full-size runs.
void apply_full_scale(ExperimentConfig& config);

/// "1..3", "4", "1,2,7" or a mix ("1..3,9").
std::vector<std::uint64_t> parse_seed_list(std::string_view text);

void apply_override(ExperimentConfig& config, std::string_view key, std::string_view value);

/// "key=value" as given on the command line.
void apply_assignment(ExperimentConfig& config, std::string_view assignment);

void apply_text(ExperimentConfig& config, std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base = {});

/// Every key with its current value, grouped by section; feeding the text
/// back through apply_text reproduces the configuration exactly.
std::string to_text(const ExperimentConfig& config);

std::vector<std::string> config_keys();

}  // namespace wdro
