#pragma once

// Receding-horizon control on the learned model with DRO-tightened
// constraints, solved by a single-generation (1+lambda) evolution strategy.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wdro/dro.hpp"
#include "wdro/model.hpp"

namespace wdro {

/// Round half away from zero. Isolated because the increment rule depends
/// on it.
int round_half_away(double v);

/// N(t) = min{N_target, round(t / N_target) + 1}, t >= 1.
int horizon_for(int t, int n_target);

/// The known-safe first action. Returned unchanged; exists so the episode
/// loop has one place that decides what t = 1 applies.
std::vector<double> bootstrap_action(std::span<const double> configured_safe_action);

struct ESConfig {
  std::size_t lambda = 5000;
  std::vector<double> mutation_scale;  // per input dimension
  int iterations = 1;
  std::uint64_t seed = 0;
  unsigned threads = 1;

  void validate(std::size_t input_dim) const;
};

/// Predicted trajectory handed to the cost function. Row k (0-based)
/// belongs to depth k + 1.
struct TrajectoryView {
  std::span<const double> x0;
  std::span<const double> inputs;       // horizon x input_dim
  std::span<const double> next_states;  // horizon x state_dim
  std::span<const double> aux;          // horizon x aux_dim
  std::size_t horizon = 0;
  std::size_t state_dim = 0;
  std::size_t input_dim = 0;
  std::size_t aux_dim = 0;

  std::span<const double> state(std::size_t k) const {
    return next_states.subspan(k * state_dim, state_dim);
  }
  std::span<const double> output(std::size_t k) const { return aux.subspan(k * aux_dim, aux_dim); }
  std::span<const double> input(std::size_t k) const { return inputs.subspan(k * input_dim, input_dim); }
};

using CostFunction = std::function<double(const TrajectoryView&)>;

struct ControlProblem {
  const ModelSnapshot* model = nullptr;
  std::vector<double> x0;
  int horizon = 1;
  std::vector<double> u_min;
  std::vector<double> u_max;
  std::vector<double> offsets;  // r_1..r_N, >= 0
  double bound = 0.0;           // c in g + r <= c
  TransitionConstraint constraint;
  CostFunction cost;

  void validate() const;
};

struct Candidate {
  std::vector<double> inputs;       // horizon x input_dim, inside the box
  std::vector<double> next_states;  // horizon x state_dim
  std::vector<double> aux;          // horizon x aux_dim
  std::vector<double> constraint;   // g at each depth
  double cost = 0.0;
  double max_slack = 0.0;        // max_d (g_d + r_d - c)
  double total_violation = 0.0;  // sum_d max(0, g_d + r_d - c)
  bool feasible = false;
  std::size_t index = 0;  // 0 = parent, 1..lambda = mutants
};

/// Evaluates one input sequence on the learned model.
Candidate evaluate_candidate(const ControlProblem& problem, std::span<const double> inputs,
                             std::size_t index = 0);

/// Shift the previous plan left by one step, repeat its final input until
/// the horizon is filled, truncate if the horizon shrank, clip to the box.
std::vector<double> reconcile_warm_start(std::span<const double> previous, std::size_t input_dim,
                                         int horizon, std::span<const double> u_min,
                                         std::span<const double> u_max);

/// Parent plus lambda clipped Gaussian mutants. Returns the lowest-cost
/// feasible candidate, or, when none is feasible, the one with the least
/// total violation. Ties go to the lowest index, so the result does not
/// depend on the thread count. `warm_start` must already be reconciled.
Candidate solve(const ControlProblem& problem, const ESConfig& config,
                std::span<const double> warm_start);

enum class DepthMode { per_depth, one_step };

struct OffsetAssembly {
  std::vector<double> per_depth;  // r_1..r_N
  std::vector<WassersteinRadius> radii;
  std::optional<int> data_gap;  // first depth with no residual data
  std::vector<std::string> warnings;
};

/// r_d = compute_offset(set_d, radius_d, eta) with each depth's own C and l
/// (DepthMode::one_step reuses depth 1 for every depth). Offsets that would
/// push c - r below the reachable range [g_min, ...) are clamped to
/// c - g_min with a warning.
OffsetAssembly assemble_offsets(std::span<const std::optional<EmpiricalResidualSet>> sets,
                                int horizon, const AmbiguityConfig& ambiguity, double bound,
                                double g_min, DepthMode mode = DepthMode::per_depth);

}  // namespace wdro
