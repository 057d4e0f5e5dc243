#pragma once

// Online-learned black-box dynamics: a one-hidden-layer feed-forward network
//   [x(k), u(k)] -> [x(k+1), y(k)]
// with sigmoid hidden units and a linear output layer. The optional
// auxiliary outputs y(k) carry measured quantities with direct feedthrough
// (the battery terminal voltage).

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "wdro/dro.hpp"

namespace wdro {

inline constexpr std::size_t kMaxModelDim = 16;
inline constexpr std::size_t kMaxHidden = 64;

struct NetworkTopology {
  std::size_t state_dim = 0;
  std::size_t input_dim = 0;
  std::size_t aux_dim = 0;
  std::size_t hidden = 10;
  // When set, the state outputs are increments added to x(k).
  bool predict_increments = true;
  // State components that are angles, kept in (-pi, pi].
  std::vector<std::size_t> wrapped_dims;

  std::size_t n_in() const { return state_dim + input_dim; }
  std::size_t n_out() const { return state_dim + aux_dim; }
  std::size_t param_count() const { return hidden * n_in() + hidden + n_out() * hidden + n_out(); }
  void validate() const;
  bool operator==(const NetworkTopology&) const = default;
};

/// Per-dimension affine maps: network input = (raw - in_mean) / in_scale,
/// raw target = out_mean + out_scale * network output.
struct Normalizer {
  std::vector<double> in_mean, in_scale, out_mean, out_scale;

  static Normalizer identity(const NetworkTopology& topo);
  double normalize_in(std::size_t i, double v) const { return (v - in_mean[i]) / in_scale[i]; }
  double denormalize_in(std::size_t i, double v) const { return v * in_scale[i] + in_mean[i]; }
  double normalize_out(std::size_t i, double v) const { return (v - out_mean[i]) / out_scale[i]; }
  double denormalize_out(std::size_t i, double v) const { return v * out_scale[i] + out_mean[i]; }
  bool operator==(const Normalizer&) const = default;
};

struct Transition {
  int t = 0;
  std::vector<double> state;
  std::vector<double> input;
  std::vector<double> next_state;
  std::vector<double> aux;
};

/// Append-only record of observed transitions for one episode.
class TransitionBuffer {
 public:
  explicit TransitionBuffer(NetworkTopology topo);

  void append(Transition tr);
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  const Transition& operator[](std::size_t i) const { return records_[i]; }
  std::span<const Transition> records() const { return records_; }
  const NetworkTopology& topology() const { return topo_; }

  /// Raw regression target of record i: state part (increment or absolute)
  /// followed by the auxiliary outputs.
  std::vector<double> target(std::size_t i) const;

  /// Mean / standard deviation of network inputs and targets over the
  /// whole buffer. Degenerate dimensions get scale 1.
  Normalizer compute_normalizer() const;

 private:
  NetworkTopology topo_;
  std::vector<Transition> records_;
};

struct StepPrediction {
  std::vector<double> next_state;
  std::vector<double> aux;
};

/// Frozen network parameters theta(t). Immutable after construction.
class ModelSnapshot {
 public:
  ModelSnapshot(NetworkTopology topo, std::vector<double> theta, Normalizer norm,
                std::size_t trained_on = 0);

  const NetworkTopology& topology() const { return topo_; }
  std::span<const double> theta() const { return theta_; }
  const Normalizer& normalizer() const { return norm_; }
  std::size_t trained_on() const { return trained_on_; }

  /// Allocation-free prediction; spans must match the topology.
  void predict_into(std::span<const double> x, std::span<const double> u,
                    std::span<double> next_state, std::span<double> aux) const;

  /// Network output in normalized target space for a normalized input.
  void forward_normalized(std::span<const double> input_n, std::span<double> out_n) const;

  /// Same predictor re-expressed under another normalizer (exact up to
  /// rounding).
  ModelSnapshot rebased(const Normalizer& target) const;

  bool operator==(const ModelSnapshot&) const = default;

 private:
  NetworkTopology topo_;
  std::vector<double> theta_;
  Normalizer norm_;
  std::size_t trained_on_;
};

/// Weights (and biases) ~ U(-0.5, 0.5) / sqrt(fan_in); identity normalizer.
ModelSnapshot init_random(const NetworkTopology& topo, std::uint64_t seed);

/// Throws std::invalid_argument on dimension mismatch.
StepPrediction predict_one_step(const ModelSnapshot& model, std::span<const double> x,
                                std::span<const double> u);

/// Iterates predict_one_step over u_sequence (input_dim values per step).
std::vector<StepPrediction> rollout(const ModelSnapshot& model, std::span<const double> x0,
                                    std::span<const double> u_sequence);

double wrap_angle(double a);

// ---- training ------------------------------------------------------------

/// Buffer contents mapped into normalized network coordinates.
struct NormalizedBatch {
  std::size_t rows = 0;
  std::size_t n_in = 0;
  std::size_t n_out = 0;
  std::vector<double> inputs;   // rows x n_in
  std::vector<double> targets;  // rows x n_out
};

NormalizedBatch make_batch(const TransitionBuffer& buffer, const Normalizer& norm);

/// Mean squared error over all rows and output dimensions.
double batch_loss(const NetworkTopology& topo, std::span<const double> theta,
                  const NormalizedBatch& batch);

/// Analytic gradient of batch_loss with respect to theta.
std::vector<double> batch_gradient(const NetworkTopology& topo, std::span<const double> theta,
                                   const NormalizedBatch& batch, double* loss_out = nullptr);

/// d(normalized output)/d(theta), row-major n_out x param_count, at one
/// normalized input.
std::vector<double> weight_jacobian(const NetworkTopology& topo, std::span<const double> theta,
                                    std::span<const double> input_n);

/// Loss of a snapshot on a buffer, measured in the buffer's own normalized
/// target units. Used to compare snapshots trained under different stats.
double evaluate_loss(const TransitionBuffer& buffer, const ModelSnapshot& model);

enum class TrainMethod { adam, levenberg_marquardt };

struct TrainConfig {
  TrainMethod method = TrainMethod::levenberg_marquardt;
  int iterations = 3;  // LM steps or Adam epochs per control step
  double learning_rate = 1e-2;
  double lr_decay = 0.999;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double lm_mu = 1e-3;  // initial damping
};

struct TrainResult {
  ModelSnapshot snapshot;
  double loss_before = 0.0;
  double loss_after = 0.0;
  bool diverged = false;  // NaN encountered; snapshot is the input
};

/// Full-batch Adam (or damped Gauss-Newton, TrainMethod::levenberg_marquardt,
/// where `iterations` counts accepted-or-rejected outer steps) on the
/// one-step MSE over the whole buffer. Normalization
/// statistics are recomputed first and the input weights re-expressed in
/// them. The returned snapshot never has a higher evaluate_loss than the
/// input snapshot.
TrainResult train(const TransitionBuffer& buffer, const ModelSnapshot& start,
                  const TrainConfig& config);

// ---- residuals -----------------------------------------------------------

/// Scalar constraint evaluated on one (possibly predicted) transition.
using TransitionConstraint =
    std::function<double(std::span<const double> next_state, std::span<const double> aux)>;

struct ResidualOptions {
  int max_depth = 1;
  std::size_t max_starts = 2000;  // subsample cap on start indices
  std::size_t window = 0;         // 0 = whole history, else last `window` starts
  std::uint64_t seed = 0;         // subsampling stream
};

struct ResidualBatch {
  std::vector<ResidualSample> samples;
  std::vector<int> origin_t;  // timestep of the start state of each sample
  int deepest_available = 0;  // largest depth with at least one sample
};

/// For each start index s and depth d <= max_depth with data available:
///   g(true transition s+d-1) - g(d-th transition of the model rollout from
///   x(s) under the recorded inputs u(s..s+d-1)).
/// Depth d therefore involves d applications of the network.
ResidualBatch compute_residuals(const TransitionBuffer& buffer, const ModelSnapshot& model,
                                const TransitionConstraint& g, const ResidualOptions& options);

// ---- persistence ---------------------------------------------------------

/// Binary layout (little-endian): "WZM1", u64 state_dim, input_dim, aux_dim,
/// hidden, u8 predict_increments, u64 n_wrapped, u64 wrapped[n_wrapped],
/// u64 trained_on, f64 in_mean[n_in], in_scale[n_in], out_mean[n_out],
/// out_scale[n_out], u64 n_params, f64 theta[n_params].
void save_snapshot(const ModelSnapshot& model, const std::filesystem::path& path);
ModelSnapshot load_snapshot(const std::filesystem::path& path);

}  // namespace wdro
