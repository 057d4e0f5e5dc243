#include "wdro/studies.hpp"

#include <cmath>

#include "wdro/rng.hpp"

namespace wdro {

namespace {

class BatteryEnvironment final : public Environment {
 public:
  BatteryEnvironment(const BatteryStudyConfig& cfg)
      : cfg_(cfg), ocv_(cfg.params.ocv()), state_{cfg.soc0, cfg.v_rc1_0, cfg.v_rc2_0} {}

  std::vector<double> state() const override { return {state_.soc, state_.v_rc1, state_.v_rc2}; }

  std::optional<StepOutcome> step(std::span<const double> u, int t) override {
    const auto res = battery_step(state_, u[0], cfg_.params, ocv_);
    StepOutcome out;
    out.transition = Transition{t, state(), {u[0]}, {res.next.soc, res.next.v_rc1, res.next.v_rc2},
                                {res.voltage}};
    out.constraint_value = res.voltage;
    out.violation = res.voltage > cfg_.v_max;
    out.violation_magnitude = std::max(0.0, res.voltage - cfg_.v_max);
    out.soc_clipped = res.soc_clipped;
    state_ = res.next;
    return out;
  }

  int step_limit() const override { return cfg_.steps; }

 private:
  BatteryStudyConfig cfg_;
  OcvCurve ocv_;
  BatteryState state_;
};

class VehicleEnvironment final : public Environment {
 public:
  VehicleEnvironment(const VehicleStudyConfig& cfg, std::shared_ptr<const ObstacleField> field)
      : cfg_(cfg), field_(std::move(field)), state_(cfg.start) {}

  std::vector<double> state() const override { return {state_.x1, state_.x2, state_.x3, state_.x4}; }

  std::optional<StepOutcome> step(std::span<const double> u, int t) override {
    const VehicleState next = bicycle_step(state_, u[0], u[1], cfg_.params);
    const auto z = field_->eval(next.x1, next.x2);
    if (!z) return std::nullopt;
    StepOutcome out;
    out.transition = Transition{t, state(), {u[0], u[1]}, {next.x1, next.x2, next.x3, next.x4}, {}};
    out.constraint_value = *z;
    out.violation = *z > field_->cutoff();
    out.violation_magnitude = out.violation ? field_->violation_depth(next.x1, next.x2) : 0.0;
    state_ = next;
    return out;
  }

  int step_limit() const override { return cfg_.max_steps; }

 private:
  VehicleStudyConfig cfg_;
  std::shared_ptr<const ObstacleField> field_;
  VehicleState state_;
};

StudyDefinition battery_study(const ExperimentConfig& config) {
  const auto& b = config.battery;
  StudyDefinition s;
  s.study = Study::battery;
  s.topology.state_dim = 3;
  s.topology.input_dim = 1;
  s.topology.aux_dim = 1;
  s.topology.hidden = config.hidden;
  s.topology.predict_increments = config.predict_increments;
  s.u_min = {b.i_min};
  s.u_max = {b.i_max};
  s.bootstrap = {b.i_safe};
  s.bound = b.v_max;
  s.g_min = b.g_min;
  s.constraint = [](std::span<const double>, std::span<const double> aux) { return aux[0]; };
  const double target = b.soc_target;
  s.cost = [target](const TrajectoryView& v) {
    double j = 0.0;
    for (std::size_t k = 0; k < v.horizon; ++k) {
      const double e = v.state(k)[0] - target;
      j += e * e;
    }
    return j;
  };
  s.n_target = b.n_target;
  s.ambiguity = {b.eta, b.beta};
  s.depth_mode = b.depth_mode;
  s.state_names = {"soc", "v_rc1", "v_rc2"};
  s.input_names = {"current"};
  return s;
}

StudyDefinition vehicle_study(const ExperimentConfig& config, std::uint64_t seed) {
  const auto& v = config.vehicle;
  StudyDefinition s;
  s.study = Study::vehicle;
  s.topology.state_dim = 4;
  s.topology.input_dim = 2;
  s.topology.aux_dim = 0;
  s.topology.hidden = config.hidden;
  s.topology.predict_increments = config.predict_increments;
  s.topology.wrapped_dims = {2};
  s.u_min = v.u_min;
  s.u_max = v.u_max;
  s.bootstrap = v.bootstrap;
  if (v.field_file.empty()) {
    ObstacleFieldConfig fc = v.field;
    fc.start_x = v.start.x1;
    fc.start_y = v.start.x2;
    s.field = std::make_shared<const ObstacleField>(
        generate_obstacle_field(derive_seed(seed, kFieldTag), fc));
  } else {
    s.field = std::make_shared<const ObstacleField>(ObstacleField::read_text(v.field_file));
  }
  s.bound = s.field->cutoff();
  s.g_min = v.g_min;
  const ObstacleField* field = s.field.get();
  s.constraint = [field](std::span<const double> next, std::span<const double>) {
    return field->eval_clamped(next[0], next[1]);
  };
  s.cost = [](const TrajectoryView& view) {
    const auto last = view.state(view.horizon - 1);
    return -(last[0] + last[1]);
  };
  s.n_target = v.n_target;
  s.ambiguity = {v.eta, v.beta};
  s.depth_mode = v.depth_mode;
  s.state_names = {"x1", "x2", "x3", "x4"};
  s.input_names = {"u1", "u2"};
  return s;
}

}  // namespace

StudyDefinition make_study(const ExperimentConfig& config, std::uint64_t seed) {
  config.validate();
  StudyDefinition s = config.study == Study::battery ? battery_study(config) : vehicle_study(config, seed);
  s.topology.validate();
  for (std::size_t i = 0; i < s.u_min.size(); ++i) {
    s.mutation_scale.push_back(config.mutation_fraction() * (s.u_max[i] - s.u_min[i]));
  }
  return s;
}

std::unique_ptr<Environment> make_environment(const ExperimentConfig& config,
                                              const StudyDefinition& study) {
  if (study.study == Study::battery) return std::make_unique<BatteryEnvironment>(config.battery);
  return std::make_unique<VehicleEnvironment>(config.vehicle, study.field);
}

}  // namespace wdro
