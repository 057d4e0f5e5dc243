#include "wdro/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include "wdro/rng.hpp"

namespace wdro {

namespace {

constexpr std::uint64_t kModelTag = 0x30DE1;
constexpr std::uint64_t kEsTag = 0xE5;
constexpr std::uint64_t kResidualTag = 0x2E51D;

double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<ResidualSample> inflate(const ResidualBatch& batch, int t, double c_drift) {
  std::vector<AgedResidual> aged;
  aged.reserve(batch.samples.size());
  for (std::size_t i = 0; i < batch.samples.size(); ++i) {
    aged.push_back({batch.samples[i].value, std::max(1, t - batch.origin_t[i])});
  }
  const auto values = inflate_residuals_for_drift(aged, c_drift);
  std::vector<ResidualSample> out = batch.samples;
  for (std::size_t i = 0; i < out.size(); ++i) out[i].value = values[i];
  return out;
}

}  // namespace

RunLog run_episode(const ExperimentConfig& config, std::uint64_t seed) {
  const StudyDefinition study = make_study(config, seed);
  auto env = make_environment(config, study);

  RunLog log;
  log.study = study.study;
  log.seed = seed;
  log.dro_enabled = config.dro_enabled;
  log.bound = study.bound;
  log.soc_target = config.battery.soc_target;
  log.soc_tolerance = config.battery.soc_tolerance;
  log.dt = study.study == Study::battery ? config.battery.params.dt : config.vehicle.params.dt;
  log.state_names = study.state_names;
  log.input_names = study.input_names;
  log.field = study.field;

  const std::size_t p = study.topology.input_dim;
  TransitionBuffer buffer(study.topology);
  ModelSnapshot model = init_random(study.topology, derive_seed(seed, kModelTag));
  std::vector<double> plan = bootstrap_action(study.bootstrap);
  const bool one_step = study.depth_mode == DepthMode::one_step;

  ESConfig es;
  es.lambda = config.mutants;
  es.mutation_scale = study.mutation_scale;
  es.iterations = config.es_iterations;
  es.threads = config.threads;

  const int limit = env->step_limit();
  log.end_reason = "step limit";
  for (int t = 1; t <= limit; ++t) {
    const auto t0 = std::chrono::steady_clock::now();
    StepRecord rec;
    rec.t = t;
    std::vector<double> u;
    if (t == 1) {
      u = plan;
      rec.horizon = 1;
      rec.bootstrap = true;
    } else {
      const TrainResult tr = train(buffer, model, config.train);
      if (tr.diverged) {
        ++log.training_divergences;
        log.warnings.push_back("t=" + std::to_string(t) + ": training diverged, kept previous model");
      }
      model = tr.snapshot;

      int horizon = horizon_for(t, study.n_target);
      // A depth-d residual needs d consecutive recorded transitions.
      if (!one_step) horizon = std::min<int>(horizon, static_cast<int>(buffer.size()));

      std::vector<double> offsets(static_cast<std::size_t>(horizon), 0.0);
      if (config.dro_enabled) {
        ResidualOptions ro;
        ro.max_depth = one_step ? 1 : horizon;
        ro.max_starts = config.residual_max_starts;
        ro.window = config.residual_window;
        ro.seed = derive_seed(derive_seed(seed, kResidualTag), static_cast<std::uint64_t>(t));
        const ResidualBatch batch = compute_residuals(buffer, model, study.constraint, ro);
        const auto samples = config.c_drift > 0.0 ? inflate(batch, t, config.c_drift) : batch.samples;
        const auto sets = group_by_depth(samples, ro.max_depth);
        OffsetAssembly assembly = assemble_offsets(sets, horizon, study.ambiguity, study.bound,
                                                   study.g_min, study.depth_mode);
        while (assembly.data_gap && *assembly.data_gap > 1) {
          horizon = *assembly.data_gap - 1;
          assembly = assemble_offsets(sets, horizon, study.ambiguity, study.bound, study.g_min,
                                      study.depth_mode);
        }
        if (assembly.data_gap) throw std::runtime_error("no residual data at depth 1");
        for (const auto& w : assembly.warnings) log.warnings.push_back("t=" + std::to_string(t) + ": " + w);
        offsets = std::move(assembly.per_depth);
      }

      ControlProblem problem;
      problem.model = &model;
      problem.x0 = env->state();
      problem.horizon = horizon;
      problem.u_min = study.u_min;
      problem.u_max = study.u_max;
      problem.offsets = offsets;
      problem.bound = study.bound;
      problem.constraint = study.constraint;
      problem.cost = study.cost;

      es.seed = derive_seed(derive_seed(seed, kEsTag), static_cast<std::uint64_t>(t));
      const auto warm = reconcile_warm_start(plan, p, horizon, study.u_min, study.u_max);
      const auto ts = std::chrono::steady_clock::now();
      const Candidate best = solve(problem, es, warm);
      rec.solve_ms = ms_since(ts);
      if (!std::all_of(best.next_states.begin(), best.next_states.end(),
                       [](double v) { return std::isfinite(v); })) {
        log.warnings.push_back("t=" + std::to_string(t) + ": non-finite model prediction");
      }
      plan = best.inputs;
      u.assign(best.inputs.begin(), best.inputs.begin() + static_cast<std::ptrdiff_t>(p));
      rec.horizon = horizon;
      rec.offsets = std::move(offsets);
      rec.feasible = best.feasible;
      rec.predicted_constraint = best.constraint;
    }

    auto outcome = env->step(u, t);
    if (!outcome) {
      log.end_reason = "left arena";
      break;
    }
    rec.state = outcome->transition.next_state;
    rec.input = u;
    rec.constraint_value = outcome->constraint_value;
    rec.violation = outcome->violation;
    rec.violation_magnitude = outcome->violation_magnitude;
    if (outcome->soc_clipped) ++log.soc_clip_events;
    buffer.append(std::move(outcome->transition));
    rec.iter_ms = ms_since(t0);
    log.records.push_back(std::move(rec));
  }
  return log;
}

std::string RunMetrics::completion_metric(Study study) const {
  if (failed) return "failed";
  char buf[64];
  if (study == Study::vehicle) return std::to_string(steps);
  if (charging_time_min) {
    std::snprintf(buf, sizeof buf, "%.2f", *charging_time_min);
  } else {
    std::snprintf(buf, sizeof buf, "DNF (max SOC %.4f)", max_soc);
  }
  return buf;
}

RunMetrics compute_metrics(const RunLog& log) {
  RunMetrics m;
  m.seed = log.seed;
  m.steps = static_cast<int>(log.records.size());
  if (log.records.empty()) return m;
  double iter_ms = 0.0;
  for (const auto& r : log.records) {
    const bool violated = r.constraint_value > log.bound;
    if (violated) ++m.violations;
    iter_ms += r.iter_ms;
    if (log.study == Study::battery) {
      m.max_constraint = std::max(m.max_constraint, r.constraint_value);
      m.max_soc = std::max(m.max_soc, r.state[0]);
      if (!m.charging_time_min && r.state[0] >= log.soc_target - log.soc_tolerance) {
        m.charging_time_min = r.t * log.dt / 60.0;
      }
    } else if (violated) {
      m.max_constraint = std::max(m.max_constraint, r.violation_magnitude);
    }
  }
  m.violation_pct = 100.0 * m.violations / m.steps;
  m.mean_iter_time_s = iter_ms / 1000.0 / m.steps;
  return m;
}

SummaryRow summarize(const std::vector<RunMetrics>& metrics, Study study) {
  SummaryRow s;
  double completion = 0.0;
  for (const auto& m : metrics) {
    if (m.failed) continue;
    ++s.runs;
    s.violation_pct += m.violation_pct;
    s.max_constraint += m.max_constraint;
    s.mean_iter_time_s += m.mean_iter_time_s;
    if (study == Study::vehicle) {
      completion += m.steps;
      ++s.completed;
    } else if (m.charging_time_min) {
      completion += *m.charging_time_min;
      ++s.completed;
    }
  }
  if (s.runs > 0) {
    s.violation_pct /= s.runs;
    s.max_constraint /= s.runs;
    s.mean_iter_time_s /= s.runs;
  }
  if (s.completed > 0) s.completion = completion / s.completed;
  return s;
}

BatchResult run_batch(const ExperimentConfig& config) {
  config.validate();
  BatchResult out;
  out.study = config.study;
  out.dro_enabled = config.dro_enabled;
  for (auto seed : config.seeds) {
    try {
      RunLog log = run_episode(config, seed);
      out.metrics.push_back(compute_metrics(log));
      out.logs.push_back(std::move(log));
    } catch (const std::exception& e) {
      RunMetrics m;
      m.seed = seed;
      m.failed = true;
      m.error = e.what();
      out.metrics.push_back(m);
      RunLog empty;
      empty.study = config.study;
      empty.seed = seed;
      empty.dro_enabled = config.dro_enabled;
      empty.end_reason = std::string("failed: ") + e.what();
      out.logs.push_back(std::move(empty));
    }
  }
  out.summary = summarize(out.metrics, config.study);
  return out;
}

}  // namespace wdro
