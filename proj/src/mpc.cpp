#include "wdro/mpc.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "wdro/rng.hpp"

namespace wdro {

int round_half_away(double v) { return static_cast<int>(std::round(v)); }

int horizon_for(int t, int n_target) {
  if (t < 1) throw std::invalid_argument("timestep must be >= 1");
  if (n_target < 1) throw std::invalid_argument("target horizon must be >= 1");
  return std::min(n_target, round_half_away(static_cast<double>(t) / n_target) + 1);
}

std::vector<double> bootstrap_action(std::span<const double> configured_safe_action) {
  return {configured_safe_action.begin(), configured_safe_action.end()};
}

void ESConfig::validate(std::size_t input_dim) const {
  if (lambda < 1) throw std::invalid_argument("lambda must be >= 1");
  if (iterations < 1) throw std::invalid_argument("ES iterations must be >= 1");
  if (mutation_scale.size() != input_dim) throw std::invalid_argument("mutation_scale size mismatch");
  for (double s : mutation_scale) {
    if (!(s > 0.0)) throw std::invalid_argument("mutation_scale must be > 0");
  }
}

void ControlProblem::validate() const {
  if (!model) throw std::invalid_argument("control problem has no model");
  const auto& t = model->topology();
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  if (x0.size() != t.state_dim) throw std::invalid_argument("x0 dimension mismatch");
  if (u_min.size() != t.input_dim || u_max.size() != t.input_dim)
    throw std::invalid_argument("input box dimension mismatch");
  if (offsets.size() != static_cast<std::size_t>(horizon))
    throw std::invalid_argument("need one offset per depth");
  for (double r : offsets) {
    if (!(r >= 0.0)) throw std::invalid_argument("offsets must be >= 0");
  }
  if (!constraint || !cost) throw std::invalid_argument("constraint and cost must be set");
}

Candidate evaluate_candidate(const ControlProblem& problem, std::span<const double> inputs,
                             std::size_t index) {
  const auto& topo = problem.model->topology();
  const auto n = static_cast<std::size_t>(problem.horizon);
  const std::size_t sd = topo.state_dim, p = topo.input_dim, ad = topo.aux_dim;
  Candidate c;
  c.index = index;
  c.inputs.assign(inputs.begin(), inputs.end());
  c.next_states.resize(n * sd);
  c.aux.resize(n * ad);
  c.constraint.resize(n);
  c.max_slack = -std::numeric_limits<double>::infinity();
  std::span<const double> x = problem.x0;
  for (std::size_t k = 0; k < n; ++k) {
    std::span<double> next(c.next_states.data() + k * sd, sd);
    std::span<double> aux(c.aux.data() + k * ad, ad);
    problem.model->predict_into(x, inputs.subspan(k * p, p), next, aux);
    const double g = problem.constraint(next, aux);
    c.constraint[k] = g;
    const double slack = g + problem.offsets[k] - problem.bound;
    c.max_slack = std::max(c.max_slack, slack);
    if (slack > 0.0) c.total_violation += slack;
    x = next;
  }
  c.feasible = c.max_slack <= 0.0;
  c.cost = problem.cost(TrajectoryView{problem.x0, c.inputs, c.next_states, c.aux, n, sd, p, ad});
  if (!std::isfinite(c.cost)) c.cost = std::numeric_limits<double>::infinity();
  if (!std::isfinite(c.total_violation)) c.total_violation = std::numeric_limits<double>::infinity();
  return c;
}

std::vector<double> reconcile_warm_start(std::span<const double> previous, std::size_t input_dim,
                                         int horizon, std::span<const double> u_min,
                                         std::span<const double> u_max) {
  if (input_dim == 0 || previous.size() < input_dim || previous.size() % input_dim != 0) {
    throw std::invalid_argument("warm start must hold at least one whole input");
  }
  const std::size_t prev_steps = previous.size() / input_dim;
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(horizon) * input_dim);
  for (std::size_t k = 1; k < prev_steps && out.size() < static_cast<std::size_t>(horizon) * input_dim; ++k) {
    out.insert(out.end(), previous.begin() + static_cast<std::ptrdiff_t>(k * input_dim),
               previous.begin() + static_cast<std::ptrdiff_t>((k + 1) * input_dim));
  }
  const auto last = previous.subspan((prev_steps - 1) * input_dim, input_dim);
  while (out.size() < static_cast<std::size_t>(horizon) * input_dim) out.insert(out.end(), last.begin(), last.end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::clamp(out[i], u_min[i % input_dim], u_max[i % input_dim]);
  }
  return out;
}

namespace {

// Strict "a is preferred over b" used by the reduction.
bool better(const Candidate& a, const Candidate& b) {
  if (a.feasible != b.feasible) return a.feasible;
  if (a.feasible) {
    if (a.cost != b.cost) return a.cost < b.cost;
  } else if (a.total_violation != b.total_violation) {
    return a.total_violation < b.total_violation;
  }
  return a.index < b.index;
}

}  // namespace

Candidate solve(const ControlProblem& problem, const ESConfig& config,
                std::span<const double> warm_start) {
  problem.validate();
  const auto& topo = problem.model->topology();
  const std::size_t p = topo.input_dim;
  config.validate(p);
  const std::size_t dim = static_cast<std::size_t>(problem.horizon) * p;
  if (warm_start.size() != dim) throw std::invalid_argument("warm start length mismatch");

  Rng rng(config.seed);
  std::vector<double> parent(warm_start.begin(), warm_start.end());
  for (std::size_t i = 0; i < dim; ++i) {
    parent[i] = std::clamp(parent[i], problem.u_min[i % p], problem.u_max[i % p]);
  }
  Candidate best = evaluate_candidate(problem, parent, 0);

  std::vector<double> mutants(config.lambda * dim);
  for (int gen = 0; gen < config.iterations; ++gen) {
    // Mutants are drawn serially so the stream is independent of threading.
    for (std::size_t m = 0; m < config.lambda; ++m) {
      for (std::size_t i = 0; i < dim; ++i) {
        const double v = best.inputs[i] + config.mutation_scale[i % p] * rng.normal();
        mutants[m * dim + i] = std::clamp(v, problem.u_min[i % p], problem.u_max[i % p]);
      }
    }
    const unsigned workers = std::max(1u, std::min<unsigned>(config.threads, static_cast<unsigned>(config.lambda)));
    std::vector<Candidate> partial(workers, best);
    const auto run = [&](unsigned w) {
      Candidate local = best;
      for (std::size_t m = w; m < config.lambda; m += workers) {
        Candidate c = evaluate_candidate(
            problem, std::span<const double>(mutants.data() + m * dim, dim), m + 1 + gen * config.lambda);
        if (better(c, local)) local = std::move(c);
      }
      partial[w] = std::move(local);
    };
    if (workers == 1) {
      run(0);
    } else {
      std::vector<std::jthread> pool;
      for (unsigned w = 0; w < workers; ++w) pool.emplace_back(run, w);
    }
    for (auto& c : partial) {
      if (better(c, best)) best = std::move(c);
    }
  }
  return best;
}

OffsetAssembly assemble_offsets(std::span<const std::optional<EmpiricalResidualSet>> sets,
                                int horizon, const AmbiguityConfig& ambiguity, double bound,
                                double g_min, DepthMode mode) {
  ambiguity.validate();
  OffsetAssembly out;
  const double r_max = std::max(0.0, bound - g_min);
  for (int d = 1; d <= horizon; ++d) {
    const int source = mode == DepthMode::one_step ? 1 : d;
    if (static_cast<std::size_t>(source) > sets.size() || !sets[static_cast<std::size_t>(source - 1)]) {
      out.data_gap = d;
      return out;
    }
  }
  for (int d = 1; d <= horizon; ++d) {
    const int source = mode == DepthMode::one_step ? 1 : d;
    const auto& set = *sets[static_cast<std::size_t>(source - 1)];
    const auto radius = radius_for(set, ambiguity.beta);
    double r = compute_offset(set, radius, ambiguity.eta);
    if (r > r_max) {
      out.warnings.push_back("offset at depth " + std::to_string(d) + " clamped from " +
                             std::to_string(r) + " to " + std::to_string(r_max));
      r = r_max;
    }
    out.per_depth.push_back(r);
    out.radii.push_back(radius);
  }
  return out;
}

}  // namespace wdro
