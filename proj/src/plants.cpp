#include "wdro/plants.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "wdro/model.hpp"
#include "wdro/rng.hpp"

namespace wdro {

// ---- battery ----

OcvCurve OcvCurve::synthetic(double base, double slope) {
  std::vector<double> table(kGridPoints);
  for (int i = 0; i < kGridPoints; ++i) {
    const double s = static_cast<double>(i) / (kGridPoints - 1);
    table[i] = base + slope * s - 0.1 * std::exp(-35.0 * s) + 0.1 * std::exp(25.0 * (s - 1.0));
  }
  return OcvCurve(std::move(table));
}

OcvCurve::OcvCurve(std::vector<double> table) : table_(std::move(table)) {
  if (table_.size() < 2) throw std::invalid_argument("OCV table needs at least two points");
  for (std::size_t i = 1; i < table_.size(); ++i) table_[i] = std::max(table_[i], table_[i - 1]);
}

double OcvCurve::operator()(double soc) const {
  const double s = std::clamp(soc, 0.0, 1.0) * static_cast<double>(table_.size() - 1);
  const auto i = std::min(static_cast<std::size_t>(s), table_.size() - 2);
  const double f = s - static_cast<double>(i);
  return table_[i] + f * (table_[i + 1] - table_[i]);
}

void BatteryParams::validate() const {
  for (double v : {Q, R0, R1, R2, C1, C2, dt}) {
    if (!(v > 0.0)) throw std::invalid_argument("battery parameters must be positive");
  }
}

double battery_voltage(const BatteryState& state, double current, const BatteryParams& params,
                       const OcvCurve& ocv) {
  return ocv(state.soc) + state.v_rc1 + state.v_rc2 + current * params.R0;
}

BatteryStepResult battery_step(const BatteryState& state, double current,
                               const BatteryParams& p, const OcvCurve& ocv) {
  BatteryStepResult r;
  r.voltage = battery_voltage(state, current, p, ocv);
  const double soc = state.soc + current * p.dt / p.Q;
  r.next.soc = std::clamp(soc, 0.0, 1.0);
  r.soc_clipped = r.next.soc != soc;
  r.next.v_rc1 = state.v_rc1 - p.dt / (p.R1 * p.C1) * state.v_rc1 + p.dt / p.C1 * current;
  r.next.v_rc2 = state.v_rc2 - p.dt / (p.R2 * p.C2) * state.v_rc2 + p.dt / p.C2 * current;
  return r;
}

// ---- vehicle ----

VehicleState bicycle_step(const VehicleState& s, double u1, double u2, const VehicleParams& p) {
  VehicleState n;
  n.x1 = s.x1 + p.dt * s.x4 * std::cos(s.x3);
  n.x2 = s.x2 + p.dt * s.x4 * std::sin(s.x3);
  n.x3 = wrap_angle(s.x3 + p.dt * s.x4 * std::tan(u2) / p.length);
  n.x4 = s.x4 + p.dt * u1;
  return n;
}

// ---- obstacle field ----

ObstacleField::ObstacleField(std::size_t nodes, double resolution, std::vector<double> values,
                             double cutoff)
    : nodes_(nodes), resolution_(resolution), values_(std::move(values)), cutoff_(cutoff) {
  if (nodes_ < 2 || values_.size() != nodes_ * nodes_) {
    throw std::invalid_argument("obstacle grid has the wrong number of values");
  }
  if (!(resolution_ > 0.0)) throw std::invalid_argument("grid resolution must be positive");
}

ObstacleField ObstacleField::from_gaussians(const std::vector<Gaussian>& gaussians, double extent,
                                            double resolution, double cutoff_quantile) {
  const auto n = static_cast<std::size_t>(std::llround(extent / resolution)) + 1;
  std::vector<double> values(n * n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    const double y = static_cast<double>(j) * resolution;
    for (std::size_t i = 0; i < n; ++i) {
      const double x = static_cast<double>(i) * resolution;
      double z = 0.0;
      for (const auto& g : gaussians) {
        const double dx = x - g.cx, dy = y - g.cy;
        z += g.amplitude * std::exp(-(dx * dx + dy * dy) / (2.0 * g.sigma * g.sigma));
      }
      values[j * n + i] = z;
    }
  }
  std::vector<double> sorted = values;
  const auto k = static_cast<std::size_t>(
      std::floor(std::clamp(cutoff_quantile, 0.0, 1.0) * static_cast<double>(sorted.size() - 1)));
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k), sorted.end());
  ObstacleField f(n, resolution, std::move(values), sorted[k]);
  f.gaussians_ = gaussians;
  return f;
}

bool ObstacleField::contains(double x, double y) const {
  const double e = extent();
  return x >= 0.0 && x <= e && y >= 0.0 && y <= e;
}

double ObstacleField::eval_clamped(double x, double y) const {
  const double e = extent();
  const double gx = std::clamp(x, 0.0, e) / resolution_;
  const double gy = std::clamp(y, 0.0, e) / resolution_;
  const auto i = std::min(static_cast<std::size_t>(gx), nodes_ - 2);
  const auto j = std::min(static_cast<std::size_t>(gy), nodes_ - 2);
  const double fx = gx - static_cast<double>(i);
  const double fy = gy - static_cast<double>(j);
  const double z00 = node(i, j), z10 = node(i + 1, j);
  const double z01 = node(i, j + 1), z11 = node(i + 1, j + 1);
  return (1.0 - fy) * ((1.0 - fx) * z00 + fx * z10) + fy * ((1.0 - fx) * z01 + fx * z11);
}

std::optional<double> ObstacleField::eval(double x, double y) const {
  if (!contains(x, y)) return std::nullopt;
  return eval_clamped(x, y);
}

double ObstacleField::violation_depth(double x, double y) const {
  if (eval_clamped(x, y) <= cutoff_) return 0.0;
  const double gx = std::clamp(x, 0.0, extent()) / resolution_;
  const double gy = std::clamp(y, 0.0, extent()) / resolution_;
  const auto ci = static_cast<long>(std::lround(gx));
  const auto cj = static_cast<long>(std::lround(gy));
  const long n = static_cast<long>(nodes_);

  // Grow a square search window until a safe node is found, then widen it
  // once more so every node that could beat the first hit is considered.
  double nearest_node = std::numeric_limits<double>::infinity();
  long radius = 1;
  for (; radius < n; ++radius) {
    for (long j = std::max(0L, cj - radius); j <= std::min(n - 1, cj + radius); ++j) {
      for (long i = std::max(0L, ci - radius); i <= std::min(n - 1, ci + radius); ++i) {
        if (node(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) > cutoff_) continue;
        const double d = std::hypot(static_cast<double>(i) * resolution_ - x,
                                    static_cast<double>(j) * resolution_ - y);
        nearest_node = std::min(nearest_node, d);
      }
    }
    if (std::isfinite(nearest_node)) break;
  }
  if (!std::isfinite(nearest_node)) return std::numeric_limits<double>::infinity();

  const long reach = radius + 2;
  double best = nearest_node;
  for (long j = std::max(0L, cj - reach); j <= std::min(n - 1, cj + reach); ++j) {
    for (long i = std::max(0L, ci - reach); i <= std::min(n - 1, ci + reach); ++i) {
      if (node(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) > cutoff_) continue;
      const double nx = static_cast<double>(i) * resolution_;
      const double ny = static_cast<double>(j) * resolution_;
      if (std::hypot(nx - x, ny - y) > nearest_node + 2.0 * resolution_) continue;
      // Z > cutoff at t=0, Z <= cutoff at t=1.
      double lo = 0.0, hi = 1.0;
      for (int it = 0; it < 50; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double z = eval_clamped(x + mid * (nx - x), y + mid * (ny - y));
        (z > cutoff_ ? lo : hi) = mid;
      }
      best = std::min(best, hi * std::hypot(nx - x, ny - y));
    }
  }
  return best;
}

void ObstacleField::write_text(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", resolution_);
  os << nodes_ << ' ' << nodes_ << ' ' << buf << ' ';
  std::snprintf(buf, sizeof buf, "%.17g", cutoff_);
  os << buf << '\n';
  for (std::size_t j = 0; j < nodes_; ++j) {
    for (std::size_t i = 0; i < nodes_; ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", node(i, j));
      if (i) os << ' ';
      os << buf;
    }
    os << '\n';
  }
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

ObstacleField ObstacleField::read_text(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::size_t w = 0, h = 0;
  double res = 0.0, cutoff = 0.0;
  if (!(is >> w >> h >> res >> cutoff)) throw std::runtime_error("bad obstacle field header");
  if (w != h) throw std::runtime_error("obstacle field must be square");
  std::vector<double> values(w * h);
  for (auto& v : values) {
    if (!(is >> v)) throw std::runtime_error("truncated obstacle field");
  }
  return ObstacleField(w, res, std::move(values), cutoff);
}

bool has_corridor(const ObstacleField& field, double start_x, double start_y, double width) {
  const std::size_t n = field.nodes();
  const double res = field.resolution();
  const long r_cells = static_cast<long>(std::ceil(0.5 * width / res));
  const double r2 = (0.5 * width) * (0.5 * width);

  // Disc offsets covered by the vehicle corridor around a node.
  std::vector<std::pair<long, long>> disc;
  for (long dj = -r_cells; dj <= r_cells; ++dj) {
    for (long di = -r_cells; di <= r_cells; ++di) {
      if ((di * di + dj * dj) * res * res <= r2 + 1e-12) disc.emplace_back(di, dj);
    }
  }
  // A node is clear when the whole disc around it (clipped to the arena)
  // is safe.
  std::vector<char> clear(n * n, 0);
  const long ln = static_cast<long>(n);
  for (long j = 0; j < ln; ++j) {
    for (long i = 0; i < ln; ++i) {
      bool ok = true;
      for (const auto& [di, dj] : disc) {
        const long a = i + di, b = j + dj;
        if (a < 0 || b < 0 || a >= ln || b >= ln) continue;
        if (field.node(static_cast<std::size_t>(a), static_cast<std::size_t>(b)) > field.cutoff()) {
          ok = false;
          break;
        }
      }
      clear[static_cast<std::size_t>(j * ln + i)] = ok;
    }
  }
  const auto si = static_cast<long>(std::lround(start_x / res));
  const auto sj = static_cast<long>(std::lround(start_y / res));
  if (si < 0 || sj < 0 || si >= ln || sj >= ln) return false;
  if (!clear[static_cast<std::size_t>(sj * ln + si)]) return false;

  std::vector<char> seen(n * n, 0);
  std::deque<std::pair<long, long>> queue{{si, sj}};
  seen[static_cast<std::size_t>(sj * ln + si)] = 1;
  while (!queue.empty()) {
    const auto [i, j] = queue.front();
    queue.pop_front();
    if (i == ln - 1 || j == ln - 1) return true;
    constexpr long di[] = {1, -1, 0, 0};
    constexpr long dj[] = {0, 0, 1, -1};
    for (int k = 0; k < 4; ++k) {
      const long a = i + di[k], b = j + dj[k];
      if (a < 0 || b < 0 || a >= ln || b >= ln) continue;
      const auto idx = static_cast<std::size_t>(b * ln + a);
      if (seen[idx] || !clear[idx]) continue;
      seen[idx] = 1;
      queue.emplace_back(a, b);
    }
  }
  return false;
}

ObstacleField generate_obstacle_field(std::uint64_t seed, const ObstacleFieldConfig& config) {
  if (config.n_gaussians < 0) throw std::invalid_argument("n_gaussians must be >= 0");
  for (int attempt = 0; attempt < config.max_attempts; ++attempt) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(attempt)));
    std::vector<Gaussian> gs(static_cast<std::size_t>(config.n_gaussians));
    for (auto& g : gs) {
      g.cx = rng.uniform(0.0, config.extent);
      g.cy = rng.uniform(0.0, config.extent);
      g.sigma = rng.uniform(config.sigma_min, config.sigma_max);
      g.amplitude = rng.uniform(config.amplitude_min, config.amplitude_max);
    }
    auto field = ObstacleField::from_gaussians(gs, config.extent, config.resolution,
                                               config.cutoff_quantile);
    const auto z0 = field.eval(config.start_x, config.start_y);
    if (!z0 || *z0 > field.cutoff()) continue;
    if (!has_corridor(field, config.start_x, config.start_y, config.corridor_width)) continue;
    field.seed_ = seed;
    field.attempts_ = attempt + 1;
    return field;
  }
  throw std::runtime_error("obstacle field generation failed after " +
                           std::to_string(config.max_attempts) + " attempts");
}

}  // namespace wdro
