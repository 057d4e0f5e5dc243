#include "wdro/model.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include <Eigen/Dense>

#include "wdro/rng.hpp"

namespace wdro {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

struct Layout {
  std::size_t n_in, hidden, n_out;
  std::size_t w1() const { return 0; }
  std::size_t b1() const { return hidden * n_in; }
  std::size_t w2() const { return b1() + hidden; }
  std::size_t b2() const { return w2() + n_out * hidden; }
};

Layout layout_of(const NetworkTopology& t) { return {t.n_in(), t.hidden, t.n_out()}; }

// Hidden activations and outputs for one normalized input row.
void forward_row(const Layout& L, const double* theta, const double* in, double* act,
                 double* out) {
  for (std::size_t h = 0; h < L.hidden; ++h) {
    const double* w = theta + L.w1() + h * L.n_in;
    double z = theta[L.b1() + h];
    for (std::size_t i = 0; i < L.n_in; ++i) z += w[i] * in[i];
    act[h] = sigmoid(z);
  }
  for (std::size_t o = 0; o < L.n_out; ++o) {
    const double* w = theta + L.w2() + o * L.hidden;
    double y = theta[L.b2() + o];
    for (std::size_t h = 0; h < L.hidden; ++h) y += w[h] * act[h];
    out[o] = y;
  }
}

bool is_wrapped(const NetworkTopology& t, std::size_t dim) {
  return std::find(t.wrapped_dims.begin(), t.wrapped_dims.end(), dim) != t.wrapped_dims.end();
}

// ---- little-endian IO ----

void put_u64(std::ostream& os, std::uint64_t v) {
  std::array<char, 8> b;
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b.data(), 8);
}

void put_f64(std::ostream& os, double v) { put_u64(os, std::bit_cast<std::uint64_t>(v)); }

std::uint64_t get_u64(std::istream& is) {
  std::array<unsigned char, 8> b{};
  is.read(reinterpret_cast<char*>(b.data()), 8);
  if (!is) throw std::runtime_error("truncated snapshot file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& is) { return std::bit_cast<double>(get_u64(is)); }

void put_vec(std::ostream& os, const std::vector<double>& v) {
  for (double x : v) put_f64(os, x);
}

std::vector<double> get_vec(std::istream& is, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = get_f64(is);
  return v;
}

}  // namespace

double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double w = std::fmod(a, two_pi);
  if (w > std::numbers::pi) w -= two_pi;
  if (w <= -std::numbers::pi) w += two_pi;
  return w;
}

void NetworkTopology::validate() const {
  if (state_dim == 0 || input_dim == 0) throw std::invalid_argument("empty model dimensions");
  if (n_in() > kMaxModelDim || n_out() > kMaxModelDim)
    throw std::invalid_argument("model dimension exceeds kMaxModelDim");
  if (hidden == 0 || hidden > kMaxHidden) throw std::invalid_argument("hidden width out of range");
  for (auto d : wrapped_dims) {
    if (d >= state_dim) throw std::invalid_argument("wrapped dimension out of range");
  }
}

Normalizer Normalizer::identity(const NetworkTopology& topo) {
  return {std::vector<double>(topo.n_in(), 0.0), std::vector<double>(topo.n_in(), 1.0),
          std::vector<double>(topo.n_out(), 0.0), std::vector<double>(topo.n_out(), 1.0)};
}

// ---- buffer ----

TransitionBuffer::TransitionBuffer(NetworkTopology topo) : topo_(std::move(topo)) {
  topo_.validate();
}

void TransitionBuffer::append(Transition tr) {
  if (tr.state.size() != topo_.state_dim || tr.next_state.size() != topo_.state_dim ||
      tr.input.size() != topo_.input_dim || tr.aux.size() != topo_.aux_dim) {
    throw std::invalid_argument("transition dimension mismatch");
  }
  records_.push_back(std::move(tr));
}

std::vector<double> TransitionBuffer::target(std::size_t i) const {
  const auto& r = records_[i];
  std::vector<double> out(topo_.n_out());
  for (std::size_t d = 0; d < topo_.state_dim; ++d) {
    if (topo_.predict_increments) {
      const double delta = r.next_state[d] - r.state[d];
      out[d] = is_wrapped(topo_, d) ? wrap_angle(delta) : delta;
    } else {
      out[d] = r.next_state[d];
    }
  }
  std::copy(r.aux.begin(), r.aux.end(), out.begin() + static_cast<std::ptrdiff_t>(topo_.state_dim));
  return out;
}

Normalizer TransitionBuffer::compute_normalizer() const {
  Normalizer n = Normalizer::identity(topo_);
  if (records_.empty()) return n;
  const std::size_t ni = topo_.n_in(), no = topo_.n_out();
  const double m = static_cast<double>(records_.size());
  std::vector<double> s_in(ni, 0.0), ss_in(ni, 0.0), s_out(no, 0.0), ss_out(no, 0.0);
  for (std::size_t k = 0; k < records_.size(); ++k) {
    const auto& r = records_[k];
    for (std::size_t i = 0; i < ni; ++i) {
      const double v = i < topo_.state_dim ? r.state[i] : r.input[i - topo_.state_dim];
      s_in[i] += v;
    }
    const auto t = target(k);
    for (std::size_t o = 0; o < no; ++o) s_out[o] += t[o];
  }
  for (std::size_t i = 0; i < ni; ++i) n.in_mean[i] = s_in[i] / m;
  for (std::size_t o = 0; o < no; ++o) n.out_mean[o] = s_out[o] / m;
  for (std::size_t k = 0; k < records_.size(); ++k) {
    const auto& r = records_[k];
    for (std::size_t i = 0; i < ni; ++i) {
      const double v = i < topo_.state_dim ? r.state[i] : r.input[i - topo_.state_dim];
      ss_in[i] += (v - n.in_mean[i]) * (v - n.in_mean[i]);
    }
    const auto t = target(k);
    for (std::size_t o = 0; o < no; ++o) ss_out[o] += (t[o] - n.out_mean[o]) * (t[o] - n.out_mean[o]);
  }
  const auto scale_of = [](double ss, double count, double mean) {
    const double sd = std::sqrt(ss / count);
    return sd > 1e-9 * (1.0 + std::abs(mean)) ? sd : 1.0;
  };
  for (std::size_t i = 0; i < ni; ++i) n.in_scale[i] = scale_of(ss_in[i], m, n.in_mean[i]);
  for (std::size_t o = 0; o < no; ++o) n.out_scale[o] = scale_of(ss_out[o], m, n.out_mean[o]);
  return n;
}

// ---- snapshot ----

ModelSnapshot::ModelSnapshot(NetworkTopology topo, std::vector<double> theta, Normalizer norm,
                             std::size_t trained_on)
    : topo_(std::move(topo)), theta_(std::move(theta)), norm_(std::move(norm)),
      trained_on_(trained_on) {
  topo_.validate();
  if (theta_.size() != topo_.param_count()) throw std::invalid_argument("theta size mismatch");
  if (norm_.in_mean.size() != topo_.n_in() || norm_.in_scale.size() != topo_.n_in() ||
      norm_.out_mean.size() != topo_.n_out() || norm_.out_scale.size() != topo_.n_out()) {
    throw std::invalid_argument("normalizer size mismatch");
  }
}

void ModelSnapshot::forward_normalized(std::span<const double> input_n,
                                       std::span<double> out_n) const {
  std::array<double, kMaxHidden> act{};
  forward_row(layout_of(topo_), theta_.data(), input_n.data(), act.data(), out_n.data());
}

void ModelSnapshot::predict_into(std::span<const double> x, std::span<const double> u,
                                 std::span<double> next_state, std::span<double> aux) const {
  const std::size_t sd = topo_.state_dim;
  std::array<double, kMaxModelDim> in{};
  std::array<double, kMaxModelDim> out{};
  for (std::size_t i = 0; i < sd; ++i) in[i] = norm_.normalize_in(i, x[i]);
  for (std::size_t j = 0; j < topo_.input_dim; ++j) in[sd + j] = norm_.normalize_in(sd + j, u[j]);
  forward_normalized(in, out);
  for (std::size_t i = 0; i < sd; ++i) {
    const double raw = norm_.denormalize_out(i, out[i]);
    double v = topo_.predict_increments ? x[i] + raw : raw;
    if (!topo_.wrapped_dims.empty() && is_wrapped(topo_, i)) v = wrap_angle(v);
    next_state[i] = v;
  }
  for (std::size_t a = 0; a < topo_.aux_dim; ++a) aux[a] = norm_.denormalize_out(sd + a, out[sd + a]);
}

ModelSnapshot ModelSnapshot::rebased(const Normalizer& target) const {
  const Layout L = layout_of(topo_);
  std::vector<double> th = theta_;
  for (std::size_t h = 0; h < L.hidden; ++h) {
    double bias = theta_[L.b1() + h];
    for (std::size_t i = 0; i < L.n_in; ++i) {
      const double w = theta_[L.w1() + h * L.n_in + i];
      th[L.w1() + h * L.n_in + i] = w * target.in_scale[i] / norm_.in_scale[i];
      bias += w * (target.in_mean[i] - norm_.in_mean[i]) / norm_.in_scale[i];
    }
    th[L.b1() + h] = bias;
  }
  for (std::size_t o = 0; o < L.n_out; ++o) {
    const double ratio = norm_.out_scale[o] / target.out_scale[o];
    for (std::size_t h = 0; h < L.hidden; ++h) th[L.w2() + o * L.hidden + h] *= ratio;
    th[L.b2() + o] = (norm_.out_scale[o] * theta_[L.b2() + o] + norm_.out_mean[o] -
                      target.out_mean[o]) /
                     target.out_scale[o];
  }
  return ModelSnapshot(topo_, std::move(th), target, trained_on_);
}

ModelSnapshot init_random(const NetworkTopology& topo, std::uint64_t seed) {
  topo.validate();
  const Layout L = layout_of(topo);
  Rng rng(seed);
  std::vector<double> theta(topo.param_count());
  const double in_gain = 1.0 / std::sqrt(static_cast<double>(L.n_in));
  const double out_gain = 1.0 / std::sqrt(static_cast<double>(L.hidden));
  for (std::size_t k = 0; k < L.w2(); ++k) theta[k] = rng.uniform(-0.5, 0.5) * in_gain;
  for (std::size_t k = L.w2(); k < theta.size(); ++k) theta[k] = rng.uniform(-0.5, 0.5) * out_gain;
  return ModelSnapshot(topo, std::move(theta), Normalizer::identity(topo), 0);
}

StepPrediction predict_one_step(const ModelSnapshot& model, std::span<const double> x,
                                std::span<const double> u) {
  const auto& t = model.topology();
  if (x.size() != t.state_dim || u.size() != t.input_dim) {
    throw std::invalid_argument("prediction dimension mismatch");
  }
  StepPrediction p{std::vector<double>(t.state_dim), std::vector<double>(t.aux_dim)};
  model.predict_into(x, u, p.next_state, p.aux);
  return p;
}

std::vector<StepPrediction> rollout(const ModelSnapshot& model, std::span<const double> x0,
                                    std::span<const double> u_sequence) {
  const std::size_t p = model.topology().input_dim;
  if (u_sequence.empty() || u_sequence.size() % p != 0) {
    throw std::invalid_argument("input sequence length must be a positive multiple of input_dim");
  }
  std::vector<StepPrediction> out;
  out.reserve(u_sequence.size() / p);
  std::vector<double> x(x0.begin(), x0.end());
  for (std::size_t k = 0; k < u_sequence.size() / p; ++k) {
    out.push_back(predict_one_step(model, x, u_sequence.subspan(k * p, p)));
    x = out.back().next_state;
  }
  return out;
}

// ---- training ----

NormalizedBatch make_batch(const TransitionBuffer& buffer, const Normalizer& norm) {
  const auto& topo = buffer.topology();
  NormalizedBatch b{buffer.size(), topo.n_in(), topo.n_out(), {}, {}};
  b.inputs.resize(b.rows * b.n_in);
  b.targets.resize(b.rows * b.n_out);
  for (std::size_t k = 0; k < buffer.size(); ++k) {
    const auto& r = buffer[k];
    for (std::size_t i = 0; i < b.n_in; ++i) {
      const double v = i < topo.state_dim ? r.state[i] : r.input[i - topo.state_dim];
      b.inputs[k * b.n_in + i] = norm.normalize_in(i, v);
    }
    const auto t = buffer.target(k);
    for (std::size_t o = 0; o < b.n_out; ++o) b.targets[k * b.n_out + o] = norm.normalize_out(o, t[o]);
  }
  return b;
}

double batch_loss(const NetworkTopology& topo, std::span<const double> theta,
                  const NormalizedBatch& batch) {
  const Layout L = layout_of(topo);
  std::array<double, kMaxHidden> act{};
  std::array<double, kMaxModelDim> out{};
  double sum = 0.0;
  for (std::size_t k = 0; k < batch.rows; ++k) {
    forward_row(L, theta.data(), &batch.inputs[k * L.n_in], act.data(), out.data());
    for (std::size_t o = 0; o < L.n_out; ++o) {
      const double e = out[o] - batch.targets[k * L.n_out + o];
      sum += e * e;
    }
  }
  return sum / static_cast<double>(batch.rows * L.n_out);
}

std::vector<double> batch_gradient(const NetworkTopology& topo, std::span<const double> theta,
                                   const NormalizedBatch& batch, double* loss_out) {
  const Layout L = layout_of(topo);
  std::vector<double> grad(theta.size(), 0.0);
  std::array<double, kMaxHidden> act{}, dact{};
  std::array<double, kMaxModelDim> out{}, dout{};
  const double norm = 1.0 / static_cast<double>(batch.rows * L.n_out);
  double sum = 0.0;
  for (std::size_t k = 0; k < batch.rows; ++k) {
    const double* in = &batch.inputs[k * L.n_in];
    forward_row(L, theta.data(), in, act.data(), out.data());
    for (std::size_t o = 0; o < L.n_out; ++o) {
      const double e = out[o] - batch.targets[k * L.n_out + o];
      sum += e * e;
      dout[o] = 2.0 * e * norm;
    }
    for (std::size_t h = 0; h < L.hidden; ++h) dact[h] = 0.0;
    for (std::size_t o = 0; o < L.n_out; ++o) {
      double* gw = &grad[L.w2() + o * L.hidden];
      const double* w = &theta[L.w2() + o * L.hidden];
      for (std::size_t h = 0; h < L.hidden; ++h) {
        gw[h] += dout[o] * act[h];
        dact[h] += dout[o] * w[h];
      }
      grad[L.b2() + o] += dout[o];
    }
    for (std::size_t h = 0; h < L.hidden; ++h) {
      const double dz = dact[h] * act[h] * (1.0 - act[h]);
      double* gw = &grad[L.w1() + h * L.n_in];
      for (std::size_t i = 0; i < L.n_in; ++i) gw[i] += dz * in[i];
      grad[L.b1() + h] += dz;
    }
  }
  if (loss_out) *loss_out = sum * norm;
  return grad;
}

std::vector<double> weight_jacobian(const NetworkTopology& topo, std::span<const double> theta,
                                    std::span<const double> input_n) {
  const Layout L = layout_of(topo);
  const std::size_t np = theta.size();
  std::vector<double> jac(L.n_out * np, 0.0);
  std::array<double, kMaxHidden> act{};
  std::array<double, kMaxModelDim> out{};
  forward_row(L, theta.data(), input_n.data(), act.data(), out.data());
  for (std::size_t o = 0; o < L.n_out; ++o) {
    double* row = &jac[o * np];
    for (std::size_t h = 0; h < L.hidden; ++h) {
      row[L.w2() + o * L.hidden + h] = act[h];
      const double dz = theta[L.w2() + o * L.hidden + h] * act[h] * (1.0 - act[h]);
      for (std::size_t i = 0; i < L.n_in; ++i) row[L.w1() + h * L.n_in + i] = dz * input_n[i];
      row[L.b1() + h] = dz;
    }
    row[L.b2() + o] = 1.0;
  }
  return jac;
}

double evaluate_loss(const TransitionBuffer& buffer, const ModelSnapshot& model) {
  if (buffer.empty()) throw std::invalid_argument("cannot evaluate loss on an empty buffer");
  const auto& topo = buffer.topology();
  const Normalizer ref = buffer.compute_normalizer();
  std::vector<double> next(topo.state_dim), aux(topo.aux_dim);
  double sum = 0.0;
  for (std::size_t k = 0; k < buffer.size(); ++k) {
    const auto& r = buffer[k];
    model.predict_into(r.state, r.input, next, aux);
    const auto t = buffer.target(k);
    for (std::size_t o = 0; o < topo.n_out(); ++o) {
      double pred;
      if (o < topo.state_dim) {
        if (topo.predict_increments) {
          const double delta = next[o] - r.state[o];
          pred = is_wrapped(topo, o) ? wrap_angle(delta) : delta;
        } else {
          pred = next[o];
        }
      } else {
        pred = aux[o - topo.state_dim];
      }
      const double e = (pred - t[o]) / ref.out_scale[o];
      sum += e * e;
    }
  }
  return sum / static_cast<double>(buffer.size() * topo.n_out());
}

namespace {

// Damped Gauss-Newton on the normalized batch; theta is updated in place.
// Returns the final loss (NaN if the starting loss is not finite).
double levenberg_marquardt(const NetworkTopology& topo, std::vector<double>& theta,
                           const NormalizedBatch& batch, const TrainConfig& config) {
  const Layout L = layout_of(topo);
  const auto np = static_cast<Eigen::Index>(theta.size());
  const auto m = static_cast<Eigen::Index>(batch.rows * L.n_out);
  double loss = batch_loss(topo, theta, batch);
  if (!std::isfinite(loss)) return loss;
  double mu = config.lm_mu;
  Eigen::MatrixXd J(m, np);
  Eigen::VectorXd e(m);
  std::array<double, kMaxHidden> act{};
  std::array<double, kMaxModelDim> out{};
  std::vector<double> trial(theta.size());
  for (int it = 0; it < config.iterations; ++it) {
    for (std::size_t k = 0; k < batch.rows; ++k) {
      const double* in = &batch.inputs[k * L.n_in];
      forward_row(L, theta.data(), in, act.data(), out.data());
      const auto jac = weight_jacobian(topo, theta, std::span<const double>(in, L.n_in));
      for (std::size_t o = 0; o < L.n_out; ++o) {
        const auto r = static_cast<Eigen::Index>(k * L.n_out + o);
        e(r) = out[o] - batch.targets[k * L.n_out + o];
        J.row(r) = Eigen::Map<const Eigen::RowVectorXd>(&jac[o * theta.size()], np);
      }
    }
    const Eigen::MatrixXd jtj = J.transpose() * J;
    const Eigen::VectorXd jte = J.transpose() * e;
    bool accepted = false;
    while (mu < 1e10) {
      Eigen::MatrixXd a = jtj;
      a.diagonal().array() += mu;
      const Eigen::VectorXd step = a.ldlt().solve(-jte);
      for (std::size_t i = 0; i < theta.size(); ++i) trial[i] = theta[i] + step(static_cast<Eigen::Index>(i));
      const double trial_loss = batch_loss(topo, trial, batch);
      if (std::isfinite(trial_loss) && trial_loss < loss) {
        theta = trial;
        loss = trial_loss;
        mu = std::max(mu * 0.1, 1e-12);
        accepted = true;
        break;
      }
      mu *= 10.0;
    }
    if (!accepted) break;
  }
  return loss;
}

}  // namespace

TrainResult train(const TransitionBuffer& buffer, const ModelSnapshot& start,
                  const TrainConfig& config) {
  if (buffer.empty()) throw std::invalid_argument("cannot train on an empty buffer");
  if (!(start.topology() == buffer.topology())) throw std::invalid_argument("topology mismatch");
  const auto& topo = buffer.topology();
  const Normalizer norm = buffer.compute_normalizer();
  const NormalizedBatch batch = make_batch(buffer, norm);
  const double loss_in = evaluate_loss(buffer, start);

  const ModelSnapshot rebased = start.rebased(norm);
  std::vector<double> theta(rebased.theta().begin(), rebased.theta().end());
  std::vector<double> best = theta;
  double best_loss = std::numeric_limits<double>::infinity();
  std::vector<double> m(theta.size(), 0.0), v(theta.size(), 0.0);
  double lr = config.learning_rate;
  double b1t = 1.0, b2t = 1.0;
  bool diverged = false;

  if (config.method == TrainMethod::levenberg_marquardt) {
    best_loss = levenberg_marquardt(topo, theta, batch, config);
    if (!std::isfinite(best_loss)) return TrainResult{start, loss_in, loss_in, true};
    best = theta;
  }
  for (int it = 0; config.method == TrainMethod::adam && it < config.iterations; ++it) {
    double loss = 0.0;
    const auto g = batch_gradient(topo, theta, batch, &loss);
    if (!std::isfinite(loss)) {
      diverged = true;
      break;
    }
    if (loss < best_loss) {
      best_loss = loss;
      best = theta;
    }
    b1t *= config.beta1;
    b2t *= config.beta2;
    for (std::size_t k = 0; k < theta.size(); ++k) {
      m[k] = config.beta1 * m[k] + (1.0 - config.beta1) * g[k];
      v[k] = config.beta2 * v[k] + (1.0 - config.beta2) * g[k] * g[k];
      const double mh = m[k] / (1.0 - b1t);
      const double vh = v[k] / (1.0 - b2t);
      theta[k] -= lr * mh / (std::sqrt(vh) + config.adam_epsilon);
    }
    lr *= config.lr_decay;
  }
  if (!diverged) {
    const double final_loss = batch_loss(topo, theta, batch);
    if (!std::isfinite(final_loss)) {
      diverged = true;
    } else if (final_loss < best_loss) {
      best = theta;
    }
  }
  if (diverged) return TrainResult{start, loss_in, loss_in, true};

  ModelSnapshot out(topo, std::move(best), norm, buffer.size());
  const double loss_out = evaluate_loss(buffer, out);
  if (!(loss_out <= loss_in)) return TrainResult{start, loss_in, loss_in, false};
  return TrainResult{std::move(out), loss_in, loss_out, false};
}

// ---- residuals ----

ResidualBatch compute_residuals(const TransitionBuffer& buffer, const ModelSnapshot& model,
                                const TransitionConstraint& g, const ResidualOptions& options) {
  ResidualBatch out;
  const std::size_t n = buffer.size();
  if (n == 0 || options.max_depth < 1) return out;
  const auto& topo = model.topology();

  const std::size_t first = options.window > 0 && options.window < n ? n - options.window : 0;
  std::vector<std::size_t> starts;
  for (std::size_t s = first; s < n; ++s) starts.push_back(s);
  if (options.max_starts > 0 && starts.size() > options.max_starts) {
    Rng rng(options.seed);
    for (std::size_t i = 0; i < options.max_starts; ++i) {
      const auto j = i + static_cast<std::size_t>(rng.below(starts.size() - i));
      std::swap(starts[i], starts[j]);
    }
    starts.resize(options.max_starts);
    std::sort(starts.begin(), starts.end());
  }

  const auto max_depth = static_cast<std::size_t>(options.max_depth);
  std::vector<double> x(topo.state_dim), next(topo.state_dim), aux(topo.aux_dim);
  for (std::size_t s : starts) {
    const std::size_t depth_here = std::min(max_depth, n - s);
    x = buffer[s].state;
    for (std::size_t d = 1; d <= depth_here; ++d) {
      const auto& truth = buffer[s + d - 1];
      model.predict_into(x, truth.input, next, aux);
      const double value = g(truth.next_state, truth.aux) - g(next, aux);
      out.samples.push_back({static_cast<int>(d), value});
      out.origin_t.push_back(buffer[s].t);
      out.deepest_available = std::max(out.deepest_available, static_cast<int>(d));
      std::swap(x, next);
    }
  }
  return out;
}

// ---- persistence ----

void save_snapshot(const ModelSnapshot& model, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  const auto& t = model.topology();
  os.write("WZM1", 4);
  put_u64(os, t.state_dim);
  put_u64(os, t.input_dim);
  put_u64(os, t.aux_dim);
  put_u64(os, t.hidden);
  const char inc = t.predict_increments ? 1 : 0;
  os.write(&inc, 1);
  put_u64(os, t.wrapped_dims.size());
  for (auto d : t.wrapped_dims) put_u64(os, d);
  put_u64(os, model.trained_on());
  const auto& n = model.normalizer();
  put_vec(os, n.in_mean);
  put_vec(os, n.in_scale);
  put_vec(os, n.out_mean);
  put_vec(os, n.out_scale);
  put_u64(os, model.theta().size());
  for (double v : model.theta()) put_f64(os, v);
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

ModelSnapshot load_snapshot(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::string(magic, 4) != "WZM1") throw std::runtime_error("not a WZM1 snapshot");
  NetworkTopology t;
  t.state_dim = get_u64(is);
  t.input_dim = get_u64(is);
  t.aux_dim = get_u64(is);
  t.hidden = get_u64(is);
  char inc = 0;
  is.read(&inc, 1);
  t.predict_increments = inc != 0;
  const auto n_wrapped = get_u64(is);
  if (n_wrapped > kMaxModelDim) throw std::runtime_error("corrupt snapshot header");
  for (std::uint64_t i = 0; i < n_wrapped; ++i) t.wrapped_dims.push_back(get_u64(is));
  t.validate();
  const auto trained_on = get_u64(is);
  Normalizer n;
  n.in_mean = get_vec(is, t.n_in());
  n.in_scale = get_vec(is, t.n_in());
  n.out_mean = get_vec(is, t.n_out());
  n.out_scale = get_vec(is, t.n_out());
  const auto np = get_u64(is);
  if (np != t.param_count()) throw std::runtime_error("snapshot parameter count mismatch");
  auto theta = get_vec(is, np);
  return ModelSnapshot(t, std::move(theta), std::move(n), trained_on);
}

}  // namespace wdro
