#include <cmath>

#include "cmps/training.hpp"

namespace cmps {

namespace {

// Group tags follow the flattening order.
enum Group : unsigned char { kOmega, kR, kA, kInitial };

template <typename F>
void for_each_coordinate(const ModelParameters& p, F&& f) {
  const Eigen::Index D = p.bond_dim();
  for (Eigen::Index a = 0; a < D; ++a) f(kOmega);
  for (Eigen::Index i = 0; i < 2 * D * D; ++i) f(kR);
  f(kA);
  for (Eigen::Index i = 0; i < 2 * D; ++i) f(kInitial);
  if (p.W)
    for (Eigen::Index i = 0; i < 2 * p.W->size(); ++i) f(kInitial);
}

void push_complex(std::vector<double>& out, const cplx* data, Eigen::Index n) {
  for (Eigen::Index i = 0; i < n; ++i) {
    out.push_back(data[i].real());
    out.push_back(data[i].imag());
  }
}

std::size_t pull_complex(std::span<const double> flat, std::size_t pos, cplx* data, Eigen::Index n) {
  for (Eigen::Index i = 0; i < n; ++i, pos += 2) data[i] = cplx(flat[pos], flat[pos + 1]);
  return pos;
}

}  // namespace

std::vector<double> flatten(const ModelParameters& p) {
  std::vector<double> out(p.omega.data(), p.omega.data() + p.omega.size());
  push_complex(out, p.R.data(), p.R.size());
  out.push_back(p.A);
  push_complex(out, p.psi0.data(), p.psi0.size());
  if (p.W) push_complex(out, p.W->data(), p.W->size());
  return out;
}

void unflatten(std::span<const double> flat, ModelParameters& p) {
  std::size_t expected = 0;
  for_each_coordinate(p, [&](Group) { ++expected; });
  if (flat.size() != expected) throw ConfigError("flat parameter vector has the wrong length");
  std::size_t pos = 0;
  for (Eigen::Index a = 0; a < p.omega.size(); ++a) p.omega(a) = flat[pos++];
  pos = pull_complex(flat, pos, p.R.data(), p.R.size());
  p.A = flat[pos++];
  pos = pull_complex(flat, pos, p.psi0.data(), p.psi0.size());
  if (p.W) pull_complex(flat, pos, p.W->data(), p.W->size());
}

std::vector<double> flatten(const ParameterGradient& g) {
  std::vector<double> out(g.omega.data(), g.omega.data() + g.omega.size());
  push_complex(out, g.R.data(), g.R.size());
  out.push_back(g.A);
  push_complex(out, g.psi0.data(), g.psi0.size());
  push_complex(out, g.W.data(), g.W.size());
  return out;
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be finite and >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw ConfigError("Adam betas must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
  if (clip_norm < 0.0) throw ConfigError("clip_norm must be >= 0");
  for (double s : {lr_scale_omega, lr_scale_R, lr_scale_A, lr_scale_initial})
    if (!(s >= 0.0) || !std::isfinite(s)) throw ConfigError("lr_scale_* must be finite and >= 0");
}

void adam_update(ModelParameters& params, const ParameterGradient& grad, AdamState& state,
                 const TrainConfig& cfg) {
  std::vector<double> theta = flatten(params);
  std::vector<double> g = flatten(grad);
  if (g.size() != theta.size()) throw ConfigError("gradient shape does not match the parameters");
  if (state.m.empty()) {
    state.m.assign(theta.size(), 0.0);
    state.v.assign(theta.size(), 0.0);
  }
  if (state.m.size() != theta.size() || state.v.size() != theta.size())
    throw ConfigError("optimizer state shape does not match the parameters");

  if (cfg.clip_norm > 0.0) {
    double n2 = 0.0;
    for (double x : g) n2 += x * x;
    const double n = std::sqrt(n2);
    if (n > cfg.clip_norm)
      for (double& x : g) x *= cfg.clip_norm / n;
  }

  const double t = static_cast<double>(state.step);
  const double lr = cfg.decay_steps > 0.0 ? cfg.learning_rate / (1.0 + t / cfg.decay_steps)
                                          : cfg.learning_rate;
  const double bc1 = 1.0 - std::pow(cfg.beta1, t + 1.0);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t + 1.0);
  const double scale[] = {cfg.lr_scale_omega, cfg.lr_scale_R, cfg.lr_scale_A, cfg.lr_scale_initial};

  std::size_t i = 0;
  for_each_coordinate(params, [&](Group grp) {
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g[i];
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    theta[i] -= lr * scale[grp] * mhat / (std::sqrt(vhat) + cfg.epsilon);
    ++i;
  });
  unflatten(theta, params);
  params.enforce_constraints();
  ++state.step;
}

}  // namespace cmps
