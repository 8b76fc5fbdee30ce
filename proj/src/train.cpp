#include <algorithm>
#include <cmath>
#include <numeric>

#include "cmps/rng.hpp"
#include "cmps/training.hpp"

namespace cmps {

namespace {

// Stream index reserved for parameter initialization; batch draws use the step.
constexpr std::uint64_t kInitStream = 0xffffffffffffffffULL;

cplx complex_normal(RandomStream& rng) {
  const double re = standard_normal(rng);
  const double im = standard_normal(rng);
  return cplx(re, im) / std::sqrt(2.0);
}

}  // namespace

ModelParameters init_params(const InitConfig& cfg, std::uint64_t seed) {
  if (cfg.bond_dim < 1) throw ConfigError("bond_dim must be >= 1");
  if (cfg.density_rank < 0 || cfg.density_rank > cfg.bond_dim)
    throw ConfigError("density_rank must satisfy 0 <= r <= bond_dim");
  const int D = cfg.bond_dim;
  RandomStream rng = rng_stream(seed, kInitStream);

  ModelParameters p;
  p.dt = cfg.dt;
  p.sigma = cfg.sigma;
  p.coupling = cfg.coupling;
  p.zero_R_diagonal = cfg.zero_R_diagonal;
  p.omega.resize(D);
  for (int a = 0; a < D; ++a) p.omega(a) = cfg.omega_std * standard_normal(rng);
  p.R.resize(D, D);
  const double rs = cfg.R_scale / std::sqrt(static_cast<double>(D));
  for (Eigen::Index i = 0; i < p.R.size(); ++i) p.R.data()[i] = rs * complex_normal(rng);
  p.psi0 = VectorXcd::Unit(D, 0);
  if (cfg.density_rank > 0) {
    MatrixXcd W(cfg.density_rank, D);
    for (Eigen::Index i = 0; i < W.size(); ++i) W.data()[i] = complex_normal(rng);
    p.W = std::move(W);
  }
  p.enforce_constraints();
  p.validate();
  return p;
}

std::vector<std::size_t> batch_indices(std::size_t n_signals, std::size_t batch_size, std::uint64_t seed,
                                       std::size_t step) {
  std::vector<std::size_t> pool(n_signals);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  const std::size_t m = std::min(batch_size, n_signals);
  RandomStream rng = rng_stream(seed, step);
  for (std::size_t i = 0; i < m; ++i) {
    const auto span = static_cast<double>(n_signals - i);
    const std::size_t j = i + std::min(static_cast<std::size_t>(uniform01(rng) * span), n_signals - i - 1);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(m);
  std::sort(pool.begin(), pool.end());
  return pool;
}

std::vector<LossRecord> train(TrainState& state, const TrainConfig& train_cfg, const LossConfig& loss_cfg,
                              const SignalSet& dataset, const TrainCallbacks& callbacks) {
  train_cfg.validate();
  loss_cfg.validate();
  state.params.validate();
  if (dataset.n_signals == 0) throw ConfigError("training needs a nonempty dataset");

  std::vector<LossRecord> history;
  bool fresh_checkpoint = false;
  while (state.step < train_cfg.max_steps) {
    const auto idx = batch_indices(dataset.n_signals, train_cfg.batch_size, train_cfg.seed, state.step);
    const LossAndGradient lg = gradient(state.params, dataset, loss_cfg, idx);
    const LossRecord rec{state.step, lg.data_loss, lg.reg_loss, lg.data_loss + lg.reg_loss};
    history.push_back(rec);
    if (callbacks.on_step) callbacks.on_step(rec);

    adam_update(state.params, lg.grad, state.optimizer, train_cfg);
    ++state.step;
    fresh_checkpoint = train_cfg.checkpoint_interval > 0 && state.step % train_cfg.checkpoint_interval == 0;
    if (fresh_checkpoint && callbacks.on_checkpoint) callbacks.on_checkpoint(state);
  }
  if (!fresh_checkpoint && callbacks.on_checkpoint) callbacks.on_checkpoint(state);
  return history;
}

}  // namespace cmps
