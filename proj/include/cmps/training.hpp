#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cmps/core.hpp"
#include "cmps/signal_set.hpp"

namespace cmps {

enum class LossKind {
  DirectSquaredError,  ///< sum_k (x_{k+1} - <R_k + R_k^dag>_k)^2
  SdeSquaredError,     ///< sum_t (dx_t/dt - A <R_t + R_t^dag>_t)^2
  GirsanovExact,       ///< -A sum <.> dx + A^2/2 sum <.>^2 dt
};

const char* to_string(LossKind k) noexcept;
LossKind parse_loss_kind(std::string_view s);

struct LossConfig {
  LossKind kind = LossKind::DirectSquaredError;
  StateKind state = StateKind::Pure;
  std::optional<double> reg_H_variance;  ///< sigma_omega^2 (rad^2/s^2)
  std::optional<double> reg_R_variance;  ///< sigma_R^2
  double sample_rate = 16000.0;          ///< used by nyquist_omega_variance
  bool learn_omega = true;
  bool learn_R = true;
  bool learn_A = true;
  bool learn_initial = true;  ///< psi0, or W in density mode when W is present

  void validate() const;
};

/// sigma_omega^2 for sigma_f = s/4, i.e. (pi s / 2)^2.
double nyquist_omega_variance(double sample_rate) noexcept;

/// Gradient with the same shape as the learnable fields. Complex entries hold
/// dL/dRe + i dL/dIm.
struct ParameterGradient {
  VectorXd omega;
  MatrixXcd R;
  double A = 0.0;
  VectorXcd psi0;
  MatrixXcd W;  ///< empty when the parameters carry no W

  static ParameterGradient zeros_like(const ModelParameters& p);
  ParameterGradient& operator+=(const ParameterGradient& o);
  ParameterGradient& operator*=(double s);
  bool all_finite() const;
};

/// Observations consumed by the trajectory for a raw signal under the given coupling:
/// x_1..x_{T-1} for Direct, dx_0..dx_{T-2} for Derivative.
std::vector<double> observations_from_signal(std::span<const double> signal, Coupling coupling);

double loss_direct(const ModelParameters& params, std::span<const double> signal,
                   StateKind kind = StateKind::Pure);
double loss_sde(const ModelParameters& params, std::span<const double> signal,
                StateKind kind = StateKind::Pure);
double loss_girsanov(const ModelParameters& params, std::span<const double> signal,
                     StateKind kind = StateKind::Pure);
double data_loss(const ModelParameters& params, std::span<const double> signal, const LossConfig& cfg);

double reg_H(const VectorXd& omega, double variance);
double reg_R(const MatrixXcd& R, double variance);
double regularization(const ModelParameters& params, const LossConfig& cfg);

struct LossAndGradient {
  double data_loss = 0.0;  ///< mean over the batch
  double reg_loss = 0.0;
  ParameterGradient grad;
};

/// Reverse-mode derivative of one signal's data loss (no regularizer, no masking).
LossAndGradient signal_gradient(const ModelParameters& params, std::span<const double> signal,
                                const LossConfig& cfg);

/// Mean data loss over the selected signals plus regularizers, with its exact
/// gradient. Frozen fields and constrained entries are zeroed. Per-signal passes
/// run in parallel; the batch reduction is in index order. Throws NonFiniteError.
LossAndGradient gradient(const ModelParameters& params, const SignalSet& batch, const LossConfig& cfg,
                         std::span<const std::size_t> indices = {});

namespace serial {
LossAndGradient gradient(const ModelParameters& params, const SignalSet& batch, const LossConfig& cfg,
                         std::span<const std::size_t> indices = {});
}

/// Zero the gradient of frozen and constrained entries.
void mask_gradient(ParameterGradient& g, const ModelParameters& params, const LossConfig& cfg);

// ---------------------------------------------------------------------------
// Optimization

struct InitConfig {
  int bond_dim = 8;
  double dt = 1e-3;
  double sigma = 1.0;
  Coupling coupling = Coupling::Direct;
  bool zero_R_diagonal = false;
  double omega_std = 0.0;  ///< omega ~ N(0, omega_std^2)
  double R_scale = 1.0;    ///< R entries ~ R_scale / sqrt(D) * CN(0, 1)
  int density_rank = 0;    ///< 0: no W
};

ModelParameters init_params(const InitConfig& cfg, std::uint64_t seed);

struct TrainConfig {
  std::size_t batch_size = 8;
  std::size_t max_steps = 1000;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double decay_steps = 1000.0;  ///< lr_t = lr / (1 + t / decay_steps); <= 0 disables
  double clip_norm = 0.0;       ///< global gradient-norm clip; 0 disables
  /// Per-group learning-rate multipliers.
  double lr_scale_omega = 1.0;
  double lr_scale_R = 1.0;
  double lr_scale_A = 1.0;
  double lr_scale_initial = 1.0;
  std::uint64_t seed = 0;
  std::size_t checkpoint_interval = 0;  ///< 0: only the final checkpoint

  void validate() const;
};

/// Adam with inverse-time step-size decay over the flattened parameters.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::size_t step = 0;
};

/// Flattened learnable coordinates: omega, Re/Im R, A, Re/Im psi0, Re/Im W.
std::vector<double> flatten(const ModelParameters& p);
void unflatten(std::span<const double> flat, ModelParameters& p);
std::vector<double> flatten(const ParameterGradient& g);

void adam_update(ModelParameters& params, const ParameterGradient& grad, AdamState& state,
                 const TrainConfig& cfg);

struct LossRecord {
  std::size_t step = 0;
  double data_loss = 0.0;
  double reg_loss = 0.0;
  double total = 0.0;
};

struct TrainState {
  ModelParameters params;
  AdamState optimizer;
  std::size_t step = 0;
};

/// Batch indices for a step: a deterministic draw without replacement from the
/// stream (seed, step).
std::vector<std::size_t> batch_indices(std::size_t n_signals, std::size_t batch_size,
                                       std::uint64_t seed, std::size_t step);

struct TrainCallbacks {
  std::function<void(const LossRecord&)> on_step;
  std::function<void(const TrainState&)> on_checkpoint;
};

/// Runs steps state.step .. cfg.max_steps-1 in place. The loss recorded for a
/// step is evaluated at the parameters before that step's update. The dataset dt is
/// not checked against the model dt here.
std::vector<LossRecord> train(TrainState& state, const TrainConfig& train_cfg, const LossConfig& loss_cfg,
                              const SignalSet& dataset, const TrainCallbacks& callbacks = {});

}  // namespace cmps
