#include <cmath>
#include <numbers>
#include <string>

#include "cmps/training.hpp"

namespace cmps {

const char* to_string(LossKind k) noexcept {
  switch (k) {
    case LossKind::DirectSquaredError: return "direct";
    case LossKind::SdeSquaredError: return "sde";
    case LossKind::GirsanovExact: return "girsanov";
  }
  return "?";
}

LossKind parse_loss_kind(std::string_view s) {
  if (s == "direct") return LossKind::DirectSquaredError;
  if (s == "sde") return LossKind::SdeSquaredError;
  if (s == "girsanov") return LossKind::GirsanovExact;
  throw ConfigError("unknown loss kind '" + std::string(s) + "' (expected direct|sde|girsanov)");
}

void LossConfig::validate() const {
  if (reg_H_variance && !(*reg_H_variance > 0.0)) throw ConfigError("reg_H variance must be > 0");
  if (reg_R_variance && !(*reg_R_variance > 0.0)) throw ConfigError("reg_R variance must be > 0");
  if (!(sample_rate > 0.0)) throw ConfigError("sample_rate must be > 0");
}

double nyquist_omega_variance(double sample_rate) noexcept {
  const double s = std::numbers::pi * sample_rate / 2.0;
  return s * s;
}

std::vector<double> observations_from_signal(std::span<const double> signal, Coupling coupling) {
  std::vector<double> obs;
  if (signal.size() < 2) return obs;
  obs.reserve(signal.size() - 1);
  for (std::size_t k = 0; k + 1 < signal.size(); ++k)
    obs.push_back(coupling == Coupling::Direct ? signal[k + 1] : signal[k + 1] - signal[k]);
  return obs;
}

namespace {

void require_coupling(const ModelParameters& p, Coupling c, const char* what) {
  if (p.coupling != c)
    throw ConfigError(std::string(what) + " requires " + to_string(c) + " coupling");
}

}  // namespace

double loss_direct(const ModelParameters& params, std::span<const double> signal, StateKind kind) {
  require_coupling(params, Coupling::Direct, "loss_direct");
  const auto obs = observations_from_signal(signal, Coupling::Direct);
  if (obs.empty()) return 0.0;
  const auto e = run_trajectory(params, obs, kind);
  double loss = 0.0;
  for (std::size_t k = 0; k < obs.size(); ++k) loss += (obs[k] - e[k]) * (obs[k] - e[k]);
  return loss;
}

double loss_sde(const ModelParameters& params, std::span<const double> signal, StateKind kind) {
  require_coupling(params, Coupling::Derivative, "loss_sde");
  if (signal.size() < 2) throw ConfigError("loss_sde needs signals of length >= 2");
  const auto obs = observations_from_signal(signal, Coupling::Derivative);
  const auto e = run_trajectory(params, obs, kind);
  double loss = 0.0;
  for (std::size_t k = 0; k < obs.size(); ++k) {
    const double r = obs[k] / params.dt - params.A * e[k];
    loss += r * r;
  }
  return loss;
}

double loss_girsanov(const ModelParameters& params, std::span<const double> signal, StateKind kind) {
  require_coupling(params, Coupling::Derivative, "loss_girsanov");
  if (signal.size() < 2) throw ConfigError("loss_girsanov needs signals of length >= 2");
  const auto obs = observations_from_signal(signal, Coupling::Derivative);
  const auto e = run_trajectory(params, obs, kind);
  double cross = 0.0, quad = 0.0;
  for (std::size_t k = 0; k < obs.size(); ++k) {
    cross += e[k] * obs[k];
    quad += e[k] * e[k];
  }
  return -params.A * cross + 0.5 * params.A * params.A * quad * params.dt;
}

double data_loss(const ModelParameters& params, std::span<const double> signal, const LossConfig& cfg) {
  switch (cfg.kind) {
    case LossKind::DirectSquaredError: return loss_direct(params, signal, cfg.state);
    case LossKind::SdeSquaredError: return loss_sde(params, signal, cfg.state);
    case LossKind::GirsanovExact: return loss_girsanov(params, signal, cfg.state);
  }
  return 0.0;
}

double reg_H(const VectorXd& omega, double variance) {
  return omega.squaredNorm() / (2.0 * variance);
}

double reg_R(const MatrixXcd& R, double variance) {
  return R.squaredNorm() / (2.0 * variance);
}

double regularization(const ModelParameters& params, const LossConfig& cfg) {
  double r = 0.0;
  if (cfg.reg_H_variance) r += reg_H(params.omega, *cfg.reg_H_variance);
  if (cfg.reg_R_variance) r += reg_R(params.R, *cfg.reg_R_variance);
  return r;
}

}  // namespace cmps
