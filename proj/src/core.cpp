#include "cmps/core.hpp"

#include <cmath>
#include <string>

namespace cmps {

const char* to_string(Coupling c) noexcept {
  return c == Coupling::Direct ? "direct" : "derivative";
}

const char* to_string(StateKind s) noexcept { return s == StateKind::Pure ? "pure" : "density"; }

Coupling parse_coupling(std::string_view s) {
  if (s == "direct") return Coupling::Direct;
  if (s == "derivative") return Coupling::Derivative;
  throw ConfigError("unknown coupling '" + std::string(s) + "' (expected direct|derivative)");
}

StateKind parse_state_kind(std::string_view s) {
  if (s == "pure") return StateKind::Pure;
  if (s == "density") return StateKind::Density;
  throw ConfigError("unknown state kind '" + std::string(s) + "' (expected pure|density)");
}

void ModelParameters::validate() const {
  const int D = bond_dim();
  if (D < 1) throw ConfigError("bond dimension must be >= 1");
  if (R.rows() != D || R.cols() != D) throw ConfigError("R must be D x D");
  if (psi0.size() != D) throw ConfigError("psi0 must have D entries");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("dt must be > 0");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ConfigError("sigma must be > 0");
  if (psi0.squaredNorm() == 0.0) throw ConfigError("psi0 must have nonzero norm");
  if (W) {
    if (W->cols() != D) throw ConfigError("W must have D columns");
    if (W->rows() < 1 || W->rows() > D) throw ConfigError("W rank must satisfy 1 <= r <= D");
  }
  if (zero_R_diagonal) {
    for (int a = 0; a < D; ++a)
      if (R(a, a) != cplx(0.0)) throw ConfigError("diag(R) must be zero when zero_R_diagonal is set");
  }
}

void ModelParameters::enforce_constraints() {
  if (zero_R_diagonal) R.diagonal().setZero();
}

int LatentState::dim() const noexcept {
  return is_pure() ? static_cast<int>(pure().size()) : static_cast<int>(density().rows());
}

double LatentState::weight() const {
  return is_pure() ? pure().squaredNorm() : density().trace().real();
}

LatentState LatentState::from_pure(VectorXcd psi, double floor) {
  const double n2 = psi.squaredNorm();
  if (!(n2 >= floor)) throw ZeroNormError(0, n2);
  const double n = std::sqrt(n2);
  psi /= n;
  return LatentState{std::move(psi), std::log(n)};
}

LatentState LatentState::from_density(MatrixXcd rho, double floor) {
  rho = (0.5 * (rho + rho.adjoint())).eval();
  const double tr = rho.trace().real();
  if (!(tr >= floor)) throw ZeroNormError(0, tr);
  rho /= tr;
  return LatentState{std::move(rho), std::log(tr)};
}

VectorXcd interaction_phases(const VectorXd& omega, double t) {
  VectorXcd p(omega.size());
  for (Eigen::Index a = 0; a < omega.size(); ++a) p(a) = std::polar(1.0, omega(a) * t);
  return p;
}

MatrixXcd rotate_with_phases(const MatrixXcd& op, const VectorXcd& phases) {
  return phases.asDiagonal() * op * phases.conjugate().asDiagonal();
}

MatrixXcd rotate_coupling(const ModelParameters& params, double t) {
  return rotate_with_phases(params.R, interaction_phases(params.omega, t));
}

double expectation(const LatentState& state, const MatrixXcd& M, double floor) {
  const double w = state.weight();
  if (!(w >= floor)) throw ZeroNormError(0, w);
  if (state.is_pure()) {
    const VectorXcd& psi = state.pure();
    return 2.0 * psi.dot(M * psi).real() / w;
  }
  return 2.0 * trace_product(M, state.density()) / w;
}

MatrixXcd step_operator(const ModelParameters& params, double increment, double t) {
  const MatrixXcd Rt = rotate_coupling(params, t);
  const int D = params.bond_dim();
  const double c = 0.5 * params.sigma * params.sigma * params.dt;
  return MatrixXcd::Identity(D, D) - c * (Rt.adjoint() * Rt) + increment * Rt;
}

LatentState evolve_pure(const LatentState& state, const ModelParameters& params, double increment,
                        double t, double floor) {
  VectorXcd u = step_operator(params, increment, t) * state.pure();
  const double n2 = u.squaredNorm();
  if (!(n2 >= floor)) throw ZeroNormError(0, n2);
  const double n = std::sqrt(n2);
  u /= n;
  return LatentState{std::move(u), state.log_norm + std::log(n)};
}

LatentState evolve_density(const LatentState& state, const ModelParameters& params,
                           double increment, double t, double floor) {
  const MatrixXcd M = step_operator(params, increment, t);
  MatrixXcd S = M * state.density() * M.adjoint();
  S = (0.5 * (S + S.adjoint())).eval();
  const double tr = S.trace().real();
  if (!(tr >= floor)) throw ZeroNormError(0, tr);
  S /= tr;
  return LatentState{std::move(S), state.log_norm + std::log(tr)};
}

MatrixXcd init_density(const MatrixXcd& W) {
  MatrixXcd P = W.adjoint() * W;
  const double tr = P.trace().real();
  if (!(tr > 0.0)) throw ZeroNormError(0, tr);
  return P / tr;
}

LatentState initial_state(const ModelParameters& params, StateKind kind) {
  if (kind == StateKind::Pure) return LatentState::from_pure(params.psi0);
  if (params.W) return LatentState::from_density(init_density(*params.W));
  const VectorXcd psi = params.psi0.normalized();
  return LatentState::from_density(psi * psi.adjoint());
}

StepKernel::StepKernel(const ModelParameters& params)
    : R_(params.R),
      Q_(params.R.adjoint() * params.R),
      omega_(params.omega),
      phases_(VectorXcd::Ones(params.bond_dim())),
      damping_(0.5 * params.sigma * params.sigma * params.dt) {}

void StepKernel::set_time(double t) { phases_ = interaction_phases(omega_, t); }

double StepKernel::expectation(const VectorXcd& psi) const {
  const VectorXcd v = phases_.conjugate().cwiseProduct(psi);
  return 2.0 * v.dot(R_ * v).real();
}

VectorXcd StepKernel::apply(const VectorXcd& psi, double increment) const {
  const VectorXcd v = phases_.conjugate().cwiseProduct(psi);
  // Products are evaluated before scaling so they take the vectorized kernel.
  VectorXcd inner(v.size());
  inner.noalias() = R_ * v;
  inner *= increment;
  VectorXcd qv(v.size());
  qv.noalias() = Q_ * v;
  inner -= damping_ * qv;
  return psi + phases_.cwiseProduct(inner);
}

MatrixXcd StepKernel::rotated_coupling() const { return rotate_with_phases(R_, phases_); }

MatrixXcd StepKernel::step_matrix(double increment) const {
  const int D = static_cast<int>(R_.rows());
  MatrixXcd inner = increment * R_ - damping_ * Q_;
  return MatrixXcd::Identity(D, D) + rotate_with_phases(inner, phases_);
}

std::vector<double> run_trajectory(const ModelParameters& params, std::span<const double> observations,
                                   StateKind kind, double floor) {
  std::vector<double> out;
  out.reserve(observations.size());
  StepKernel kernel(params);
  const std::size_t n = observations.size();
  if (kind == StateKind::Pure) {
    const double w0 = params.psi0.squaredNorm();
    if (!(w0 >= floor)) throw ZeroNormError(0, w0);
    VectorXcd psi = params.psi0 / std::sqrt(w0);
    for (std::size_t k = 0; k < n; ++k) {
      kernel.set_time(static_cast<double>(k) * params.dt);
      out.push_back(kernel.expectation(psi));
      if (k + 1 == n) break;
      psi = kernel.apply(psi, increment_for(params, observations[k]));
      const double n2 = psi.squaredNorm();
      if (!(n2 >= floor)) throw ZeroNormError(k + 1, n2);
      psi /= std::sqrt(n2);
    }
    return out;
  }
  MatrixXcd rho = initial_state(params, StateKind::Density).density();
  for (std::size_t k = 0; k < n; ++k) {
    kernel.set_time(static_cast<double>(k) * params.dt);
    out.push_back(2.0 * trace_product(kernel.rotated_coupling(), rho));
    if (k + 1 == n) break;
    const MatrixXcd M = kernel.step_matrix(increment_for(params, observations[k]));
    MatrixXcd S = M * rho * M.adjoint();
    S = (0.5 * (S + S.adjoint())).eval();
    const double tr = S.trace().real();
    if (!(tr >= floor)) throw ZeroNormError(k + 1, tr);
    rho = S / tr;
  }
  return out;
}

}  // namespace cmps
