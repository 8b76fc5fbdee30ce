#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "cmps/error.hpp"

namespace cmps {

using cplx = std::complex<double>;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

/// How the observed signal enters the homodyne current.
enum class Coupling {
  Direct,      ///< I_t = x_t; the state consumes x_{k+1} * dt.
  Derivative,  ///< I_t = dx_t/dt; the state consumes the increment dx_k.
};

enum class StateKind { Pure, Density };

const char* to_string(Coupling c) noexcept;
const char* to_string(StateKind s) noexcept;
Coupling parse_coupling(std::string_view s);
StateKind parse_state_kind(std::string_view s);

inline constexpr double kDefaultNormFloor = 1e-300;

/// Learnable parameters plus the model hyperparameters.
struct ModelParameters {
  VectorXd omega;                 ///< eigenvalues of the diagonal H (rad/s)
  MatrixXcd R;                    ///< coupling operator, D x D
  double A = 1.0;                 ///< signal amplitude
  double sigma = 1.0;             ///< strength of the R^dag R damping
  double dt = 1e-3;               ///< model time step (s)
  VectorXcd psi0;                 ///< unnormalized initial pure state
  std::optional<MatrixXcd> W;     ///< r x D initial density factor
  bool zero_R_diagonal = false;
  Coupling coupling = Coupling::Direct;

  int bond_dim() const noexcept { return static_cast<int>(omega.size()); }

  /// Throws ConfigError when an invariant is violated.
  void validate() const;

  /// Zero diag(R) when zero_R_diagonal is set.
  void enforce_constraints();
};

/// A pure state or a density matrix, normalized, with the running log of the
/// normalization factors that were divided out.
struct LatentState {
  std::variant<VectorXcd, MatrixXcd> value;
  double log_norm = 0.0;

  bool is_pure() const noexcept { return value.index() == 0; }
  const VectorXcd& pure() const { return std::get<VectorXcd>(value); }
  const MatrixXcd& density() const { return std::get<MatrixXcd>(value); }
  int dim() const noexcept;

  /// Squared norm for a pure state, real trace for a density matrix.
  double weight() const;

  static LatentState from_pure(VectorXcd psi, double floor = kDefaultNormFloor);
  static LatentState from_density(MatrixXcd rho, double floor = kDefaultNormFloor);
};

/// R(t)_ab = R_ab * exp(i (omega_a - omega_b) t).
MatrixXcd rotate_coupling(const ModelParameters& params, double t);

/// Same rotation for an arbitrary operator, given the diagonal phases exp(i omega t).
MatrixXcd rotate_with_phases(const MatrixXcd& op, const VectorXcd& phases);

/// Re tr(A B) in O(D^2).
inline double trace_product(const MatrixXcd& A, const MatrixXcd& B) {
  return A.cwiseProduct(B.transpose()).sum().real();
}
VectorXcd interaction_phases(const VectorXd& omega, double t);

/// <M + M^dag> in the given state; the division by norm/trace is explicit so
/// unnormalized states are accepted.
double expectation(const LatentState& state, const MatrixXcd& M, double floor = kDefaultNormFloor);

/// Euler-Maruyama step [1 - sigma^2/2 R_t^dag R_t dt + R_t increment] followed by
/// renormalization. For the density form the operator acts on both sides and the
/// result is symmetrized.
LatentState evolve_pure(const LatentState& state, const ModelParameters& params, double increment,
                        double t, double floor = kDefaultNormFloor);
LatentState evolve_density(const LatentState& state, const ModelParameters& params,
                           double increment, double t, double floor = kDefaultNormFloor);

/// One-step operator 1 - (sigma^2 dt / 2) R_t^dag R_t + increment R_t.
MatrixXcd step_operator(const ModelParameters& params, double increment, double t);

/// rho0 = W^dag W / tr(W^dag W).
MatrixXcd init_density(const MatrixXcd& W);

/// Initial latent state: the normalized psi0 (Pure), or rho0 from W when present,
/// otherwise |psi0><psi0| (Density).
LatentState initial_state(const ModelParameters& params, StateKind kind);

/// Increment consumed by the state for observation y under the given coupling.
inline double increment_for(const ModelParameters& params, double observation) noexcept {
  return params.coupling == Coupling::Direct ? observation * params.dt : observation;
}

/// Per-trajectory step kernel. Precomputes R^dag R once; R_t and (R^dag R)_t are
/// applied through the diagonal phases so a pure step costs O(D^2).
class StepKernel {
 public:
  explicit StepKernel(const ModelParameters& params);

  void set_time(double t);
  const VectorXcd& phases() const noexcept { return phases_; }
  double damping() const noexcept { return damping_; }
  const MatrixXcd& coupling() const noexcept { return R_; }
  const MatrixXcd& dissipator() const noexcept { return Q_; }

  /// <R_t + R_t^dag> for a pure state of unit norm.
  double expectation(const VectorXcd& psi) const;
  /// Unnormalized M_t psi.
  VectorXcd apply(const VectorXcd& psi, double increment) const;

  /// Explicit R_t and M_t, used by the density path.
  MatrixXcd rotated_coupling() const;
  MatrixXcd step_matrix(double increment) const;

 private:
  MatrixXcd R_;
  MatrixXcd Q_;
  VectorXd omega_;
  VectorXcd phases_;
  double damping_;
};

/// Filtering pass. observations[k] is the current consumed at step k (x_{k+1}
/// in Direct coupling, dx_k in Derivative coupling). Returns the pre-observation
/// expectations <R_k + R_k^dag>_k, one per observation; step k uses t = k dt.
std::vector<double> run_trajectory(const ModelParameters& params, std::span<const double> observations,
                                   StateKind kind, double floor = kDefaultNormFloor);

}  // namespace cmps
