// Reverse-mode differentiation of the filtering pass.
//
// Conventions: for a real loss L and a complex quantity z the adjoint is
// g = dL/dRe(z) + i dL/dIm(z), so that dL = Re<g, dz> with <a, b> = tr(a^dag b).
// Adjoint rules used below:
//   w = M z                -> g_z += M^dag g_w,  g_M += g_w z^dag
//   psi = u / |u|          -> g_u = (g_psi - psi Re(psi^dag g_psi)) / |u|
//   rho = S / Re tr S      -> g_S = (g_rho - Re<g_rho, rho> 1) / Re tr S
//   S = M rho M^dag        -> g_rho += M^dag g_S M,  g_M += (g_S + g_S^dag) M rho
//   Q = R^dag R            -> g_R += R (g_Q + g_Q^dag)
//   X_t = P X P^dag, P = diag(exp(i omega t))
//                          -> g_X += P^dag g_{X_t} P,
//                             g_omega_a += t sum_b (c_ab - c_ba), c_ab = -Im(conj(g~_ab) X_ab)
// The omega adjoint is linear in t * g~, so it is accumulated as sum_k t_k g~_k and
// contracted once at the end.

#include <cmath>
#include <exception>
#include <numeric>

#include "cmps/training.hpp"

namespace cmps {

ParameterGradient ParameterGradient::zeros_like(const ModelParameters& p) {
  ParameterGradient g;
  const int D = p.bond_dim();
  g.omega = VectorXd::Zero(D);
  g.R = MatrixXcd::Zero(D, D);
  g.A = 0.0;
  g.psi0 = VectorXcd::Zero(D);
  if (p.W) g.W = MatrixXcd::Zero(p.W->rows(), p.W->cols());
  return g;
}

ParameterGradient& ParameterGradient::operator+=(const ParameterGradient& o) {
  omega += o.omega;
  R += o.R;
  A += o.A;
  psi0 += o.psi0;
  if (W.size() > 0) W += o.W;
  return *this;
}

ParameterGradient& ParameterGradient::operator*=(double s) {
  omega *= s;
  R *= s;
  A *= s;
  psi0 *= s;
  W *= s;
  return *this;
}

bool ParameterGradient::all_finite() const {
  return omega.allFinite() && R.allFinite() && std::isfinite(A) && psi0.allFinite() &&
         (W.size() == 0 || W.allFinite());
}

namespace {

/// dL/de_k for each step and dL/dA, given the trajectory expectations.
struct LossAdjoint {
  double loss = 0.0;
  std::vector<double> de;
  double dA = 0.0;
};

LossAdjoint loss_adjoint(const ModelParameters& p, LossKind kind, std::span<const double> obs,
                         std::span<const double> e) {
  LossAdjoint out;
  out.de.resize(obs.size());
  for (std::size_t k = 0; k < obs.size(); ++k) {
    switch (kind) {
      case LossKind::DirectSquaredError: {
        const double r = obs[k] - e[k];
        out.loss += r * r;
        out.de[k] = -2.0 * r;
        break;
      }
      case LossKind::SdeSquaredError: {
        const double r = obs[k] / p.dt - p.A * e[k];
        out.loss += r * r;
        out.de[k] = -2.0 * p.A * r;
        out.dA += -2.0 * e[k] * r;
        break;
      }
      case LossKind::GirsanovExact: {
        out.loss += -p.A * e[k] * obs[k] + 0.5 * p.A * p.A * e[k] * e[k] * p.dt;
        out.de[k] = -p.A * obs[k] + p.A * p.A * e[k] * p.dt;
        out.dA += -e[k] * obs[k] + p.A * e[k] * e[k] * p.dt;
        break;
      }
    }
  }
  return out;
}

/// Accumulators for the adjoints of R and Q = R^dag R in the unrotated frame.
struct FrameAdjoints {
  MatrixXcd R0, Rt, Q0, Qt;  // sum_k g~_k and sum_k t_k g~_k

  explicit FrameAdjoints(int D)
      : R0(MatrixXcd::Zero(D, D)), Rt(MatrixXcd::Zero(D, D)), Q0(MatrixXcd::Zero(D, D)),
        Qt(MatrixXcd::Zero(D, D)) {}

  void finish(const ModelParameters& p, ParameterGradient& g) const {
    const MatrixXcd Q = p.R.adjoint() * p.R;
    g.R += R0 + p.R * (Q0 + Q0.adjoint());
    const MatrixXd cR = -(Rt.conjugate().cwiseProduct(p.R)).imag();
    const MatrixXd cQ = -(Qt.conjugate().cwiseProduct(Q)).imag();
    const MatrixXd c = cR + cQ;
    g.omega += c.rowwise().sum() - c.colwise().sum().transpose();
  }
};

VectorXcd normalize_adjoint(const VectorXcd& g, const VectorXcd& psi, double norm) {
  return (g - psi * psi.dot(g).real()) / norm;
}

MatrixXcd trace_normalize_adjoint(const MatrixXcd& G, const MatrixXcd& rho, double trace) {
  const double proj = (G.adjoint() * rho).trace().real();
  MatrixXcd out = G;
  out.diagonal().array() -= proj;
  out /= trace;
  // Adjoint of the Hermitian symmetrization applied before the division.
  return 0.5 * (out + out.adjoint());
}

void pure_backward(const ModelParameters& p, std::span<const double> obs, const LossAdjoint& adj,
                   ParameterGradient& g) {
  const std::size_t n = obs.size();
  const int D = p.bond_dim();
  StepKernel kernel(p);

  const double n0 = p.psi0.norm();
  std::vector<VectorXcd> psi(n);
  std::vector<double> norms(n, 1.0);
  psi[0] = p.psi0 / n0;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    kernel.set_time(static_cast<double>(k) * p.dt);
    VectorXcd u = kernel.apply(psi[k], increment_for(p, obs[k]));
    const double nu = u.norm();
    if (!(nu * nu >= kDefaultNormFloor)) throw ZeroNormError(k + 1, nu * nu);
    norms[k + 1] = nu;
    psi[k + 1] = u / nu;
  }

  // Per-step rank-1 frame adjoints are w_k v_k^dag and v_k v_k^dag; their weighted
  // sums are formed once as matrix products over the stored columns.
  const double c = kernel.damping();
  MatrixXcd V(D, n), Wc = MatrixXcd::Zero(D, n);
  VectorXd inc_w = VectorXd::Zero(static_cast<Eigen::Index>(n)), a_w(n), t_w(n);
  VectorXcd g_next = VectorXcd::Zero(D);  // adjoint of psi_{k+1}
  for (std::size_t kk = n; kk-- > 0;) {
    const auto k = static_cast<Eigen::Index>(kk);
    const double t = static_cast<double>(kk) * p.dt;
    kernel.set_time(t);
    const VectorXcd& P = kernel.phases();
    V.col(k) = P.conjugate().cwiseProduct(psi[kk]);
    const auto v = V.col(k);
    t_w(k) = t;
    VectorXcd g_psi = VectorXcd::Zero(D);

    if (kk + 1 < n) {
      const double inc = increment_for(p, obs[kk]);
      const VectorXcd g_u = normalize_adjoint(g_next, psi[kk + 1], norms[kk + 1]);
      Wc.col(k) = P.conjugate().cwiseProduct(g_u);
      VectorXcd back(D), qw(D);
      back.noalias() = kernel.coupling().adjoint() * Wc.col(k);
      qw.noalias() = kernel.dissipator() * Wc.col(k);
      back = inc * back - c * qw;
      g_psi += g_u + P.cwiseProduct(back);
      inc_w(k) = inc;
    }

    const double a = adj.de[kk];
    a_w(k) = 2.0 * a;
    if (a != 0.0) {
      const MatrixXcd& R = kernel.coupling();
      VectorXcd rv(D);
      rv.noalias() = R * v;
      rv.noalias() += R.adjoint() * v;
      g_psi += (2.0 * a) * P.cwiseProduct(rv);
    }
    g_next = g_psi;
  }

  FrameAdjoints acc(D);
  const auto N = static_cast<Eigen::Index>(n);
  MatrixXcd X(D, 2 * N), Y(D, 2 * N);
  X << Wc, V;
  Y << V * inc_w.asDiagonal(), V * a_w.asDiagonal();
  acc.R0.noalias() = X * Y.adjoint();
  VectorXd tt(2 * N);
  tt << t_w, t_w;
  acc.Rt.noalias() = X * (Y * tt.asDiagonal()).adjoint();
  acc.Q0.noalias() = -c * (Wc * V.adjoint());
  acc.Qt.noalias() = -c * (Wc * (V * t_w.asDiagonal()).adjoint());
  g.psi0 += normalize_adjoint(g_next, psi[0], n0);
  acc.finish(p, g);
}

void density_backward(const ModelParameters& p, std::span<const double> obs, const LossAdjoint& adj,
                      ParameterGradient& g) {
  const std::size_t n = obs.size();
  const int D = p.bond_dim();
  StepKernel kernel(p);

  // Initial density, mirroring initial_state(): P -> symmetrize -> / Re tr.
  MatrixXcd P0;
  VectorXcd psi_unit;
  if (p.W) {
    P0 = p.W->adjoint() * *p.W;
  } else {
    psi_unit = p.psi0.normalized();
    P0 = psi_unit * psi_unit.adjoint();
  }
  const MatrixXcd P0s = 0.5 * (P0 + P0.adjoint());
  const double tr0 = P0s.trace().real();
  if (!(tr0 >= kDefaultNormFloor)) throw ZeroNormError(0, tr0);

  std::vector<MatrixXcd> rho(n);
  std::vector<double> traces(n, 1.0);
  rho[0] = P0s / tr0;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    kernel.set_time(static_cast<double>(k) * p.dt);
    const MatrixXcd M = kernel.step_matrix(increment_for(p, obs[k]));
    MatrixXcd S = M * rho[k] * M.adjoint();
    S = (0.5 * (S + S.adjoint())).eval();
    const double tr = S.trace().real();
    if (!(tr >= kDefaultNormFloor)) throw ZeroNormError(k + 1, tr);
    traces[k + 1] = tr;
    rho[k + 1] = S / tr;
  }

  FrameAdjoints acc(D);
  const double c = kernel.damping();
  MatrixXcd G_next = MatrixXcd::Zero(D, D);  // adjoint of rho_{k+1}
  for (std::size_t kk = n; kk-- > 0;) {
    const double t = static_cast<double>(kk) * p.dt;
    kernel.set_time(t);
    const VectorXcd& P = kernel.phases();
    MatrixXcd G_rho = MatrixXcd::Zero(D, D);
    MatrixXcd G_Rt = MatrixXcd::Zero(D, D);  // adjoint of R_t (rotated frame)
    MatrixXcd G_Qt = MatrixXcd::Zero(D, D);

    if (kk + 1 < n) {
      const double inc = increment_for(p, obs[kk]);
      const MatrixXcd M = kernel.step_matrix(inc);
      const MatrixXcd G_S = trace_normalize_adjoint(G_next, rho[kk + 1], traces[kk + 1]);
      G_rho += M.adjoint() * G_S * M;
      const MatrixXcd G_M = (G_S + G_S.adjoint()) * M * rho[kk];
      G_Rt += inc * G_M;
      G_Qt -= c * G_M;
    }

    const double a = adj.de[kk];
    if (a != 0.0) {
      const MatrixXcd Rt = kernel.rotated_coupling();
      G_rho += a * (Rt + Rt.adjoint());
      G_Rt += (2.0 * a) * rho[kk];
    }

    const MatrixXcd local_R = P.conjugate().asDiagonal() * G_Rt * P.asDiagonal();
    const MatrixXcd local_Q = P.conjugate().asDiagonal() * G_Qt * P.asDiagonal();
    acc.R0 += local_R;
    acc.Rt += t * local_R;
    acc.Q0 += local_Q;
    acc.Qt += t * local_Q;
    G_next = G_rho;
  }

  const MatrixXcd G_P = trace_normalize_adjoint(G_next, rho[0], tr0);
  if (p.W) {
    g.W += *p.W * (G_P + G_P.adjoint());
  } else {
    const VectorXcd g_unit = (G_P + G_P.adjoint()) * psi_unit;
    g.psi0 += normalize_adjoint(g_unit, psi_unit, p.psi0.norm());
  }
  acc.finish(p, g);
}

void check_kind(const ModelParameters& p, LossKind kind) {
  const bool direct = kind == LossKind::DirectSquaredError;
  if (direct != (p.coupling == Coupling::Direct))
    throw ConfigError(std::string("loss '") + to_string(kind) + "' is incompatible with " +
                      to_string(p.coupling) + " coupling");
}

}  // namespace

LossAndGradient signal_gradient(const ModelParameters& params, std::span<const double> signal,
                                const LossConfig& cfg) {
  check_kind(params, cfg.kind);
  LossAndGradient out;
  out.grad = ParameterGradient::zeros_like(params);
  for (double x : signal)
    if (!std::isfinite(x)) throw NonFiniteError("signal contains non-finite samples");
  const auto obs = observations_from_signal(signal, params.coupling);
  if (obs.empty()) {
    if (cfg.kind != LossKind::DirectSquaredError)
      throw ConfigError("derivative-coupling losses need signals of length >= 2");
    return out;
  }
  const auto e = run_trajectory(params, obs, cfg.state);
  const LossAdjoint adj = loss_adjoint(params, cfg.kind, obs, e);
  out.data_loss = adj.loss;
  out.grad.A = adj.dA;
  if (cfg.state == StateKind::Pure)
    pure_backward(params, obs, adj, out.grad);
  else
    density_backward(params, obs, adj, out.grad);
  return out;
}

void mask_gradient(ParameterGradient& g, const ModelParameters& params, const LossConfig& cfg) {
  if (!cfg.learn_omega) g.omega.setZero();
  if (!cfg.learn_R) g.R.setZero();
  if (params.zero_R_diagonal) g.R.diagonal().setZero();
  if (!cfg.learn_A) g.A = 0.0;
  if (!cfg.learn_initial) {
    g.psi0.setZero();
    g.W.setZero();
  }
}

namespace {

template <bool Parallel>
LossAndGradient batch_gradient(const ModelParameters& params, const SignalSet& batch, const LossConfig& cfg,
                               std::span<const std::size_t> indices) {
  std::vector<std::size_t> all;
  if (indices.empty()) {
    all.resize(batch.n_signals);
    std::iota(all.begin(), all.end(), std::size_t{0});
    indices = all;
  }
  if (indices.empty()) throw ConfigError("gradient needs a nonempty batch");
  for (std::size_t i : indices)
    if (i >= batch.n_signals) throw ConfigError("batch index out of range");

  const auto m = static_cast<std::ptrdiff_t>(indices.size());
  std::vector<LossAndGradient> parts(indices.size());
  std::vector<std::exception_ptr> errors(indices.size());
#pragma omp parallel for schedule(dynamic) if (Parallel)
  for (std::ptrdiff_t j = 0; j < m; ++j) {
    try {
      parts[j] = signal_gradient(params, batch.row(indices[j]), cfg);
    } catch (...) {
      errors[j] = std::current_exception();
    }
  }
  for (const auto& err : errors)
    if (err) std::rethrow_exception(err);

  LossAndGradient out;
  out.grad = ParameterGradient::zeros_like(params);
  for (const auto& part : parts) {
    out.data_loss += part.data_loss;
    out.grad += part.grad;
  }
  const double inv = 1.0 / static_cast<double>(indices.size());
  out.data_loss *= inv;
  out.grad *= inv;

  out.reg_loss = regularization(params, cfg);
  if (cfg.reg_H_variance) out.grad.omega += params.omega / *cfg.reg_H_variance;
  if (cfg.reg_R_variance) out.grad.R += params.R / *cfg.reg_R_variance;

  mask_gradient(out.grad, params, cfg);
  if (!out.grad.all_finite() || !std::isfinite(out.data_loss))
    throw NonFiniteError("non-finite loss or gradient");
  return out;
}

}  // namespace

LossAndGradient gradient(const ModelParameters& params, const SignalSet& batch, const LossConfig& cfg,
                         std::span<const std::size_t> indices) {
  return batch_gradient<true>(params, batch, cfg, indices);
}

namespace serial {
LossAndGradient gradient(const ModelParameters& params, const SignalSet& batch, const LossConfig& cfg,
                         std::span<const std::size_t> indices) {
  return batch_gradient<false>(params, batch, cfg, indices);
}
}  // namespace serial

}  // namespace cmps
