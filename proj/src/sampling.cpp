#include "cmps/sampling.hpp"

#include <cmath>
#include <exception>

#include "cmps/rng.hpp"

namespace cmps {

void SampleConfig::validate() const {
  if (!(temperature >= 0.0) || !std::isfinite(temperature)) throw ConfigError("temperature must be >= 0");
  if (n_steps < 1) throw ConfigError("n_steps must be >= 1");
  if (!std::isfinite(x0)) throw ConfigError("x0 must be finite");
}

namespace {

/// Online filter over one trajectory; holds a normalized pure state or density.
class Filter {
 public:
  Filter(const ModelParameters& params, StateKind kind) : params_(params), kernel_(params), kind_(kind) {
    const LatentState s0 = initial_state(params, kind);
    if (kind == StateKind::Pure)
      psi_ = s0.pure();
    else
      rho_ = s0.density();
  }

  double expectation(std::size_t k) {
    kernel_.set_time(static_cast<double>(k) * params_.dt);
    if (kind_ == StateKind::Pure) return kernel_.expectation(psi_);
    return 2.0 * trace_product(kernel_.rotated_coupling(), rho_);
  }

  /// Consumes the increment at the time set by the last expectation() call.
  void consume(double increment, std::size_t step) {
    if (kind_ == StateKind::Pure) {
      psi_ = kernel_.apply(psi_, increment);
      const double n2 = psi_.squaredNorm();
      if (!(n2 >= kDefaultNormFloor)) throw ZeroNormError(step, n2);
      psi_ /= std::sqrt(n2);
      return;
    }
    const MatrixXcd M = kernel_.step_matrix(increment);
    MatrixXcd S = M * rho_ * M.adjoint();
    S = (0.5 * (S + S.adjoint())).eval();
    const double tr = S.trace().real();
    if (!(tr >= kDefaultNormFloor)) throw ZeroNormError(step, tr);
    rho_ = S / tr;
  }

 private:
  const ModelParameters& params_;
  StepKernel kernel_;
  StateKind kind_;
  VectorXcd psi_;
  MatrixXcd rho_;
};

void sde_row(const ModelParameters& p, const SampleConfig& cfg, std::size_t i, std::span<double> out) {
  RandomStream rng = rng_stream(cfg.seed, i);
  Filter filter(p, cfg.state);
  const double noise = std::sqrt(cfg.temperature * p.dt);
  double x = cfg.x0;
  out[0] = x;
  for (std::size_t k = 0; k + 1 < cfg.n_steps; ++k) {
    const double e = filter.expectation(k);
    double dx = p.A * e * p.dt;
    if (cfg.temperature > 0.0) dx += noise * standard_normal(rng);
    x += dx;
    out[k + 1] = x;
    if (k + 2 < cfg.n_steps) filter.consume(dx, k + 1);
  }
}

void direct_row(const ModelParameters& p, const SampleConfig& cfg, std::size_t i, std::span<double> out) {
  RandomStream rng = rng_stream(cfg.seed, i);
  Filter filter(p, cfg.state);
  const double noise = std::sqrt(cfg.temperature);
  out[0] = cfg.x0;
  for (std::size_t k = 0; k + 1 < cfg.n_steps; ++k) {
    double x = filter.expectation(k);
    if (cfg.temperature > 0.0) x += noise * standard_normal(rng);
    out[k + 1] = x;
    if (k + 2 < cfg.n_steps) filter.consume(x * p.dt, k + 1);
  }
}

template <bool Parallel, typename Row>
SignalSet run_sampler(const ModelParameters& params, const SampleConfig& cfg, Coupling required, Row row) {
  cfg.validate();
  params.validate();
  if (params.coupling != required)
    throw ConfigError(std::string("sampler requires ") + to_string(required) + " coupling");

  SignalSet out(cfg.n_samples, cfg.n_steps, params.dt);
  const auto n = static_cast<std::ptrdiff_t>(cfg.n_samples);
  std::vector<std::exception_ptr> errors(cfg.n_samples);
#pragma omp parallel for schedule(dynamic) if (Parallel)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      row(params, cfg, static_cast<std::size_t>(i), out.row(i));
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& err : errors)
    if (err) std::rethrow_exception(err);

  out.metadata["kind"] = "samples";
  out.metadata["temperature"] = format_double(cfg.temperature);
  out.metadata["seed"] = std::to_string(cfg.seed);
  out.metadata["state"] = to_string(cfg.state);
  out.metadata["coupling"] = to_string(params.coupling);
  out.metadata["x0"] = format_double(cfg.x0);
  return out;
}

}  // namespace

SignalSet sample_sde(const ModelParameters& params, const SampleConfig& cfg) {
  return run_sampler<true>(params, cfg, Coupling::Derivative, sde_row);
}

SignalSet sample_direct(const ModelParameters& params, const SampleConfig& cfg) {
  return run_sampler<true>(params, cfg, Coupling::Direct, direct_row);
}

SignalSet sample(const ModelParameters& params, const SampleConfig& cfg) {
  return params.coupling == Coupling::Direct ? sample_direct(params, cfg) : sample_sde(params, cfg);
}

namespace serial {
SignalSet sample_sde(const ModelParameters& params, const SampleConfig& cfg) {
  return run_sampler<false>(params, cfg, Coupling::Derivative, sde_row);
}
SignalSet sample_direct(const ModelParameters& params, const SampleConfig& cfg) {
  return run_sampler<false>(params, cfg, Coupling::Direct, direct_row);
}
}  // namespace serial

}  // namespace cmps
