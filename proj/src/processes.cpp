#include "cmps/processes.hpp"

#include <cmath>
#include <complex>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "cmps/error.hpp"

namespace cmps {

namespace {

std::string join(const std::vector<double>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + format_double(xs[i]);
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Damped sines

const char* to_string(GammaConvention c) noexcept { return c == GammaConvention::Rate ? "rate" : "scale"; }

GammaConvention parse_gamma_convention(std::string_view s) {
  if (s == "rate") return GammaConvention::Rate;
  if (s == "scale") return GammaConvention::Scale;
  throw ConfigError("unknown gamma convention '" + std::string(s) + "' (expected rate|scale)");
}

void DampedSineSpec::validate() const {
  if (!(sample_rate > 0.0)) throw ConfigError("sample_rate must be > 0");
  if (frequencies.empty()) throw ConfigError("frequencies must be nonempty");
  for (double f : frequencies)
    if (!(f >= 0.0 && f < sample_rate / 2.0)) throw ConfigError("frequencies must lie below Nyquist");
  if (!(gamma_alpha > 0.0) || !(gamma_beta > 0.0)) throw ConfigError("gamma alpha and beta must be > 0");
  if (!(delay_unit > 0.0)) throw ConfigError("delay_unit must be > 0");
  if (!(decay_time > 0.0)) throw ConfigError("decay_time must be > 0");
  if (!std::isfinite(amplitude)) throw ConfigError("amplitude must be finite");
}

double damped_sine_value(const DampedSineSpec& spec, double frequency, double delay, double t) noexcept {
  if (t < delay) return 0.0;
  const double s = t - delay;
  return spec.amplitude * std::exp(-s / spec.decay_time) * std::sin(2.0 * std::numbers::pi * frequency * s);
}

double draw_delay(const DampedSineSpec& spec, RandomStream& rng) {
  const double scale = spec.convention == GammaConvention::Rate ? 1.0 / spec.gamma_beta : spec.gamma_beta;
  std::gamma_distribution<double> gamma(spec.gamma_alpha, scale);
  return gamma(rng) * spec.delay_unit;
}

namespace {

template <bool Parallel>
SignalSet damped_sines(const DampedSineSpec& spec, std::size_t n, std::uint64_t seed) {
  spec.validate();
  SignalSet out(n, spec.length, spec.dt());
  std::vector<double> delays(n);
  const auto m = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static) if (Parallel)
  for (std::ptrdiff_t i = 0; i < m; ++i) {
    RandomStream rng = rng_stream(seed, static_cast<std::uint64_t>(i));
    const double d = draw_delay(spec, rng);
    const auto pick = std::min(static_cast<std::size_t>(uniform01(rng) * spec.frequencies.size()),
                               spec.frequencies.size() - 1);
    const double f = spec.frequencies[pick];
    auto row = out.row(i);
    for (std::size_t k = 0; k < spec.length; ++k)
      row[k] = damped_sine_value(spec, f, d, static_cast<double>(k) * spec.dt());
    delays[i] = d;
  }

  const double horizon = static_cast<double>(spec.length) * spec.dt();
  std::size_t beyond = 0;
  for (double d : delays) beyond += d >= horizon;
  const double frac = n ? static_cast<double>(beyond) / static_cast<double>(n) : 0.0;

  auto& md = out.metadata;
  md["process"] = "damped_sine";
  md["frequencies"] = join(spec.frequencies);
  md["sample_rate"] = format_double(spec.sample_rate);
  md["gamma_alpha"] = format_double(spec.gamma_alpha);
  md["gamma_beta"] = format_double(spec.gamma_beta);
  md["gamma_convention"] = to_string(spec.convention);
  md["delay_unit"] = format_double(spec.delay_unit);
  md["decay_time"] = format_double(spec.decay_time);
  md["amplitude"] = format_double(spec.amplitude);
  md["seed"] = std::to_string(seed);
  md["delay_fraction_beyond_length"] = format_double(frac);
  if (frac > 0.9) {
    std::ostringstream msg;
    msg << "WARNING: " << beyond << " of " << n << " delays exceed the " << horizon
        << " s signal length under the " << to_string(spec.convention)
        << " Gamma convention; most signals are all zeros";
    std::cerr << msg.str() << '\n';
    md["warning"] = msg.str();
  }
  return out;
}

}  // namespace

SignalSet gen_damped_sines(const DampedSineSpec& spec, std::size_t n, std::uint64_t seed) {
  return damped_sines<true>(spec, n, seed);
}

// ---------------------------------------------------------------------------
// Spectral mixture

void MsmSpec::validate() const {
  if (components.empty()) throw ConfigError("msm needs at least one component");
  for (const auto& c : components) {
    // sigma = 0 is a degenerate, identically zero component.
    if (!(c.sigma >= 0.0) || !std::isfinite(c.sigma)) throw ConfigError("msm sigma must be finite and >= 0");
    if (!(c.lambda > 0.0)) throw ConfigError("msm lambda must be > 0");
    if (!(c.omega >= 0.0)) throw ConfigError("msm omega must be >= 0");
  }
  if (!(dt > 0.0)) throw ConfigError("msm dt must be > 0");
}

double msm_covariance(const MsmSpec& spec, double tau) {
  double c = 0.0;
  for (const auto& comp : spec.components)
    c += comp.sigma * comp.sigma * std::exp(-comp.lambda * std::abs(tau)) * std::cos(comp.omega * tau);
  return c;
}

StateSpaceModel ssm_from_msm(const MsmSpec& spec) {
  const auto N = static_cast<Eigen::Index>(spec.components.size());
  StateSpaceModel m;
  m.F = Eigen::MatrixXd::Zero(2 * N, 2 * N);
  m.L = Eigen::MatrixXd::Identity(2 * N, 2 * N);
  m.Q = Eigen::MatrixXd::Zero(2 * N, 2 * N);
  m.H = Eigen::MatrixXd::Zero(1, 2 * N);
  for (Eigen::Index j = 0; j < N; ++j) {
    const auto& c = spec.components[j];
    m.F.block(2 * j, 2 * j, 2, 2) << -c.lambda, -c.omega, c.omega, -c.lambda;
    m.Q.block(2 * j, 2 * j, 2, 2) = 2.0 * c.lambda * c.sigma * c.sigma * Eigen::Matrix2d::Identity();
    m.H(0, 2 * j) = 1.0;
  }
  return m;
}

DiscreteModel discretize(const StateSpaceModel& ssm, double dt) {
  const Eigen::Index n = ssm.F.rows();
  if (n % 2 != 0 || ssm.F.cols() != n) throw ConfigError("state-space drift must be 2N x 2N");
  const Eigen::MatrixXd LQL = ssm.L * ssm.Q * ssm.L.transpose();
  DiscreteModel d{Eigen::MatrixXd::Zero(n, n), Eigen::MatrixXd::Zero(n, n)};
  for (Eigen::Index j = 0; j < n; j += 2) {
    const Eigen::Matrix2d Fb = ssm.F.block(j, j, 2, 2);
    const double lambda = -Fb(0, 0), omega = Fb(1, 0);
    if (Fb(1, 1) != Fb(0, 0) || Fb(0, 1) != -omega) throw ConfigError("drift block is not damped-rotation");
    const Eigen::Matrix2d Qb = LQL.block(j, j, 2, 2);
    if (Qb(0, 1) != 0.0 || Qb(1, 0) != 0.0 || Qb(0, 0) != Qb(1, 1))
      throw ConfigError("diffusion block is not isotropic");
    const double decay = std::exp(-lambda * dt);
    const double c = std::cos(omega * dt), s = std::sin(omega * dt);
    d.Ad.block(j, j, 2, 2) << decay * c, -decay * s, decay * s, decay * c;
    // int_0^dt exp(-2 lambda u) du, continuous at lambda = 0.
    const double w = lambda == 0.0 ? dt : -std::expm1(-2.0 * lambda * dt) / (2.0 * lambda);
    d.Sigma.block(j, j, 2, 2) = Qb(0, 0) * w * Eigen::Matrix2d::Identity();
  }
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = 0; b < n; ++b)
      if (a / 2 != b / 2 && (ssm.F(a, b) != 0.0 || LQL(a, b) != 0.0))
        throw ConfigError("state-space model must be block diagonal");
  return d;
}

const char* to_string(GpInit g) noexcept { return g == GpInit::Stationary ? "stationary" : "zero"; }

GpInit parse_gp_init(std::string_view s) {
  if (s == "stationary") return GpInit::Stationary;
  if (s == "zero") return GpInit::Zero;
  throw ConfigError("unknown gp init '" + std::string(s) + "' (expected stationary|zero)");
}

namespace {

template <bool Parallel>
SignalSet gp(const MsmSpec& spec, std::size_t n, std::size_t length, std::uint64_t seed, GpInit init,
             std::size_t first_index) {
  spec.validate();
  const StateSpaceModel ssm = ssm_from_msm(spec);
  const DiscreteModel dm = discretize(ssm, spec.dt);
  const Eigen::Index dim = ssm.F.rows();
  // Sigma is diagonal for this model family.
  const Eigen::VectorXd noise_std = dm.Sigma.diagonal().cwiseSqrt();
  Eigen::VectorXd stationary_std(dim);
  for (Eigen::Index j = 0; j < dim; ++j) stationary_std(j) = spec.components[j / 2].sigma;

  SignalSet out(n, length, spec.dt);
  const auto m = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static) if (Parallel)
  for (std::ptrdiff_t i = 0; i < m; ++i) {
    RandomStream rng = rng_stream(seed, first_index + static_cast<std::size_t>(i));
    Eigen::VectorXd g = Eigen::VectorXd::Zero(dim);
    if (init == GpInit::Stationary)
      for (Eigen::Index j = 0; j < dim; ++j) g(j) = stationary_std(j) * standard_normal(rng);
    Eigen::VectorXd z(dim);
    auto row = out.row(i);
    for (std::size_t k = 0; k < length; ++k) {
      row[k] = (ssm.H * g)(0);
      if (k + 1 == length) break;
      for (Eigen::Index j = 0; j < dim; ++j) z(j) = standard_normal(rng);
      g = (dm.Ad * g + noise_std.cwiseProduct(z)).eval();
    }
  }

  auto& md = out.metadata;
  md["process"] = "msm";
  std::string comps;
  for (const auto& c : spec.components)
    comps += (comps.empty() ? "" : ";") + format_double(c.sigma) + "," + format_double(c.lambda) + "," +
             format_double(c.omega);
  md["components"] = comps;
  md["init"] = to_string(init);
  md["seed"] = std::to_string(seed);
  md["first_index"] = std::to_string(first_index);
  return out;
}

}  // namespace

SignalSet gen_gp(const MsmSpec& spec, std::size_t n, std::size_t length, std::uint64_t seed, GpInit init,
                 std::size_t first_index) {
  return gp<true>(spec, n, length, seed, init, first_index);
}

// ---------------------------------------------------------------------------
// Filtered Poisson process

void FppSpec::validate() const {
  if (!(intensity >= 0.0)) throw ConfigError("fpp intensity must be >= 0");
  if (!(tau > 0.0)) throw ConfigError("fpp tau must be > 0");
  if (!(dt > 0.0)) throw ConfigError("fpp dt must be > 0");
  if (!std::isfinite(amplitude) || !std::isfinite(omega)) throw ConfigError("fpp amplitude/omega must be finite");
}

double fpp_pulse(const FppSpec& spec, double s) noexcept {
  if (s < 0.0) return 0.0;
  return std::exp(-s / spec.tau) * std::sin(spec.omega * s);
}

std::vector<double> fpp_signal_from_arrivals(const FppSpec& spec, std::span<const PulseArrival> arrivals,
                                             std::size_t n_grid) {
  // S_k = sum_{t_j <= t_k} A_j exp(c (t_k - t_j)), c = -1/tau + i omega; x_k = Im S_k.
  const std::complex<double> c(-1.0 / spec.tau, spec.omega);
  const std::complex<double> step = std::exp(c * spec.dt);
  std::vector<double> out(n_grid);
  std::complex<double> S = 0.0;
  std::size_t j = 0;
  for (std::size_t k = 0; k < n_grid; ++k) {
    const double t = static_cast<double>(k) * spec.dt;
    if (k > 0) S *= step;
    for (; j < arrivals.size() && arrivals[j].time <= t; ++j)
      S += arrivals[j].amplitude * std::exp(c * (t - arrivals[j].time));
    out[k] = S.imag();
  }
  return out;
}

namespace {

template <bool Parallel>
SignalSet fpp(const FppSpec& spec, std::size_t n, std::uint64_t seed, std::size_t first_index) {
  spec.validate();
  const std::size_t grid = spec.burn_in + spec.length;
  const double t_end = grid ? static_cast<double>(grid - 1) * spec.dt : 0.0;
  SignalSet out(n, spec.length, spec.dt);
  const auto m = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static) if (Parallel)
  for (std::ptrdiff_t i = 0; i < m; ++i) {
    RandomStream rng = rng_stream(seed, first_index + static_cast<std::size_t>(i));
    std::vector<PulseArrival> arrivals;
    if (spec.intensity > 0.0) {
      double t = 0.0;
      while (true) {
        t += -std::log1p(-uniform01(rng)) / spec.intensity;
        if (t > t_end) break;
        const double sign = (rng() >> 63) ? 1.0 : -1.0;
        arrivals.push_back({t, sign * spec.amplitude});
      }
    }
    const auto full = fpp_signal_from_arrivals(spec, arrivals, grid);
    std::copy(full.begin() + static_cast<std::ptrdiff_t>(spec.burn_in), full.end(), out.row(i).begin());
  }
  auto& md = out.metadata;
  md["process"] = "fpp";
  md["intensity"] = format_double(spec.intensity);
  md["amplitude"] = format_double(spec.amplitude);
  md["tau"] = format_double(spec.tau);
  md["omega"] = format_double(spec.omega);
  md["burn_in"] = std::to_string(spec.burn_in);
  md["seed"] = std::to_string(seed);
  md["first_index"] = std::to_string(first_index);
  return out;
}

}  // namespace

SignalSet gen_fpp(const FppSpec& spec, std::size_t n, std::uint64_t seed, std::size_t first_index) {
  return fpp<true>(spec, n, seed, first_index);
}

FppCorrelators fpp_exact_correlators(const FppSpec& spec, double t1, double t2, double abs_tol) {
  spec.validate();
  if (!(t2 >= t1)) throw OutOfRangeError("fpp correlators need t2 >= t1");
  const double delta = t2 - t1;
  const double horizon = 20.0 * spec.tau;

  auto integrate = [&](auto f, double a, double b) {
    if (!(b > a)) return 0.0;
    double err = 0.0;
    const double v = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 20, 1e-13, &err);
    if (!(err <= abs_tol) || !std::isfinite(v))
      throw QuadratureError("pulse integral error estimate " + format_double(err) + " exceeds " +
                            format_double(abs_tol));
    return v;
  };
  auto phi = [&](double s) { return fpp_pulse(spec, s); };

  // Integration variable u = t1 - alpha, so phi(t1 - alpha) = phi(u), phi(t2 - alpha) = phi(u + delta).
  const double i31 = integrate([&](double u) { return std::pow(phi(u), 3) * phi(u + delta); }, 0.0, horizon);
  const double i13 = integrate([&](double u) { return phi(u) * std::pow(phi(u + delta), 3); }, 0.0, horizon);
  const double i11 = integrate([&](double u) { return phi(u) * phi(u + delta); }, 0.0, horizon);
  const double i20 = integrate([&](double u) { return phi(u) * phi(u); }, 0.0, horizon);
  const double i02_past = integrate([&](double u) { return std::pow(phi(u + delta), 2); }, 0.0, horizon);
  const double i02_gap = integrate([&](double v) { return phi(v) * phi(v); }, 0.0, delta);

  const double l = spec.intensity;
  const double a4 = std::pow(spec.amplitude, 4);
  return {l * a4 * i31 + 3.0 * l * l * a4 * i11 * i20,
          l * a4 * i13 + 3.0 * l * l * a4 * i11 * (i02_past + i02_gap)};
}

namespace serial {
SignalSet gen_damped_sines(const DampedSineSpec& spec, std::size_t n, std::uint64_t seed) {
  return damped_sines<false>(spec, n, seed);
}
SignalSet gen_gp(const MsmSpec& spec, std::size_t n, std::size_t length, std::uint64_t seed, GpInit init,
                 std::size_t first_index) {
  return gp<false>(spec, n, length, seed, init, first_index);
}
SignalSet gen_fpp(const FppSpec& spec, std::size_t n, std::uint64_t seed, std::size_t first_index) {
  return fpp<false>(spec, n, seed, first_index);
}
}  // namespace serial

}  // namespace cmps
